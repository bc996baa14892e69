import dataclasses
import os
import random
import subprocess
import sys

import pytest

from kernels import (WARP_LAYOUTS, alu, enumerate_small, barrier_pair_case, kernel, one_sm,
                     random_barrier_case, random_small_body)
from oracle import run_oracle
from warpshare.config import DynExec, SmConfig
from warpshare.engine import (PlanMode, Simulation, ThrottleState, Trace, available_backends,
                              build_program, core, run, throttle_gate, throttle_update)
from warpshare.engine.metrics import RawCounters, build_report
from warpshare.engine.throttle import RngStream, update_probability
from warpshare.errors import CycleLimitExceeded, SimulatorInvariantViolation
from warpshare.scheduler import WarpClass
from warpshare.sharing import PairState
from warpshare.workload import OpKind, Profile, generate

needs_ccore = pytest.mark.skipif("cython" not in available_backends(),
                                 reason="compiled core not built")


def _units(rep):
    return [(u.issue_cycles, u.stall_cycles, u.idle_cycles) for u in rep.per_sm[0].units]


def test_dependent_chain_takes_ten_cycles():
    cfg = one_sm()
    trace = Trace(issues=True)
    rep = run(cfg, kernel([alu(2, 1), alu(3, 2)]), PlanMode.BASELINE, trace=trace)
    assert rep.cycles == 10
    assert [rec[0] for rec in trace.issues] == [1, 5, 9]
    # issue at 1, 5 and 9; stalls at 2-4 and 6-8; the retire cycle is idle
    assert _units(rep) == [(3, 6, 1)]


def test_second_warp_hides_stalls():
    body = [alu(2, 1), alu(3, 2)]
    one = run(one_sm(), kernel(body), PlanMode.BASELINE)
    two = run(one_sm(), kernel(body, threads=64), PlanMode.BASELINE)
    assert two.stall_cycles < one.stall_cycles


def test_zero_grid():
    rep = run(SmConfig(), kernel([alu(1)], grid=0), PlanMode.SHARING)
    assert rep.cycles == 0 and rep.ipc == 0.0 and rep.instructions_issued == 0


def test_hotspot_pairs_resident_blocks():
    k = kernel([alu(2, 1), alu(36, 2), alu(3, 36)], threads=256, grid=6, regs=36)
    rep = run(SmConfig(num_sms=1), k, PlanMode.SHARING)
    assert (rep.blocks_resident, rep.shared_pairs, rep.unshared_blocks) == (6, 3, 0)
    assert rep.blocks_completed == 6


def test_lone_pair_member_runs_unshared():
    # Room for a pair, but only one block in the grid.
    cfg, k = barrier_pair_case()
    k = dataclasses.replace(k, grid_blocks=1)
    trace = Trace(locks=True)
    rep = run(cfg, k, PlanMode.SHARING, trace=trace)
    assert rep.shared_pairs == 1
    assert trace.locks == [] and rep.lock_wait_cycles == 0


@pytest.mark.parametrize("strict", [False, True])
def test_barrier_after_shared_access_terminates(strict):
    cfg, k = barrier_pair_case(strict)
    trace = Trace(locks=True)
    rep = run(cfg, k, PlanMode.SHARING, trace=trace)
    assert rep.blocks_completed == 2
    events = [e[2] for e in trace.locks]
    assert "deny" in events and "acquire" in events
    assert rep.lock_wait_cycles > 0


def test_watchdog():
    cfg, k = barrier_pair_case()
    with pytest.raises(CycleLimitExceeded):
        run(cfg.replace(max_cycles=5), k, PlanMode.SHARING)


# Oracle comparison without sharing.

def _oracle_matches(cfg, k):
    rep = run(cfg, k, PlanMode.BASELINE)
    o = run_oracle(k, cfg)
    units = _units(rep)
    return (rep.cycles, [u[0] for u in units], [u[1] for u in units],
            [u[2] for u in units]) == (o.cycles, o.issue, o.stall, o.idle)


def test_oracle_exhaustive_two_ops():
    for n, body in enumerate(enumerate_small(2)):
        for tpb, grid in WARP_LAYOUTS:
            for sched in (1, 2):
                cfg = one_sm(num_schedulers=sched)
                k = kernel(body, threads=tpb, grid=grid, spm=64, trip=1 + n % 2)
                assert _oracle_matches(cfg, k), (body, tpb, grid, sched)


@pytest.mark.parametrize("seed", range(0, 400, 4))
def test_oracle_random(seed):
    for s in range(seed, seed + 4):
        rng = random.Random(s)
        body = random_small_body(rng)
        tpb, grid = rng.choice(WARP_LAYOUTS)
        cfg = one_sm(num_schedulers=rng.randint(1, 2),
                     scheduler=rng.choice(("lrr", "gto", "owf")))
        k = kernel(body, threads=tpb, grid=grid, spm=64, trip=rng.randint(1, 3))
        assert _oracle_matches(cfg, k), s


# Mode and backend equivalences.

def test_full_threshold_equals_baseline():
    for seed in range(10):
        k = generate(list(Profile)[seed % 3], seed)
        k = dataclasses.replace(k, grid_blocks=min(k.grid_blocks, 40))
        cfg = SmConfig(num_sms=4, sharing_threshold=1.0, scheduler="owf")
        a = run(cfg, k, PlanMode.SHARING)
        b = run(cfg, k, PlanMode.BASELINE)
        assert a == b


def test_deterministic():
    k = generate(Profile.MEMORY_BOUND, 3)
    cfg = SmConfig(num_sms=4, scheduler="owf", dyn_exec=DynExec(enabled=True, window=100))
    assert run(cfg, k, PlanMode.SHARING) == run(cfg, k, PlanMode.SHARING)


def _small_cases():
    for seed in range(12):
        yield random_barrier_case(seed)
    for seed in range(6):
        k = generate(list(Profile)[seed % 3], seed)
        k = dataclasses.replace(k, grid_blocks=8, loop_trip_count=2)
        cfg = SmConfig(num_sms=2, scheduler=("lrr", "gto", "owf")[seed % 3],
                       dyn_exec=DynExec(enabled=True, window=50), rng_seed=seed)
        yield cfg, k


@needs_ccore
@pytest.mark.parametrize("case", list(_small_cases()), ids=lambda c: c[1].name)
def test_backends_agree(case):
    cfg, k = case
    out = []
    for backend in ("python", "cython"):
        trace = Trace(issues=True, locks=True)
        rep = run(cfg, k, PlanMode.SHARING, trace=trace, backend=backend)
        out.append((rep, trace.issues, trace.locks))
    assert out[0] == out[1]


def test_owner_warps_never_denied(monkeypatch):
    real = PairState.record_deny

    def checked(self, block, position=None):
        assert self.owner != block
        real(self, block, position)

    monkeypatch.setattr(PairState, "record_deny", checked)
    for seed in range(20):
        cfg, k = random_barrier_case(seed)
        prog, _, _ = build_program(cfg, k, PlanMode.SHARING)
        sim = Simulation(prog)
        while sim.step():
            pass


def test_instruction_total_is_checked():
    cfg = one_sm()
    prog, _, k = build_program(cfg, kernel([alu(2, 1)]), PlanMode.BASELINE)
    raw = core.simulate(prog)
    with pytest.raises(SimulatorInvariantViolation, match="expected"):
        build_report(raw, k.total_instructions + 1, 1, 1, 0, "none")


def test_conservation_is_checked():
    raw = RawCounters(cycles=10, instructions=[3], lock_wait=[0], l1_accesses=[0],
                      l1_misses=[0], blocks_completed=[1], unit_issue=[[3]],
                      unit_stall=[[5]], unit_idle=[[1]])
    with pytest.raises(SimulatorInvariantViolation, match="!= 10 cycles"):
        build_report(raw, 3, 1, 1, 0, "none")


# Throttle.

def test_throttle_update_examples():
    ts = ThrottleState.initial(2)
    assert throttle_update(ts, 1, 120, 100).p[1] == 0.9
    assert throttle_update(ts, 1, 80, 100).p[1] == 1.0
    low = dataclasses.replace(ts, p=[0.0, 0.0])
    assert throttle_update(low, 1, 120, 100).p[1] == 0.0
    assert throttle_update(ts, 1, 100, 100).p[1] == 1.0
    assert throttle_update(ts, 0, 500, 100) is ts


def test_probability_stays_on_the_step_grid():
    p = 1.0
    for _ in range(7):
        p = update_probability(p, 2, 1, 0.1)
    assert p == 0.3
    for _ in range(30):
        p = update_probability(p, 1, 2, 0.1)
    assert p == 1.0


def test_throttle_gate_examples():
    ts = ThrottleState.initial(3)
    rng = RngStream(0, 0)
    assert not throttle_gate(WarpClass.NONOWNER, OpKind.GLOBAL_LOAD, 0, ts, rng)
    assert throttle_gate(WarpClass.NONOWNER, OpKind.GLOBAL_LOAD, 1, ts, rng)
    assert throttle_gate(WarpClass.OWNER, OpKind.GLOBAL_LOAD, 0, ts, rng)
    assert throttle_gate(WarpClass.NONOWNER, OpKind.ALU, 0, ts, rng)
    assert throttle_gate(WarpClass.NONOWNER, OpKind.GLOBAL_STORE, 0, ts, rng,
                         owner_established=False)


def test_throttle_draws_replay():
    ts = dataclasses.replace(ThrottleState.initial(2), p=[0.0, 0.3])

    def draws(seed):
        rng = RngStream(seed, 1)
        return [throttle_gate(WarpClass.NONOWNER, OpKind.GLOBAL_LOAD, 1, ts, rng)
                for _ in range(3000)]

    a = draws(7)
    assert a == draws(7)
    assert a != draws(8)
    assert 0.25 < sum(a) / len(a) < 0.35



def test_backend_can_be_forced_to_python():
    env = dict(os.environ, WARPSHARE_BACKEND="python")
    code = "from warpshare.engine import BACKEND; print(BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True)
    assert out.stdout.strip() == "python"
