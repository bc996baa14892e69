"""Kernel builders shared by the engine and acceptance tests."""

from __future__ import annotations

import itertools
import math
import random

from warpshare.config import DynExec, SmConfig
from warpshare.engine import PlanMode, plan_residency
from warpshare.workload import AddrPattern, KernelSpec, OpKind, TraceOp

EXIT = TraceOp(OpKind.EXIT)


def kernel(body, threads=32, grid=1, regs=4, spm=0, trip=1, name="k") -> KernelSpec:
    body = tuple(body)
    if not body or body[-1].kind is not OpKind.EXIT:
        body += (EXIT,)
    return KernelSpec(name, grid, threads, regs, spm, body, trip)


def alu(dst, *src):
    return TraceOp(OpKind.ALU, (dst,), tuple(src))


# Small op alphabet for exhaustive enumeration over two registers.
ALPHABET = (
    [alu(d) for d in (1, 2)]
    + [alu(d, s) for d in (1, 2) for s in (1, 2)]
    + [TraceOp(OpKind.SHARED_LOAD, (d,), (), 0) for d in (1, 2)]
    + [TraceOp(OpKind.GLOBAL_LOAD, (d,), (), addr=AddrPattern(0, 128, 0)) for d in (1, 2)]
    + [TraceOp(OpKind.GLOBAL_STORE, (), (1,), addr=AddrPattern(0, 0, 0)),
       TraceOp(OpKind.SHARED_STORE, (), (2,), 4),
       TraceOp(OpKind.BARRIER)]
)

# (threads, grid): every way to field one or two warps.
WARP_LAYOUTS = ((32, 1), (64, 1), (32, 2))


def enumerate_small(max_len: int):
    for n in range(max_len + 1):
        yield from itertools.product(ALPHABET, repeat=n)


def random_small_body(rng: random.Random, max_len: int = 7):
    """Up to seven ops plus exit over four registers and two address lines."""
    ops = []
    for _ in range(rng.randint(0, max_len)):
        k = rng.choice(list(OpKind)[:-1])
        r = lambda: rng.randint(1, 4)  # noqa: E731
        addr = AddrPattern(rng.choice((0, 128, 4096)), rng.choice((0, 128)), rng.choice((0, 128)))
        if k is OpKind.ALU:
            ops.append(TraceOp(k, (r(),), tuple(r() for _ in range(rng.randint(0, 2)))))
        elif k is OpKind.GLOBAL_LOAD:
            ops.append(TraceOp(k, (r(),), (r(),), addr=addr))
        elif k is OpKind.GLOBAL_STORE:
            ops.append(TraceOp(k, (), (r(),), addr=addr))
        elif k is OpKind.SHARED_LOAD:
            ops.append(TraceOp(k, (r(),), (), rng.randrange(0, 64, 4)))
        elif k is OpKind.SHARED_STORE:
            ops.append(TraceOp(k, (), (r(),), rng.randrange(0, 64, 4)))
        else:
            ops.append(TraceOp(k))
    return ops


def one_sm(**kw) -> SmConfig:
    base = dict(num_sms=1, num_schedulers=1, max_cycles=1_000_000)
    base.update(kw)
    return SmConfig(**base)


def barrier_pair_case(strict=False):
    """Two paired blocks of two warps; each warp touches a shared register
    and then waits at a barrier."""
    regs = 36
    r_tb = 64 * regs
    t = 0.1
    cfg = one_sm(registers_per_sm=r_tb + math.ceil(t * r_tb) + 16, sharing_threshold=t,
                 strict_block_ownership=strict, num_schedulers=2)
    body = (alu(36, 1), TraceOp(OpKind.BARRIER), alu(2, 36), alu(35, 2))
    return cfg, kernel(body, threads=64, grid=2, regs=regs)


def random_barrier_case(seed: int):
    """A sharing workload whose shared accesses are often followed by a barrier.

    Retries until the plan really pairs blocks.
    """
    rng = random.Random(seed)
    while True:
        cfg, k = _barrier_candidate(rng)
        if plan_residency(cfg, k, PlanMode.SHARING).plan.shared_pairs:
            return cfg, k


def _barrier_candidate(rng):
    t = rng.choice((0.1, 0.3, 0.5, 0.7, 0.9))
    tpb = 32 * rng.randint(1, 4)
    warps = tpb // 32
    use_spm = rng.random() < 0.4
    cfg_kw = dict(
        num_sms=rng.randint(1, 3), num_schedulers=rng.randint(1, 2), sharing_threshold=t,
        scheduler=rng.choice(("lrr", "gto", "owf")),
        strict_block_ownership=rng.random() < 0.3,
        dyn_exec=DynExec(enabled=rng.random() < 0.5, window=rng.choice((50, 200, 1000))),
        rng_seed=rng.randint(0, 1000), max_cycles=2_000_000)
    if use_spm:
        regs = rng.randint(4, 16)
        spm = rng.randrange(256, 4096, 4)
        share = math.ceil(t * spm)
        cfg_kw["scratchpad_per_sm"] = spm * rng.randint(1, 3) + share * rng.randint(1, 3)
        cfg_kw["registers_per_sm"] = 65536
        cfg_kw["max_blocks"] = 16
    else:
        regs = rng.randint(4, 48)
        spm = 0
        r_tb = warps * 32 * regs
        cfg_kw["registers_per_sm"] = (r_tb * rng.randint(1, 3)
                                      + math.ceil(t * r_tb) * rng.randint(1, 3))
    cfg = SmConfig(**cfg_kw)
    ops = []
    for _ in range(rng.randint(1, 10)):
        roll = rng.random()
        r = lambda: rng.randint(1, regs)  # noqa: E731
        if use_spm and roll < 0.4:
            off = rng.randrange(0, spm, 4)
            if rng.random() < 0.5:
                ops.append(TraceOp(OpKind.SHARED_LOAD, (r(),), (), off))
            else:
                ops.append(TraceOp(OpKind.SHARED_STORE, (), (r(),), off))
        elif roll < 0.55:
            ops.append(TraceOp(OpKind.GLOBAL_LOAD, (r(),), (r(),),
                               addr=AddrPattern(rng.randrange(0, 8192, 128), 128, 0)))
        else:
            ops.append(alu(r(), r()))
        if rng.random() < 0.5:
            ops.append(TraceOp(OpKind.BARRIER))
    k = kernel(ops, threads=tpb, grid=rng.randint(1, 12), regs=regs, spm=spm,
               trip=rng.randint(1, 3), name=f"bar{rng.random():.6f}")
    return cfg, k
