"""Reference simulation core built directly on the sharing and scheduler objects.

Each cycle has three phases:

A. every SM retires finished blocks, then the grid queue hands out blocks
   round-robin over SMs, one per SM per pass, into the lowest free slot;
B. every scheduler unit of every SM evaluates its warps, picks one and
   issues it;
C. at window boundaries the throttle probabilities are updated.

The compiled core implements the same sequence on flat arrays and must agree
with this one on every counter and trace record.
"""

from __future__ import annotations

from collections import deque

from ..errors import CycleLimitExceeded, SimulatorInvariantViolation
from ..occupancy import ResourceKind
from ..scheduler import Policy, SchedulerUnit, WarpClass, WarpView
from ..sharing import Grant, PairState
from .metrics import RawCounters
from .program import (ALU, BAR, EXIT, GLOAD, GSTORE, SHARE_NONE, SHARE_REG, SLOAD,
                      Program)
from .throttle import REFERENCE_SM, RngStream, update_probability

ACTIVE, AT_BARRIER, FINISHED = 0, 1, 2
_POLICIES = (Policy.LRR, Policy.GTO, Policy.OWF)


class Trace:
    """Optional issue and lock event records."""

    def __init__(self, issues: bool = False, locks: bool = False):
        self.issues = [] if issues else None
        self.locks = [] if locks else None


class _Warp:
    __slots__ = ("dyn", "block", "pos", "unit", "pc", "it", "status", "ready_at",
                 "reg_ready", "max_pending", "last_issue")

    def __init__(self, dyn, block, pos, unit, regs):
        self.dyn = dyn
        self.block = block
        self.pos = pos
        self.unit = unit
        self.pc = 0
        self.it = 0
        self.status = ACTIVE
        self.ready_at = 0
        self.reg_ready = [0] * (regs + 1)
        self.max_pending = 0
        self.last_issue = -1


class _Block:
    __slots__ = ("gid", "slot", "pair", "warps", "unfinished", "at_barrier")

    def __init__(self, gid, slot, pair):
        self.gid = gid
        self.slot = slot
        self.pair = pair
        self.warps = []
        self.unfinished = 0
        self.at_barrier = 0


class _Sm:
    def __init__(self, index, prog: Program, blocks_by_gid):
        self.index = index
        self.slots = [None] * prog.slots
        kind = ResourceKind.REGISTER if prog.shared_kind == SHARE_REG else ResourceKind.SCRATCHPAD

        def finished(warp_id):
            gid, pos = warp_id
            blk = blocks_by_gid.get(gid)
            return blk is not None and blk.warps[pos].status == FINISHED

        self.pairs = [PairState(kind, prog.warps_per_block, finished, prog.strict)
                      for _ in range(prog.pairs)]
        self.units = [SchedulerUnit(_POLICIES[prog.policy]) for _ in range(prog.num_sched)]
        self.unit_warps = [[] for _ in range(prog.num_sched)]
        self.unit_unfinished = [0] * prog.num_sched
        self.next_dyn = 0
        self.resident = 0
        self.l1 = [[] for _ in range(prog.l1_sets)]
        self.rng = RngStream(prog.seed, index)
        self.p = 0.0 if index == REFERENCE_SM else 1.0
        self.window_stalls = 0
        # counters
        self.instructions = 0
        self.lock_wait = 0
        self.l1_accesses = 0
        self.l1_misses = 0
        self.blocks_completed = 0
        self.issue = [0] * prog.num_sched
        self.stall = [0] * prog.num_sched
        self.idle = [0] * prog.num_sched

    def free_slot(self):
        for s, b in enumerate(self.slots):
            if b is None:
                return s
        return None


class Simulation:
    def __init__(self, prog: Program, trace: Trace | None = None):
        self.prog = prog
        self.trace = trace or Trace()
        self.blocks_by_gid: dict[int, _Block] = {}
        self.sms = [_Sm(i, prog, self.blocks_by_gid) for i in range(prog.num_sms)]
        self.queue = deque(range(prog.grid_blocks))
        self.rr_sm = 0
        self.cycle = 0
        self.done = prog.grid_blocks == 0

    # helpers

    def _warp_label(self, ident):
        """Lock-trace id: dynamic warp id for warp locks, block id for block locks."""
        if ident is None:
            return -1
        if isinstance(ident, tuple):
            gid, pos = ident
            return self.blocks_by_gid[gid].warps[pos].dyn
        return ident

    def _flush_lock_events(self, sm: _Sm, pair: PairState):
        if self.trace.locks is not None:
            for ev in pair.events:
                if ev.event == "transfer":
                    holder, requester = ev.holder, ev.requester
                else:
                    holder = self._warp_label(ev.holder)
                    requester = self._warp_label(ev.requester)
                self.trace.locks.append((self.cycle, sm.index, ev.event, holder, requester))
        pair.events.clear()

    def _ready_at(self, w: _Warp) -> int:
        prog = self.prog
        if prog.op_kind[w.pc] == EXIT:
            return w.max_pending
        t = 0
        rr = w.reg_ready
        for r in prog.op_regs[w.pc]:
            if rr[r] > t:
                t = rr[r]
        return t

    @staticmethod
    def _class(blk: _Block) -> WarpClass:
        pair = blk.pair
        if pair is None or not pair.is_paired:
            return WarpClass.UNSHARED
        return WarpClass.OWNER if pair.owner == blk.gid else WarpClass.NONOWNER

    # phase A

    def retire_blocks(self, sm: _Sm):
        for s, blk in enumerate(sm.slots):
            if blk is None or blk.unfinished:
                continue
            for w in blk.warps:
                sm.unit_warps[w.unit].remove(w)
            if blk.pair is not None:
                blk.pair.on_block_finish(blk.gid, bool(self.queue))
                self._flush_lock_events(sm, blk.pair)
            del self.blocks_by_gid[blk.gid]
            sm.slots[s] = None
            sm.resident -= 1
            sm.blocks_completed += 1

    def launch_blocks(self):
        """Round-robin over SMs, one block per SM per pass, lowest free slot."""
        n = len(self.sms)
        while self.queue:
            for k in range(n):
                sm = self.sms[(self.rr_sm + k) % n]
                slot = sm.free_slot()
                if slot is not None:
                    break
            else:
                return
            self.rr_sm = (sm.index + 1) % n
            self._launch(sm, slot, self.queue.popleft())

    def _launch(self, sm: _Sm, slot: int, gid: int):
        prog = self.prog
        pair = None
        if slot >= prog.unshared_slots and prog.shared_kind != SHARE_NONE:
            pair = sm.pairs[(slot - prog.unshared_slots) // 2]
        blk = _Block(gid, slot, pair)
        self.blocks_by_gid[gid] = blk
        for j in range(prog.warps_per_block):
            dyn = sm.next_dyn
            sm.next_dyn += 1
            unit = dyn % prog.num_sched
            w = _Warp(dyn, blk, j, unit, prog.regs)
            w.ready_at = self._ready_at(w)
            blk.warps.append(w)
            sm.unit_warps[unit].append(w)
            sm.unit_unfinished[unit] += 1
        blk.unfinished = prog.warps_per_block
        if pair is not None:
            pair.join(gid)
        sm.slots[slot] = blk
        sm.resident += 1

    # phase B

    def _l1_access(self, sm: _Sm, addr: int, is_load: bool) -> bool:
        prog = self.prog
        line = addr // prog.line_bytes
        ways = sm.l1[line % prog.l1_sets]
        sm.l1_accesses += 1
        if line in ways:
            ways.remove(line)
            ways.append(line)
            return True
        sm.l1_misses += 1
        if is_load:
            if len(ways) == prog.l1_ways:
                ways.pop(0)
            ways.append(line)
        return False

    def _evaluate(self, sm: _Sm, w: _Warp, cls: WarpClass) -> bool:
        prog = self.prog
        if w.status != ACTIVE or w.ready_at > self.cycle:
            return False
        blk = w.block
        pair = blk.pair
        op = w.pc
        paired = pair is not None and pair.is_paired
        if paired and prog.op_lock[op] and not pair.holds_lock(blk.gid, w.pos):
            if not pair.would_grant(blk.gid, w.pos):
                pair.record_deny(blk.gid, w.pos)
                self._flush_lock_events(sm, pair)
                sm.lock_wait += 1
                return False
        kind = prog.op_kind[op]
        if (prog.dyn_enabled and (kind == GLOAD or kind == GSTORE)
                and cls is WarpClass.NONOWNER and pair.owner is not None):
            if sm.index == REFERENCE_SM:
                return False
            if sm.p >= 1.0:
                return True
            if sm.p <= 0.0:
                return False
            return sm.rng.next() < sm.p
        return True

    def _release_barrier(self, blk: _Block):
        if blk.at_barrier and blk.at_barrier == blk.unfinished:
            for w in blk.warps:
                if w.status == AT_BARRIER:
                    w.status = ACTIVE
                    w.pc += 1
                    w.ready_at = max(self._ready_at(w), self.cycle + 1)
            blk.at_barrier = 0

    def _issue(self, sm: _Sm, u: int, w: _Warp, cls: WarpClass, mask: int):
        prog = self.prog
        c = self.cycle
        sm.instructions += 1
        sm.issue[u] += 1
        w.last_issue = c
        blk = w.block
        pair = blk.pair
        op = w.pc
        if (pair is not None and pair.is_paired and prog.op_lock[op]
                and not pair.holds_lock(blk.gid, w.pos)):
            if pair.try_acquire(blk.gid, w.pos) is not Grant.GRANTED:
                raise SimulatorInvariantViolation("issued warp lost its lock grant")
            self._flush_lock_events(sm, pair)
        if self.trace.issues is not None:
            self.trace.issues.append((c, sm.index, u, w.dyn, int(cls), mask))
        kind = prog.op_kind[op]
        if kind == ALU or kind == SLOAD or kind == GLOAD:
            if kind == ALU:
                lat = prog.lat_alu
            elif kind == SLOAD:
                lat = prog.lat_smem
            else:
                addr = prog.op_base[op] + prog.op_wstride[op] * w.dyn + prog.op_istride[op] * w.it
                lat = prog.lat_hit if self._l1_access(sm, addr, True) else prog.lat_miss
            t = c + lat
            for d in prog.op_dst[op]:
                w.reg_ready[d] = t
            if prog.op_dst[op] and t > w.max_pending:
                w.max_pending = t
            w.pc += 1
        elif kind == GSTORE:
            addr = prog.op_base[op] + prog.op_wstride[op] * w.dyn + prog.op_istride[op] * w.it
            self._l1_access(sm, addr, False)
            w.pc += 1
        elif kind == BAR:
            w.status = AT_BARRIER
            blk.at_barrier += 1
            self._release_barrier(blk)
            return
        elif kind == EXIT:
            w.it += 1
            if w.it < prog.trip:
                w.pc = 0
            else:
                w.status = FINISHED
                blk.unfinished -= 1
                sm.unit_unfinished[u] -= 1
                self._release_barrier(blk)
                return
        else:
            w.pc += 1
        w.ready_at = self._ready_at(w)

    def step_sm(self, sm: _Sm):
        for u, unit in enumerate(sm.units):
            if sm.unit_unfinished[u] == 0:
                sm.idle[u] += 1
                continue
            warps = sm.unit_warps[u]
            views = []
            classes = {}
            mask = 0
            for w in warps:
                cls = self._class(w.block)
                ready = self._evaluate(sm, w, cls)
                if ready:
                    mask |= 1 << int(cls)
                classes[w.dyn] = (w, cls)
                views.append(WarpView(w.dyn, ready, cls, w.last_issue))
            choice = unit.pick(views)
            if choice is None:
                sm.stall[u] += 1
                sm.window_stalls += 1
            else:
                w, cls = classes[choice]
                self._issue(sm, u, w, cls, mask)

    # phase C

    def update_throttle(self):
        ref = self.sms[REFERENCE_SM].window_stalls
        for sm in self.sms:
            if sm.index != REFERENCE_SM:
                sm.p = update_probability(sm.p, sm.window_stalls, ref, self.prog.step)
        for sm in self.sms:
            sm.window_stalls = 0

    # driver

    def step(self) -> bool:
        """Advance one cycle; False once the grid is drained."""
        if self.done:
            return False
        self.cycle += 1
        if self.cycle > self.prog.max_cycles:
            raise CycleLimitExceeded(f"no completion after {self.prog.max_cycles} cycles")
        for sm in self.sms:
            self.retire_blocks(sm)
        self.launch_blocks()
        if not self.queue and all(sm.resident == 0 for sm in self.sms):
            # The cycle that retires the last block is spent with nothing to run.
            for sm in self.sms:
                for u in range(len(sm.units)):
                    sm.idle[u] += 1
            self.done = True
            return False
        for sm in self.sms:
            self.step_sm(sm)
        if self.prog.dyn_enabled and self.cycle % self.prog.window == 0:
            self.update_throttle()
        return True

    def counters(self) -> RawCounters:
        sms = self.sms
        return RawCounters(
            cycles=self.cycle,
            instructions=[s.instructions for s in sms],
            lock_wait=[s.lock_wait for s in sms],
            l1_accesses=[s.l1_accesses for s in sms],
            l1_misses=[s.l1_misses for s in sms],
            blocks_completed=[s.blocks_completed for s in sms],
            unit_issue=[list(s.issue) for s in sms],
            unit_stall=[list(s.stall) for s in sms],
            unit_idle=[list(s.idle) for s in sms],
        )


def simulate(prog: Program, trace: Trace | None = None) -> RawCounters:
    sim = Simulation(prog, trace)
    while sim.step():
        pass
    return sim.counters()
