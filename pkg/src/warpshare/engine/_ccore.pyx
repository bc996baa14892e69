# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation core.

Same cycle sequence as ``_pycore`` on flat arrays.  Lock holders are stored
as block ids: warp lock j is only ever taken by warp j of one of the two
paired blocks, so the block id identifies the holder.
"""

import numpy as np
cimport numpy as cnp

from ..errors import CycleLimitExceeded, ProtocolViolation
from .metrics import RawCounters
from .throttle import REFERENCE_SM, RngStream, update_probability

ctypedef cnp.int64_t i64

cdef enum:
    ALU = 0
    GLOAD = 1
    GSTORE = 2
    SLOAD = 3
    SSTORE = 4
    BAR = 5
    EXIT = 6

cdef enum:
    ACTIVE = 0
    AT_BARRIER = 1
    FINISHED = 2

cdef enum:
    C_OWNER = 0
    C_UNSHARED = 1
    C_NONOWNER = 2

cdef enum:
    SHARE_NONE = 0
    SHARE_REG = 1
    SHARE_SPM = 2


def _arr(n, fill=0):
    return np.full(n, fill, dtype=np.int64)


cdef class _Sim:
    # program
    cdef i64 n_ops, grid, wpb, regs, trip, U, S, M, kind_shared
    cdef i64 nsms, nsched, lat_alu, lat_smem, lat_hit, lat_miss
    cdef i64 sets, ways, line, policy, window, max_cycles
    cdef bint dyn, strict
    cdef double step
    cdef i64[:] op_kind, op_lock, op_base, op_ws, op_is
    cdef i64[:] dst_start, dst_flat, reg_start, reg_flat
    # warps, indexed by sm * M * wpb + slot * wpb + pos
    cdef i64[:] w_dyn, w_unit, w_pc, w_it, w_status, w_ready, w_maxp, w_last
    cdef i64[:] reg_ready
    # blocks, indexed by sm * M + slot
    cdef i64[:] b_gid, b_unfinished, b_barrier
    # pairs, indexed by sm * S + k
    cdef i64[:] p_owner, p_bholder
    cdef i64[:] p_wholder  # (sm * S + k) * wpb + pos
    # scheduler units, indexed by sm * nsched + u
    cdef i64[:] u_list  # (sm * nsched + u) * (M * wpb) + i -> local warp index
    cdef i64[:] u_count, u_unfinished, u_cursor, u_greedy
    cdef i64[:] u_issue, u_stall, u_idle
    cdef i64[:] u_ready, u_cls  # scratch, per unit entry
    # per SM
    cdef i64[:] next_dyn, resident, instr, lock_wait, l1_acc, l1_miss, done_blocks
    cdef i64[:] win_stalls
    cdef i64[:] l1_tag, l1_cnt  # (sm * sets + set) * ways + way
    cdef double[:] prob
    cdef list rngs, rbufs
    cdef i64[:] rpos
    # global
    cdef i64 cycle, next_gid, rr_sm
    cdef object issues, locks

    def __init__(self, prog, trace):
        self.n_ops = prog.n_ops
        self.grid = prog.grid_blocks
        self.wpb = prog.warps_per_block
        self.regs = prog.regs
        self.trip = prog.trip
        self.U = prog.unshared_slots
        self.S = prog.pairs
        self.M = prog.slots
        self.kind_shared = prog.shared_kind
        self.nsms = prog.num_sms
        self.nsched = prog.num_sched
        self.lat_alu = prog.lat_alu
        self.lat_smem = prog.lat_smem
        self.lat_hit = prog.lat_hit
        self.lat_miss = prog.lat_miss
        self.sets = prog.l1_sets
        self.ways = prog.l1_ways
        self.line = prog.line_bytes
        self.policy = prog.policy
        self.window = prog.window
        self.max_cycles = prog.max_cycles
        self.dyn = prog.dyn_enabled
        self.strict = prog.strict
        self.step = prog.step

        self.op_kind = np.asarray(prog.op_kind, dtype=np.int64)
        self.op_lock = np.asarray(prog.op_lock, dtype=np.int64)
        self.op_base = np.asarray(prog.op_base, dtype=np.int64)
        self.op_ws = np.asarray(prog.op_wstride, dtype=np.int64)
        self.op_is = np.asarray(prog.op_istride, dtype=np.int64)
        ds, df, rs, rf = prog.flat()
        self.dst_start = np.asarray(ds, dtype=np.int64)
        self.dst_flat = np.asarray(df + [0], dtype=np.int64)
        self.reg_start = np.asarray(rs, dtype=np.int64)
        self.reg_flat = np.asarray(rf + [0], dtype=np.int64)

        nw = self.nsms * self.M * self.wpb
        self.w_dyn = _arr(nw)
        self.w_unit = _arr(nw)
        self.w_pc = _arr(nw)
        self.w_it = _arr(nw)
        self.w_status = _arr(nw, FINISHED)
        self.w_ready = _arr(nw)
        self.w_maxp = _arr(nw)
        self.w_last = _arr(nw, -1)
        self.reg_ready = _arr(nw * (self.regs + 1))
        nb = self.nsms * self.M
        self.b_gid = _arr(nb, -1)
        self.b_unfinished = _arr(nb)
        self.b_barrier = _arr(nb)
        npairs = self.nsms * self.S
        self.p_owner = _arr(max(npairs, 1), -1)
        self.p_bholder = _arr(max(npairs, 1), -1)
        self.p_wholder = _arr(max(npairs * self.wpb, 1), -1)
        nu = self.nsms * self.nsched
        self.u_list = _arr(max(nu * self.M * self.wpb, 1))
        self.u_count = _arr(nu)
        self.u_unfinished = _arr(nu)
        self.u_cursor = _arr(nu, -1)
        self.u_greedy = _arr(nu, -1)
        self.u_issue = _arr(nu)
        self.u_stall = _arr(nu)
        self.u_idle = _arr(nu)
        self.u_ready = _arr(max(self.M * self.wpb, 1))
        self.u_cls = _arr(max(self.M * self.wpb, 1))
        self.next_dyn = _arr(self.nsms)
        self.resident = _arr(self.nsms)
        self.instr = _arr(self.nsms)
        self.lock_wait = _arr(self.nsms)
        self.l1_acc = _arr(self.nsms)
        self.l1_miss = _arr(self.nsms)
        self.done_blocks = _arr(self.nsms)
        self.win_stalls = _arr(self.nsms)
        self.l1_tag = _arr(self.nsms * self.sets * self.ways, -1)
        self.l1_cnt = _arr(self.nsms * self.sets)
        prob = np.ones(self.nsms, dtype=np.float64)
        prob[REFERENCE_SM] = 0.0
        self.prob = prob
        self.rngs = [RngStream(prog.seed, i) for i in range(self.nsms)]
        self.rbufs = [r.buf for r in self.rngs]
        self.rpos = _arr(self.nsms)

        self.cycle = 0
        self.next_gid = 0
        self.rr_sm = 0
        self.issues = None if trace is None else trace.issues
        self.locks = None if trace is None else trace.locks

    # small helpers

    cdef inline i64 wi(self, i64 sm, i64 slot, i64 pos):
        return (sm * self.M + slot) * self.wpb + pos

    cdef inline bint is_pair_slot(self, i64 slot):
        return self.kind_shared != SHARE_NONE and slot >= self.U

    cdef inline i64 partner_slot(self, i64 slot):
        return self.U + ((slot - self.U) ^ 1)

    cdef inline i64 pair_index(self, i64 sm, i64 slot):
        return sm * self.S + (slot - self.U) // 2

    cdef inline bint paired(self, i64 sm, i64 slot):
        if not self.is_pair_slot(slot):
            return False
        return self.b_gid[sm * self.M + self.partner_slot(slot)] >= 0

    cdef i64 warp_class(self, i64 sm, i64 slot):
        if not self.paired(sm, slot):
            return C_UNSHARED
        if self.p_owner[self.pair_index(sm, slot)] == self.b_gid[sm * self.M + slot]:
            return C_OWNER
        return C_NONOWNER

    cdef i64 ready_at(self, i64 w):
        cdef i64 pc = self.w_pc[w]
        cdef i64 t = 0, i, r, base = w * (self.regs + 1)
        if self.op_kind[pc] == EXIT:
            return self.w_maxp[w]
        for i in range(self.reg_start[pc], self.reg_start[pc + 1]):
            r = self.reg_ready[base + self.reg_flat[i]]
            if r > t:
                t = r
        return t

    cdef i64 slot_of_gid(self, i64 sm, i64 gid):
        cdef i64 s
        for s in range(self.M):
            if self.b_gid[sm * self.M + s] == gid:
                return s
        return -1

    cdef i64 warp_label(self, i64 sm, i64 gid, i64 pos):
        """Dynamic id of warp ``pos`` of block ``gid`` (register kind), else gid."""
        cdef i64 s
        if gid < 0:
            return -1
        if self.kind_shared == SHARE_SPM:
            return gid
        s = self.slot_of_gid(sm, gid)
        return self.w_dyn[self.wi(sm, s, pos)]

    cdef void lock_event(self, i64 sm, str event, i64 holder, i64 requester):
        if self.locks is not None:
            self.locks.append((self.cycle, sm, event, holder, requester))

    # lock protocol

    cdef bint holds_lock(self, i64 sm, i64 slot, i64 pos):
        cdef i64 k = self.pair_index(sm, slot)
        cdef i64 gid = self.b_gid[sm * self.M + slot]
        if self.kind_shared == SHARE_REG:
            return self.p_wholder[k * self.wpb + pos] == gid
        return self.p_bholder[k] == gid

    cdef bint would_grant(self, i64 sm, i64 slot, i64 pos):
        cdef i64 k = self.pair_index(sm, slot)
        cdef i64 gid = self.b_gid[sm * self.M + slot]
        cdef i64 ps = self.partner_slot(slot)
        cdef i64 partner = self.b_gid[sm * self.M + ps]
        cdef i64 owner = self.p_owner[k]
        cdef bint owner_ok = owner == -1 or owner == gid
        cdef i64 holder
        cdef bint partner_done
        if self.kind_shared == SHARE_SPM:
            holder = self.p_bholder[k]
            return owner_ok and (holder == -1 or holder == gid)
        holder = self.p_wholder[k * self.wpb + pos]
        partner_done = self.w_status[self.wi(sm, ps, pos)] == FINISHED
        if self.strict:
            return owner_ok and (holder == -1 or holder == gid
                                 or (holder == partner and partner_done))
        return (owner_ok and (holder == -1 or holder == gid)) or partner_done

    cdef void record_deny(self, i64 sm, i64 slot, i64 pos) except *:
        cdef i64 k = self.pair_index(sm, slot)
        cdef i64 gid = self.b_gid[sm * self.M + slot]
        cdef i64 partner = self.b_gid[sm * self.M + self.partner_slot(slot)]
        if self.p_owner[k] != partner:
            raise ProtocolViolation(
                f"denied block {gid} although owner is {self.p_owner[k]}, not the partner")
        if self.locks is None:
            return
        if self.kind_shared == SHARE_SPM:
            self.lock_event(sm, "deny", self.p_bholder[k], gid)
        else:
            self.lock_event(sm, "deny",
                            self.warp_label(sm, self.p_wholder[k * self.wpb + pos], pos),
                            self.w_dyn[self.wi(sm, slot, pos)])

    cdef void acquire(self, i64 sm, i64 slot, i64 pos):
        cdef i64 k = self.pair_index(sm, slot)
        cdef i64 gid = self.b_gid[sm * self.M + slot]
        cdef i64 label
        if self.kind_shared == SHARE_SPM:
            if self.p_bholder[k] != gid:
                self.p_bholder[k] = gid
                self.lock_event(sm, "acquire", gid, gid)
        else:
            if self.p_wholder[k * self.wpb + pos] != gid:
                self.p_wholder[k * self.wpb + pos] = gid
                if self.locks is not None:
                    label = self.w_dyn[self.wi(sm, slot, pos)]
                    self.lock_event(sm, "acquire", label, label)
        if self.p_owner[k] == -1:
            self.p_owner[k] = gid

    cdef void block_finish(self, i64 sm, i64 slot):
        cdef i64 k = self.pair_index(sm, slot)
        cdef i64 gid = self.b_gid[sm * self.M + slot]
        cdef i64 partner = self.b_gid[sm * self.M + self.partner_slot(slot)]
        cdef i64 j
        if self.kind_shared == SHARE_REG:
            for j in range(self.wpb):
                if self.p_wholder[k * self.wpb + j] == gid:
                    if self.locks is not None:
                        self.lock_event(sm, "release", self.w_dyn[self.wi(sm, slot, j)], -1)
                    self.p_wholder[k * self.wpb + j] = -1
        elif self.p_bholder[k] == gid:
            self.lock_event(sm, "release", gid, -1)
            self.p_bholder[k] = -1
        if self.p_owner[k] == gid:
            self.p_owner[k] = partner
            if partner >= 0:
                self.lock_event(sm, "transfer", partner, gid)

    # phase A

    cdef void retire(self, i64 sm):
        cdef i64 s, j, w, u, uidx, i, n, out, base
        for s in range(self.M):
            if self.b_gid[sm * self.M + s] < 0 or self.b_unfinished[sm * self.M + s] > 0:
                continue
            for j in range(self.wpb):
                w = self.wi(sm, s, j)
                u = self.w_unit[w]
                uidx = sm * self.nsched + u
                base = uidx * self.M * self.wpb
                n = self.u_count[uidx]
                out = 0
                for i in range(n):
                    if self.u_list[base + i] != s * self.wpb + j:
                        self.u_list[base + out] = self.u_list[base + i]
                        out += 1
                self.u_count[uidx] = out
            if self.is_pair_slot(s):
                self.block_finish(sm, s)
            self.b_gid[sm * self.M + s] = -1
            self.resident[sm] -= 1
            self.done_blocks[sm] += 1

    cdef void launch_all(self):
        cdef i64 k, sm, slot, s
        while self.next_gid < self.grid:
            slot = -1
            for k in range(self.nsms):
                sm = (self.rr_sm + k) % self.nsms
                for s in range(self.M):
                    if self.b_gid[sm * self.M + s] < 0:
                        slot = s
                        break
                if slot >= 0:
                    break
            if slot < 0:
                return
            self.rr_sm = (sm + 1) % self.nsms
            self.launch(sm, slot, self.next_gid)
            self.next_gid += 1

    cdef void launch(self, i64 sm, i64 slot, i64 gid):
        cdef i64 j, w, dyn, u, uidx, r, base
        for j in range(self.wpb):
            w = self.wi(sm, slot, j)
            dyn = self.next_dyn[sm]
            self.next_dyn[sm] += 1
            u = dyn % self.nsched
            self.w_dyn[w] = dyn
            self.w_unit[w] = u
            self.w_pc[w] = 0
            self.w_it[w] = 0
            self.w_status[w] = ACTIVE
            self.w_maxp[w] = 0
            self.w_last[w] = -1
            base = w * (self.regs + 1)
            for r in range(self.regs + 1):
                self.reg_ready[base + r] = 0
            self.w_ready[w] = self.ready_at(w)
            uidx = sm * self.nsched + u
            self.u_list[uidx * self.M * self.wpb + self.u_count[uidx]] = slot * self.wpb + j
            self.u_count[uidx] += 1
            self.u_unfinished[uidx] += 1
        self.b_gid[sm * self.M + slot] = gid
        self.b_unfinished[sm * self.M + slot] = self.wpb
        self.b_barrier[sm * self.M + slot] = 0
        self.resident[sm] += 1

    # phase B

    cdef bint l1_access(self, i64 sm, i64 addr, bint is_load):
        cdef i64 line = addr // self.line
        cdef i64 sidx = sm * self.sets + line % self.sets
        cdef i64 base = sidx * self.ways
        cdef i64 n = self.l1_cnt[sidx]
        cdef i64 i, j
        self.l1_acc[sm] += 1
        for i in range(n):
            if self.l1_tag[base + i] == line:
                for j in range(i, n - 1):
                    self.l1_tag[base + j] = self.l1_tag[base + j + 1]
                self.l1_tag[base + n - 1] = line
                return True
        self.l1_miss[sm] += 1
        if is_load:
            if n == self.ways:
                for j in range(n - 1):
                    self.l1_tag[base + j] = self.l1_tag[base + j + 1]
                self.l1_tag[base + n - 1] = line
            else:
                self.l1_tag[base + n] = line
                self.l1_cnt[sidx] = n + 1
        return False

    cdef double draw(self, i64 sm):
        cdef double u
        if self.rpos[sm] == len(self.rbufs[sm]):
            self.rbufs[sm] = self.rngs[sm].refill()
            self.rpos[sm] = 0
        u = self.rbufs[sm][self.rpos[sm]]
        self.rpos[sm] += 1
        return u

    cdef int evaluate(self, i64 sm, i64 slot, i64 pos, i64 cls) except -1:
        cdef i64 w = self.wi(sm, slot, pos)
        cdef i64 op, kind
        cdef double p
        if self.w_status[w] != ACTIVE or self.w_ready[w] > self.cycle:
            return False
        op = self.w_pc[w]
        if self.paired(sm, slot) and self.op_lock[op] and not self.holds_lock(sm, slot, pos):
            if not self.would_grant(sm, slot, pos):
                self.record_deny(sm, slot, pos)
                self.lock_wait[sm] += 1
                return False
        kind = self.op_kind[op]
        if (self.dyn and (kind == GLOAD or kind == GSTORE) and cls == C_NONOWNER
                and self.p_owner[self.pair_index(sm, slot)] >= 0):
            if sm == REFERENCE_SM:
                return False
            p = self.prob[sm]
            if p >= 1.0:
                return True
            if p <= 0.0:
                return False
            return self.draw(sm) < p
        return True

    cdef void release_barrier(self, i64 sm, i64 slot):
        cdef i64 b = sm * self.M + slot
        cdef i64 j, w, t
        if self.b_barrier[b] > 0 and self.b_barrier[b] == self.b_unfinished[b]:
            for j in range(self.wpb):
                w = self.wi(sm, slot, j)
                if self.w_status[w] == AT_BARRIER:
                    self.w_status[w] = ACTIVE
                    self.w_pc[w] += 1
                    t = self.ready_at(w)
                    self.w_ready[w] = t if t > self.cycle + 1 else self.cycle + 1
            self.b_barrier[b] = 0

    cdef void issue(self, i64 sm, i64 u, i64 slot, i64 pos, i64 cls, i64 mask):
        cdef i64 w = self.wi(sm, slot, pos)
        cdef i64 c = self.cycle
        cdef i64 op = self.w_pc[w]
        cdef i64 kind = self.op_kind[op]
        cdef i64 lat, t, i, addr
        cdef i64 uidx = sm * self.nsched + u
        cdef i64 base = w * (self.regs + 1)
        self.instr[sm] += 1
        self.u_issue[uidx] += 1
        self.w_last[w] = c
        if self.paired(sm, slot) and self.op_lock[op] and not self.holds_lock(sm, slot, pos):
            self.acquire(sm, slot, pos)
        if self.issues is not None:
            self.issues.append((c, sm, u, self.w_dyn[w], cls, mask))
        if kind == ALU or kind == SLOAD or kind == GLOAD:
            if kind == ALU:
                lat = self.lat_alu
            elif kind == SLOAD:
                lat = self.lat_smem
            else:
                addr = self.op_base[op] + self.op_ws[op] * self.w_dyn[w] + self.op_is[op] * self.w_it[w]
                lat = self.lat_hit if self.l1_access(sm, addr, True) else self.lat_miss
            t = c + lat
            for i in range(self.dst_start[op], self.dst_start[op + 1]):
                self.reg_ready[base + self.dst_flat[i]] = t
            if self.dst_start[op + 1] > self.dst_start[op] and t > self.w_maxp[w]:
                self.w_maxp[w] = t
            self.w_pc[w] += 1
        elif kind == GSTORE:
            addr = self.op_base[op] + self.op_ws[op] * self.w_dyn[w] + self.op_is[op] * self.w_it[w]
            self.l1_access(sm, addr, False)
            self.w_pc[w] += 1
        elif kind == BAR:
            self.w_status[w] = AT_BARRIER
            self.b_barrier[sm * self.M + slot] += 1
            self.release_barrier(sm, slot)
            return
        elif kind == EXIT:
            self.w_it[w] += 1
            if self.w_it[w] < self.trip:
                self.w_pc[w] = 0
            else:
                self.w_status[w] = FINISHED
                self.b_unfinished[sm * self.M + slot] -= 1
                self.u_unfinished[uidx] -= 1
                self.release_barrier(sm, slot)
                return
        else:
            self.w_pc[w] += 1
        self.w_ready[w] = self.ready_at(w)

    cdef int step_sm(self, i64 sm) except -1:
        cdef i64 u, uidx, base, n, i, lw, slot, pos, w, cls, mask, choice
        cdef i64 best_cls, best_dyn, d, cursor, first, greedy
        cdef bint ready
        for u in range(self.nsched):
            uidx = sm * self.nsched + u
            if self.u_unfinished[uidx] == 0:
                self.u_idle[uidx] += 1
                continue
            base = uidx * self.M * self.wpb
            n = self.u_count[uidx]
            mask = 0
            for i in range(n):
                lw = self.u_list[base + i]
                slot = lw // self.wpb
                pos = lw % self.wpb
                cls = self.warp_class(sm, slot)
                ready = self.evaluate(sm, slot, pos, cls)
                self.u_ready[i] = ready
                self.u_cls[i] = cls
                if ready:
                    mask |= 1 << cls
            choice = -1
            if self.policy == 0:
                cursor = self.u_cursor[uidx]
                first = -1
                for i in range(n):
                    if self.u_ready[i]:
                        d = self.w_dyn[sm * self.M * self.wpb + self.u_list[base + i]]
                        if d > cursor:
                            choice = i
                            break
                        if first < 0:
                            first = i
                if choice < 0:
                    choice = first
                if choice >= 0:
                    self.u_cursor[uidx] = self.w_dyn[sm * self.M * self.wpb + self.u_list[base + choice]]
            elif self.policy == 1:
                greedy = self.u_greedy[uidx]
                first = -1
                for i in range(n):
                    if self.u_ready[i]:
                        d = self.w_dyn[sm * self.M * self.wpb + self.u_list[base + i]]
                        if d == greedy:
                            choice = i
                            break
                        if first < 0:
                            first = i
                if choice < 0:
                    choice = first
                if choice >= 0:
                    self.u_greedy[uidx] = self.w_dyn[sm * self.M * self.wpb + self.u_list[base + choice]]
            else:
                best_cls = 99
                for i in range(n):
                    # list is in dynamic-id order, so the first of a class wins
                    if self.u_ready[i] and self.u_cls[i] < best_cls:
                        best_cls = self.u_cls[i]
                        choice = i
            if choice < 0:
                self.u_stall[uidx] += 1
                self.win_stalls[sm] += 1
            else:
                lw = self.u_list[base + choice]
                self.issue(sm, u, lw // self.wpb, lw % self.wpb, self.u_cls[choice], mask)
        return 0

    # driver

    cdef bint any_resident(self):
        cdef i64 sm
        for sm in range(self.nsms):
            if self.resident[sm] > 0:
                return True
        return False

    def run(self):
        cdef i64 sm, u, ref
        if self.grid == 0:
            return self.counters()
        while True:
            self.cycle += 1
            if self.cycle > self.max_cycles:
                raise CycleLimitExceeded(f"no completion after {self.max_cycles} cycles")
            for sm in range(self.nsms):
                self.retire(sm)
            self.launch_all()
            if self.next_gid >= self.grid and not self.any_resident():
                for u in range(self.nsms * self.nsched):
                    self.u_idle[u] += 1
                break
            for sm in range(self.nsms):
                self.step_sm(sm)
            if self.dyn and self.cycle % self.window == 0:
                ref = self.win_stalls[REFERENCE_SM]
                for sm in range(self.nsms):
                    if sm != REFERENCE_SM:
                        self.prob[sm] = update_probability(
                            self.prob[sm], int(self.win_stalls[sm]), int(ref), self.step)
                for sm in range(self.nsms):
                    self.win_stalls[sm] = 0
        return self.counters()

    def counters(self):
        ns = self.nsched
        iss = np.asarray(self.u_issue).tolist()
        stl = np.asarray(self.u_stall).tolist()
        idl = np.asarray(self.u_idle).tolist()
        return RawCounters(
            cycles=int(self.cycle),
            instructions=np.asarray(self.instr).tolist(),
            lock_wait=np.asarray(self.lock_wait).tolist(),
            l1_accesses=np.asarray(self.l1_acc).tolist(),
            l1_misses=np.asarray(self.l1_miss).tolist(),
            blocks_completed=np.asarray(self.done_blocks).tolist(),
            unit_issue=[iss[i * ns:(i + 1) * ns] for i in range(self.nsms)],
            unit_stall=[stl[i * ns:(i + 1) * ns] for i in range(self.nsms)],
            unit_idle=[idl[i * ns:(i + 1) * ns] for i in range(self.nsms)],
        )


def simulate(prog, trace=None):
    return _Sim(prog, trace).run()
