"""Lowering of (config, kernel, mode) into the flat form both cores execute."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from ..config import SmConfig
from ..occupancy import (OccupancyPlan, ResourceBudget, ResourceKind, SmLimits,
                         as_fraction, compute_occupancy)
from ..scheduler import Policy
from ..sharing import register_boundary, scratchpad_boundary
from ..workload import KernelSpec, OpKind, renumber_by_first_use, validate

# Op codes shared with the compiled core.
ALU, GLOAD, GSTORE, SLOAD, SSTORE, BAR, EXIT = range(7)
_CODE = {
    OpKind.ALU: ALU, OpKind.GLOBAL_LOAD: GLOAD, OpKind.GLOBAL_STORE: GSTORE,
    OpKind.SHARED_LOAD: SLOAD, OpKind.SHARED_STORE: SSTORE, OpKind.BARRIER: BAR,
    OpKind.EXIT: EXIT,
}

# Shared resource codes.
SHARE_NONE, SHARE_REG, SHARE_SPM = 0, 1, 2

POLICY_CODE = {Policy.LRR: 0, Policy.GTO: 1, Policy.OWF: 2}


class PlanMode(enum.Enum):
    BASELINE = "baseline"
    SHARING = "sharing"

    @classmethod
    def parse(cls, value) -> "PlanMode":
        return value if isinstance(value, cls) else cls(str(value).lower())


@dataclass(frozen=True)
class ResidencyPlan:
    """Per-SM slot layout chosen for a kernel."""

    plan: OccupancyPlan
    shared_kind: int
    baseline_blocks: int
    boundary: int  # private register count or private byte count

    @property
    def slots(self) -> int:
        return self.plan.total_blocks


def plan_residency(cfg: SmConfig, k: KernelSpec, mode: PlanMode) -> ResidencyPlan:
    """Share the resource that limits occupancy, if sharing is on for it.

    The other resource's block limit acts as an extra block cap, so pairs
    never overcommit it.
    """
    t = as_fraction(cfg.sharing_threshold)
    reg = ResourceBudget.registers(cfg.registers_per_sm, k.threads_per_block, k.regs_per_thread)
    limits = cfg.limits
    cap, _ = limits.block_cap(k.threads_per_block)
    reg_blocks = reg.baseline_blocks
    spm = None
    spm_blocks = None
    if k.scratchpad_per_block > 0:
        spm = ResourceBudget.scratchpad(cfg.scratchpad_per_sm, k.scratchpad_per_block)
        spm_blocks = spm.baseline_blocks
    baseline = min(reg_blocks, cap, spm_blocks if spm_blocks is not None else reg_blocks)

    if mode is PlanMode.BASELINE:
        return ResidencyPlan(OccupancyPlan.unshared(baseline), SHARE_NONE, baseline, 0)

    kind = None
    if spm_blocks is not None and spm_blocks < reg_blocks:
        if cfg.sharing_enabled.scratchpad:
            kind = ResourceKind.SCRATCHPAD
    elif cfg.sharing_enabled.registers:
        kind = ResourceKind.REGISTER
    if kind is None:
        return ResidencyPlan(OccupancyPlan.unshared(baseline), SHARE_NONE, baseline, 0)

    if kind is ResourceKind.REGISTER:
        budget = reg
        other = spm_blocks
    else:
        budget = spm
        other = reg_blocks
    eff_limits = limits
    if other is not None and other < limits.max_blocks:
        eff_limits = SmLimits(limits.max_threads, other, num_sms=limits.num_sms)
    plan = compute_occupancy(budget, eff_limits, k.threads_per_block, t)
    if plan.shared_pairs == 0:
        return ResidencyPlan(OccupancyPlan.unshared(plan.total_blocks, plan.limited_by),
                             SHARE_NONE, baseline, 0)
    if kind is ResourceKind.REGISTER:
        return ResidencyPlan(plan, SHARE_REG, baseline,
                             register_boundary(k.regs_per_thread, t))
    return ResidencyPlan(plan, SHARE_SPM, baseline,
                         scratchpad_boundary(k.scratchpad_per_block, t))


@dataclass
class Program:
    # body
    n_ops: int
    op_kind: list
    op_dst: list          # tuple of dst registers per op
    op_regs: list         # distinct registers the scoreboard checks per op
    op_lock: list         # 1 if the op touches the shared part when paired
    op_base: list
    op_wstride: list
    op_istride: list
    # kernel
    grid_blocks: int
    warps_per_block: int
    regs: int
    trip: int
    # residency
    unshared_slots: int
    pairs: int
    shared_kind: int
    # machine
    num_sms: int
    num_sched: int
    lat_alu: int
    lat_smem: int
    lat_hit: int
    lat_miss: int
    l1_sets: int
    l1_ways: int
    line_bytes: int
    policy: int
    dyn_enabled: bool
    window: int
    step: float
    seed: int
    strict: bool
    max_cycles: int

    @property
    def slots(self) -> int:
        return self.unshared_slots + 2 * self.pairs

    def flat(self):
        """Offsets and flat arrays for the compiled core."""
        dst_start, dst_flat, reg_start, reg_flat = [], [], [], []
        for d, r in zip(self.op_dst, self.op_regs):
            dst_start.append(len(dst_flat))
            dst_flat.extend(d)
            reg_start.append(len(reg_flat))
            reg_flat.extend(r)
        dst_start.append(len(dst_flat))
        reg_start.append(len(reg_flat))
        return dst_start, dst_flat, reg_start, reg_flat


def build_program(cfg: SmConfig, k: KernelSpec, mode, reorder_enabled: bool = False,
                  ) -> tuple[Program, ResidencyPlan, KernelSpec]:
    mode = PlanMode.parse(mode)
    validate(k, cfg)
    if reorder_enabled:
        k, _ = renumber_by_first_use(k)
    rp = plan_residency(cfg, k, mode)

    op_kind, op_dst, op_regs, op_lock = [], [], [], []
    op_base, op_ws, op_is = [], [], []
    for op in k.body:
        op_kind.append(_CODE[op.kind])
        op_dst.append(tuple(op.dst))
        op_regs.append(tuple(dict.fromkeys(op.dst + op.src)))
        lock = 0
        if rp.shared_kind == SHARE_REG:
            lock = int(any(r > rp.boundary for r in op.registers()))
        elif rp.shared_kind == SHARE_SPM and op.kind.is_shared:
            lock = int(op.shared_offset >= rp.boundary)
        op_lock.append(lock)
        a = op.addr
        op_base.append(a.base if a else 0)
        op_ws.append(a.warp_stride if a else 0)
        op_is.append(a.iter_stride if a else 0)

    prog = Program(
        n_ops=len(k.body), op_kind=op_kind, op_dst=op_dst, op_regs=op_regs, op_lock=op_lock,
        op_base=op_base, op_wstride=op_ws, op_istride=op_is,
        grid_blocks=k.grid_blocks, warps_per_block=k.warps_per_block,
        regs=k.regs_per_thread, trip=k.loop_trip_count,
        unshared_slots=rp.plan.unshared_blocks, pairs=rp.plan.shared_pairs,
        shared_kind=rp.shared_kind,
        num_sms=cfg.num_sms, num_sched=cfg.num_schedulers,
        lat_alu=cfg.latencies.alu, lat_smem=cfg.latencies.shared_mem,
        lat_hit=cfg.latencies.l1_hit, lat_miss=cfg.latencies.l1_miss,
        l1_sets=cfg.l1.sets, l1_ways=cfg.l1.ways, line_bytes=cfg.l1.line_bytes,
        policy=POLICY_CODE[Policy.parse(cfg.scheduler)],
        dyn_enabled=cfg.dyn_exec.enabled, window=cfg.dyn_exec.window,
        step=float(cfg.dyn_exec.step), seed=cfg.rng_seed,
        strict=cfg.strict_block_ownership, max_cycles=cfg.max_cycles,
    )
    return prog, rp, k


__all__ = ["Program", "PlanMode", "ResidencyPlan", "build_program", "plan_residency",
           "ALU", "GLOAD", "GSTORE", "SLOAD", "SSTORE", "BAR", "EXIT",
           "SHARE_NONE", "SHARE_REG", "SHARE_SPM"]
