"""Metrics assembled from raw core counters, with the conservation checks."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from ..errors import SimulatorInvariantViolation

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class UnitCounters:
    issue_cycles: int
    stall_cycles: int
    idle_cycles: int


@dataclass(frozen=True)
class SmMetrics:
    sm: int
    cycles: int
    instructions_issued: int
    ipc: float
    issue_cycles: int
    stall_cycles: int
    idle_cycles: int
    lock_wait_cycles: int
    l1_accesses: int
    l1_misses: int
    blocks_completed: int
    units: tuple[UnitCounters, ...]


@dataclass(frozen=True)
class MetricsReport:
    cycles: int
    instructions_issued: int
    ipc: float
    issue_cycles: int
    stall_cycles: int
    idle_cycles: int
    lock_wait_cycles: int
    l1_accesses: int
    l1_misses: int
    l1_miss_rate: float
    blocks_completed: int
    blocks_resident: int
    unshared_blocks: int
    shared_pairs: int
    shared_resource: str
    per_sm: tuple[SmMetrics, ...]

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        return d


@dataclass
class RawCounters:
    """What a core hands back; plain lists so both cores can fill it."""

    cycles: int
    instructions: list
    lock_wait: list
    l1_accesses: list
    l1_misses: list
    blocks_completed: list
    unit_issue: list   # [sm][unit]
    unit_stall: list
    unit_idle: list


def _ratio(a: int, b: int) -> float:
    return a / b if b else 0.0


def build_report(raw: RawCounters, expected_instructions: int, blocks_resident: int,
                 unshared: int, pairs: int, shared_resource: str) -> MetricsReport:
    per_sm = []
    for i in range(len(raw.instructions)):
        units = tuple(UnitCounters(a, b, c) for a, b, c in
                      zip(raw.unit_issue[i], raw.unit_stall[i], raw.unit_idle[i]))
        for u, uc in enumerate(units):
            total = uc.issue_cycles + uc.stall_cycles + uc.idle_cycles
            if total != raw.cycles:
                raise SimulatorInvariantViolation(
                    f"SM {i} unit {u}: issue {uc.issue_cycles} + stall {uc.stall_cycles} + "
                    f"idle {uc.idle_cycles} = {total} != {raw.cycles} cycles")
        issued = sum(uc.issue_cycles for uc in units)
        if issued != raw.instructions[i]:
            raise SimulatorInvariantViolation(
                f"SM {i}: {issued} issue cycles but {raw.instructions[i]} instructions")
        per_sm.append(SmMetrics(
            sm=i, cycles=raw.cycles, instructions_issued=raw.instructions[i],
            ipc=_ratio(raw.instructions[i], raw.cycles),
            issue_cycles=issued,
            stall_cycles=sum(uc.stall_cycles for uc in units),
            idle_cycles=sum(uc.idle_cycles for uc in units),
            lock_wait_cycles=raw.lock_wait[i],
            l1_accesses=raw.l1_accesses[i], l1_misses=raw.l1_misses[i],
            blocks_completed=raw.blocks_completed[i], units=units))

    total_instr = sum(s.instructions_issued for s in per_sm)
    if total_instr != expected_instructions:
        raise SimulatorInvariantViolation(
            f"issued {total_instr} instructions, expected {expected_instructions}")
    acc = sum(s.l1_accesses for s in per_sm)
    miss = sum(s.l1_misses for s in per_sm)
    return MetricsReport(
        cycles=raw.cycles,
        instructions_issued=total_instr,
        ipc=_ratio(total_instr, raw.cycles),
        issue_cycles=sum(s.issue_cycles for s in per_sm),
        stall_cycles=sum(s.stall_cycles for s in per_sm),
        idle_cycles=sum(s.idle_cycles for s in per_sm),
        lock_wait_cycles=sum(s.lock_wait_cycles for s in per_sm),
        l1_accesses=acc, l1_misses=miss, l1_miss_rate=_ratio(miss, acc),
        blocks_completed=sum(s.blocks_completed for s in per_sm),
        blocks_resident=blocks_resident, unshared_blocks=unshared, shared_pairs=pairs,
        shared_resource=shared_resource, per_sm=tuple(per_sm))
