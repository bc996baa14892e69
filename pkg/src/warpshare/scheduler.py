"""Warp issue policies for one scheduler unit: LRR, GTO and OWF."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ConfigError


class Policy(enum.Enum):
    LRR = "lrr"
    GTO = "gto"
    OWF = "owf"

    @classmethod
    def parse(cls, text) -> "Policy":
        if isinstance(text, cls):
            return text
        try:
            return cls(str(text).lower())
        except ValueError:
            raise ConfigError(f"unknown scheduler {text!r}") from None


class WarpClass(enum.IntEnum):
    """Ordered by OWF priority, lowest value first."""

    OWNER = 0
    UNSHARED = 1
    NONOWNER = 2


def warp_class(partner_block, owner_block, own_block) -> WarpClass:
    """Unshared without a partner; Owner if its block owns the pair."""
    if partner_block is None:
        return WarpClass.UNSHARED
    if owner_block == own_block:
        return WarpClass.OWNER
    return WarpClass.NONOWNER


@dataclass(frozen=True)
class WarpView:
    dynamic_warp_id: int
    ready: bool
    cls: WarpClass = WarpClass.UNSHARED
    last_issued_cycle: int = -1


@dataclass
class SchedulerUnit:
    policy: Policy = Policy.LRR
    assigned_warps: list[int] = field(default_factory=list)
    rr_cursor: int = -1  # dynamic id of the last LRR pick
    greedy_warp: int | None = None

    def pick(self, views: Sequence[WarpView]) -> int | None:
        """Choose a ready warp, or None.  Views must be sorted by dynamic id."""
        if self.policy is Policy.LRR:
            choice = _pick_lrr(views, self.rr_cursor)
            if choice is not None:
                self.rr_cursor = choice
            return choice
        if self.policy is Policy.GTO:
            choice = _pick_gto(views, self.greedy_warp)
            if choice is not None:
                self.greedy_warp = choice
            return choice
        return _pick_owf(views)


def _pick_lrr(views, cursor):
    first = None
    for v in views:
        if v.ready:
            if v.dynamic_warp_id > cursor:
                return v.dynamic_warp_id
            if first is None:
                first = v.dynamic_warp_id
    return first


def _pick_gto(views, greedy):
    oldest = None
    for v in views:
        if v.ready:
            if v.dynamic_warp_id == greedy:
                return greedy
            if oldest is None:
                oldest = v.dynamic_warp_id
    return oldest


def _pick_owf(views):
    best = None
    for v in views:
        if v.ready and (best is None or (v.cls, v.dynamic_warp_id) < (best.cls, best.dynamic_warp_id)):
            best = v
    return None if best is None else best.dynamic_warp_id


def pick(unit: SchedulerUnit, views: Sequence[WarpView]) -> int | None:
    return unit.pick(sorted(views, key=lambda v: v.dynamic_warp_id))
