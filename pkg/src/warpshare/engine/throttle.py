"""Probabilistic gating of global-memory ops issued by non-owner warps.

Every SM keeps a probability p of letting such an op through.  SM 0 never
lets them through and serves as the reference: every window, an SM whose
stall count exceeds SM 0's lowers p by one step, one with fewer raises it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..scheduler import WarpClass
from ..workload import OpKind

REFERENCE_SM = 0
RNG_BUFFER = 1024


def update_probability(p: float, stalls_i: int, stalls_0: int, step: float) -> float:
    if stalls_i > stalls_0:
        p = max(0.0, p - step)
    elif stalls_i < stalls_0:
        p = min(1.0, p + step)
    # Keep repeated +-step from drifting off the grid of multiples.
    return round(p, 10)


class RngStream:
    """Uniform [0, 1) draws for one SM, reproducible from (seed, sm)."""

    def __init__(self, seed: int, sm_index: int):
        self._gen = np.random.default_rng([seed, sm_index])
        self.buf = self._gen.random(RNG_BUFFER)
        self._pos = 0

    def next(self) -> float:
        if self._pos == RNG_BUFFER:
            self.buf = self._gen.random(RNG_BUFFER)
            self._pos = 0
        u = float(self.buf[self._pos])
        self._pos += 1
        return u

    def refill(self):
        """Fresh buffer for the compiled core, which tracks its own position."""
        return self._gen.random(RNG_BUFFER)


@dataclass
class ThrottleState:
    p: list[float]
    window_stalls: list[int] = field(default_factory=list)
    reference_sm_stalls: int = 0

    @classmethod
    def initial(cls, num_sms: int) -> "ThrottleState":
        p = [1.0] * num_sms
        p[REFERENCE_SM] = 0.0
        return cls(p, [0] * num_sms, 0)


def gate_applies(cls: WarpClass, kind: OpKind, owner_established: bool = True) -> bool:
    """Only global ops from non-owner warps of an owned pair are gated."""
    return kind.is_global and cls is WarpClass.NONOWNER and owner_established


def throttle_gate(cls: WarpClass, kind: OpKind, sm_index: int, ts: ThrottleState,
                  rng: RngStream, owner_established: bool = True) -> bool:
    if not gate_applies(cls, kind, owner_established):
        return True
    if sm_index == REFERENCE_SM:
        return False
    p = ts.p[sm_index]
    if p >= 1.0:
        return True
    if p <= 0.0:
        return False
    return rng.next() < p


def throttle_update(ts: ThrottleState, sm_index: int, window_stalls_i: int,
                    window_stalls_0: int, step: float = 0.1) -> ThrottleState:
    if sm_index == REFERENCE_SM:
        return ts
    p = list(ts.p)
    p[sm_index] = update_probability(p[sm_index], window_stalls_i, window_stalls_0, step)
    stalls = list(ts.window_stalls) or [0] * len(p)
    stalls[sm_index] = window_stalls_i
    return replace(ts, p=p, window_stalls=stalls, reference_sm_stalls=window_stalls_0)
