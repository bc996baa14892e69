"""Thread-block residency with pairwise resource sharing.

A resource-limited SM normally holds ``floor(R / R_tb)`` blocks and wastes
``R mod R_tb`` units.  Sharing launches some blocks as *pairs*: a pair gets
``R_tb + ceil(t * R_tb)`` units, of which each member owns ``floor(t * R_tb)``
privately and the rest is a pool that only one member may use at a time.
The number of pairs is chosen so that the count of blocks guaranteed to make
progress (unshared blocks plus one per pair) never drops below the baseline.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

from .errors import InvalidThreshold, ValidationError, ZeroBlocksFit

WARP_SIZE = 32


class ResourceKind(enum.Enum):
    REGISTER = "register"
    SCRATCHPAD = "scratchpad"


def as_fraction(value) -> Fraction:
    """Exact rational for a threshold given as float, str, int or Fraction.

    Floats go through ``repr`` so that ``0.1`` becomes ``1/10`` rather than
    its binary approximation.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, Rational):
        return Fraction(value)
    return Fraction(str(value))


def threshold_from_pct(sharing_pct) -> Fraction:
    """Sharing percentage P maps to threshold t = 1 - P/100."""
    return 1 - as_fraction(sharing_pct) / 100


def pct_from_threshold(t) -> Fraction:
    return (1 - as_fraction(t)) * 100


def ceil_log2(x: int) -> int:
    """Smallest k with 2**k >= x, for x >= 1."""
    if x < 1:
        raise ValueError("ceil_log2 needs x >= 1")
    return (x - 1).bit_length()


@dataclass(frozen=True)
class ResourceBudget:
    units_per_sm: int
    units_per_block: int
    units_per_warp: int = 0
    kind: ResourceKind = ResourceKind.REGISTER

    def __post_init__(self):
        if self.units_per_block < 1:
            raise ValidationError("units_per_block must be >= 1")
        if self.units_per_sm < 1:
            raise ValidationError("units_per_sm must be >= 1")
        if self.kind is ResourceKind.REGISTER:
            if self.units_per_warp < 1 or self.units_per_block % self.units_per_warp:
                raise ValidationError(
                    "register budget: units_per_block must be a whole number of warps")
        elif self.units_per_warp != 0:
            raise ValidationError("scratchpad budget has no per-warp units")

    @classmethod
    def registers(cls, registers_per_sm: int, threads_per_block: int,
                  regs_per_thread: int) -> "ResourceBudget":
        # Registers are handed out per warp, so a partial warp costs a full one.
        warps = math.ceil(threads_per_block / WARP_SIZE)
        per_warp = WARP_SIZE * regs_per_thread
        return cls(registers_per_sm, warps * per_warp, per_warp, ResourceKind.REGISTER)

    @classmethod
    def scratchpad(cls, scratchpad_per_sm: int, spm_per_block: int) -> "ResourceBudget":
        return cls(scratchpad_per_sm, spm_per_block, 0, ResourceKind.SCRATCHPAD)

    @property
    def baseline_blocks(self) -> int:
        return self.units_per_sm // self.units_per_block

    @property
    def per_thread_units(self) -> int:
        """Registers per thread (register budgets only)."""
        return self.units_per_warp // WARP_SIZE


@dataclass(frozen=True)
class SmLimits:
    max_threads: int = 1536
    max_blocks: int = 8
    warp_size: int = WARP_SIZE
    num_sms: int = 14

    def __post_init__(self):
        if min(self.max_threads, self.max_blocks, self.num_sms) < 1:
            raise ValidationError("SM limits must all be >= 1")
        if self.warp_size != WARP_SIZE:
            raise ValidationError("warp_size is fixed at 32")

    def block_cap(self, threads_per_block: int) -> tuple[int, str]:
        """The tighter of the thread and block caps, with its name."""
        by_threads = self.max_threads // threads_per_block
        if by_threads < self.max_blocks:
            return by_threads, "threads"
        return self.max_blocks, "blocks"


@dataclass(frozen=True)
class OccupancyPlan:
    unshared_blocks: int
    shared_pairs: int
    total_blocks: int
    threshold: Fraction
    private_units_per_member: int
    shared_units_per_pair: int
    limited_by: str = "resource"
    kind: ResourceKind = ResourceKind.REGISTER

    @property
    def guaranteed_blocks(self) -> int:
        """Blocks that always make progress: every unshared block and one per pair."""
        return self.unshared_blocks + self.shared_pairs

    @classmethod
    def unshared(cls, blocks: int, limited_by: str = "resource") -> "OccupancyPlan":
        return cls(blocks, 0, blocks, Fraction(1), 0, 0, limited_by)


def pair_units(budget: ResourceBudget, t: Fraction) -> int:
    """Units allocated to one shared pair, rounded up."""
    return budget.units_per_block + math.ceil(t * budget.units_per_block)


def compute_occupancy(budget: ResourceBudget, limits: SmLimits, threads_per_block: int,
                      threshold) -> OccupancyPlan:
    t = as_fraction(threshold)
    if not 0 < t <= 1:
        raise InvalidThreshold(f"threshold must be in (0, 1], got {t}")
    if budget.units_per_sm < budget.units_per_block:
        raise ZeroBlocksFit(
            f"one block needs {budget.units_per_block} units, SM has {budget.units_per_sm}")
    if not 1 <= threads_per_block <= limits.max_threads:
        raise ZeroBlocksFit(
            f"{threads_per_block} threads per block exceeds the SM cap of {limits.max_threads}")

    r_tb = budget.units_per_block
    baseline = budget.baseline_blocks
    leftover = budget.units_per_sm % r_tb
    # Each pair converts one baseline block into two and costs ceil(t*R_tb) extra.
    extra_per_pair = math.ceil(t * r_tb)
    pairs = min(leftover // extra_per_pair, baseline)
    unshared = baseline - pairs

    cap, cap_name = limits.block_cap(threads_per_block)
    limited_by = "resource"
    if unshared + 2 * pairs >= cap:
        # At the cap, extra units could not buy another block.
        limited_by = cap_name
        # Dissolving a pair drops one block but keeps unshared + pairs fixed.
        dissolve = min(pairs, unshared + 2 * pairs - cap)
        pairs -= dissolve
        unshared += dissolve
        if unshared + 2 * pairs > cap:
            unshared = cap - 2 * pairs

    if budget.kind is ResourceKind.REGISTER:
        k = budget.per_thread_units
        private = math.floor(t * k)
        shared = k - private
    else:
        private = math.floor(t * r_tb)
        shared = r_tb - private
    return OccupancyPlan(unshared, pairs, unshared + 2 * pairs, t, private, shared,
                         limited_by, budget.kind)


def raw_total_blocks(budget: ResourceBudget, threshold) -> int:
    """U + 2S before the thread/block caps are applied."""
    t = as_fraction(threshold)
    baseline = budget.baseline_blocks
    pairs = min((budget.units_per_sm % budget.units_per_block)
                // math.ceil(t * budget.units_per_block), baseline)
    return baseline + pairs


@dataclass(frozen=True)
class WasteReport:
    wasted_units: int
    wasted_fraction: Fraction


def waste_report(budget: ResourceBudget) -> WasteReport:
    wasted = budget.units_per_sm % budget.units_per_block
    return WasteReport(wasted, Fraction(wasted, budget.units_per_sm))


@dataclass(frozen=True)
class HwCostReport:
    register_sharing_bits: int
    scratchpad_sharing_bits: int
    blocks_per_sm: int
    warps_per_sm: int
    num_sms: int


def hw_cost(blocks_per_sm: int, warps_per_sm: int, num_sms: int) -> HwCostReport:
    """Storage in bits needed to support register and scratchpad sharing.

    Common to both: one mode bit per SM, a partner id per block (with one spare
    code for "no partner") and an owner bit per warp.  Register sharing adds a
    sharing-mode bit per warp and a warp-id lock per warp pair; scratchpad
    sharing adds a block-id lock per block pair.
    """
    T, W, N = blocks_per_sm, warps_per_sm, num_sms
    if min(T, W, N) < 1:
        raise ValidationError("hw_cost needs T, W, N >= 1")
    common = 1 + T * ceil_log2(T + 1)
    reg = (common + 2 * W + (W // 2) * ceil_log2(W)) * N
    spm = (common + W + (T // 2) * ceil_log2(T)) * N
    return HwCostReport(reg, spm, T, W, N)
