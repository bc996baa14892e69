"""Private/shared access classification and the pair-lock ownership protocol.

Two paired blocks split one allocation.  The low part of each member's
allocation is private; the rest is a pool that only one block of the pair
may use at a time.  The first block to take a pool lock becomes the owner,
and ownership passes to the partner only when the owner block finishes.

A non-owner request is denied while the owner block may still use the pool,
which keeps a barrier in one block from waiting on a warp that is itself
spinning on a lock held by the other block.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Hashable

from .errors import IndexOutOfRange, ProtocolViolation
from .occupancy import ResourceKind, as_fraction


class Access(enum.Enum):
    DIRECT = "direct"
    PRIVATE = "private"
    SHARED = "shared"


class Grant(enum.Enum):
    GRANTED = "granted"
    DENIED = "denied"


@dataclass(frozen=True)
class AccessRequest:
    requester: Hashable
    index: int


def register_boundary(regs_per_thread: int, t) -> int:
    """Highest 1-based register number that stays private."""
    return math.floor(regs_per_thread * as_fraction(t))


def scratchpad_boundary(spm_per_block: int, t) -> int:
    """Number of private bytes; offsets below this are private."""
    return math.floor(spm_per_block * as_fraction(t))


def classify_register(req: AccessRequest, regs_per_thread: int, t,
                      warp_is_shared: bool) -> Access:
    if not 1 <= req.index <= regs_per_thread:
        raise IndexOutOfRange(f"register {req.index} outside [1, {regs_per_thread}]")
    if not warp_is_shared:
        return Access.DIRECT
    if req.index <= register_boundary(regs_per_thread, t):
        return Access.PRIVATE
    return Access.SHARED


def classify_scratchpad(req: AccessRequest, spm_per_block: int, t,
                        block_is_shared: bool) -> Access:
    if not 0 <= req.index < spm_per_block:
        raise IndexOutOfRange(f"offset {req.index} outside [0, {spm_per_block})")
    if not block_is_shared:
        return Access.DIRECT
    # Offsets are 0-based, so the byte at the boundary is already shared.
    if req.index < scratchpad_boundary(spm_per_block, t):
        return Access.PRIVATE
    return Access.SHARED


@dataclass
class BlockPairing:
    """One block's view of its pair."""

    partner_block: Hashable | None = None
    owner_block: Hashable | None = None
    resource_kind: ResourceKind = ResourceKind.REGISTER

    @property
    def is_shared(self) -> bool:
        return self.partner_block is not None


@dataclass
class WarpPairLock:
    pair: tuple
    holder: Hashable | None = None  # None means free


@dataclass
class BlockPairLock:
    blocks: tuple
    holder: Hashable | None = None


@dataclass(frozen=True)
class LaunchDirective:
    launch: bool
    promoted: Hashable | None = None


@dataclass(frozen=True)
class LockEvent:
    event: str  # acquire | deny | release | transfer
    holder: Hashable | None
    requester: Hashable | None


class PairState:
    """Lock state shared by the two blocks in one pair of slots.

    Blocks are identified by any hashable id, warps by ``(block, position)``
    where position is the warp index inside its block.  ``warp_finished``
    tells the protocol whether a given warp has exited and drained.
    """

    def __init__(self, kind: ResourceKind, warps_per_block: int,
                 warp_finished: Callable[[Hashable], bool],
                 strict_block_ownership: bool = False):
        self.kind = kind
        self.warps_per_block = warps_per_block
        self.warp_finished = warp_finished
        self.strict = strict_block_ownership
        self.blocks: list = []
        self.owner = None
        # Lock objects live as long as the slot pair; only their holders change.
        if kind is ResourceKind.REGISTER:
            self.warp_locks = [WarpPairLock(()) for _ in range(warps_per_block)]
            self.block_lock = None
        else:
            self.warp_locks = []
            self.block_lock = BlockPairLock(())
        self.events: list[LockEvent] = []

    # membership

    def partner_of(self, block):
        if block not in self.blocks:
            raise ProtocolViolation(f"block {block!r} is not part of this pair")
        others = [b for b in self.blocks if b != block]
        return others[0] if others else None

    def pairing(self, block) -> BlockPairing:
        return BlockPairing(self.partner_of(block), self.owner if self.is_paired else None,
                            self.kind)

    @property
    def is_paired(self) -> bool:
        return len(self.blocks) == 2

    def join(self, block) -> None:
        """Add a block to the pair; a lone survivor keeps its ownership."""
        if len(self.blocks) >= 2:
            raise ProtocolViolation("pair already has two blocks")
        self.blocks.append(block)
        if self.is_paired:
            self._make_locks()

    def _make_locks(self):
        a, b = self.blocks
        for j, lock in enumerate(self.warp_locks):
            lock.pair = ((a, j), (b, j))
        if self.block_lock is not None:
            self.block_lock.blocks = (a, b)

    # protocol

    def would_grant(self, block, position: int | None = None) -> bool:
        """Decide a request without changing any state."""
        partner = self.partner_of(block)
        if partner is None:
            raise ProtocolViolation("lock requested by an unpaired block")
        owner_ok = self.owner in (None, block)
        if self.kind is ResourceKind.SCRATCHPAD:
            return owner_ok and self.block_lock.holder in (None, block)
        if position is None or not 0 <= position < self.warps_per_block:
            raise ProtocolViolation(f"bad warp position {position!r}")
        holder = self.warp_locks[position].holder
        me, other = (block, position), (partner, position)
        partner_done = self.warp_finished(other)
        if self.strict:
            return owner_ok and (holder in (None, me) or (holder == other and partner_done))
        return (owner_ok and holder in (None, me)) or partner_done

    def try_acquire(self, block, position: int | None = None) -> Grant:
        if not self.would_grant(block, position):
            self.record_deny(block, position)
            return Grant.DENIED
        me = block if self.kind is ResourceKind.SCRATCHPAD else (block, position)
        lock = self.block_lock if self.kind is ResourceKind.SCRATCHPAD else self.warp_locks[position]
        if lock.holder != me:
            lock.holder = me
            self.events.append(LockEvent("acquire", me, me))
        if self.owner is None:
            self.owner = block
        return Grant.GRANTED

    def record_deny(self, block, position: int | None = None) -> None:
        partner = self.partner_of(block)
        # A request is only ever refused in favour of an owning partner.
        if self.owner != partner:
            raise ProtocolViolation(
                f"denied block {block!r} although owner is {self.owner!r}, not the partner")
        if self.kind is ResourceKind.SCRATCHPAD:
            self.events.append(LockEvent("deny", self.block_lock.holder, block))
        else:
            self.events.append(LockEvent("deny", self.warp_locks[position].holder,
                                         (block, position)))

    def holds_lock(self, block, position: int | None = None) -> bool:
        if not self.is_paired:
            return False
        if self.kind is ResourceKind.REGISTER:
            return self.warp_locks[position].holder == (block, position)
        return self.block_lock.holder == block

    def on_block_finish(self, block, grid_has_more: bool) -> LaunchDirective:
        """Release the finished block's locks and hand ownership to the partner."""
        partner = self.partner_of(block)
        for lock in self.warp_locks:
            if lock.holder is not None and lock.holder[0] == block:
                self.events.append(LockEvent("release", lock.holder, None))
                lock.holder = None
        if self.block_lock is not None and self.block_lock.holder == block:
            self.events.append(LockEvent("release", block, None))
            self.block_lock.holder = None
        promoted = None
        if self.owner == block:
            self.owner = partner
            promoted = partner
            if partner is not None:
                self.events.append(LockEvent("transfer", partner, block))
        self.blocks.remove(block)
        return LaunchDirective(grid_has_more, promoted)


def try_acquire(state: PairState, block, position: int | None = None) -> Grant:
    return state.try_acquire(block, position)


def on_block_finish(state: PairState, block, grid_has_more: bool) -> LaunchDirective:
    return state.on_block_finish(block, grid_has_more)
