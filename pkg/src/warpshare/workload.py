"""Synthetic kernel model: a straight-line body repeated ``loop_trip_count`` times.

All warps of every block run the same body.  Register operands are 1-based
per-thread sequence numbers and scratchpad offsets are 0-based bytes, which
is the numbering the sharing module classifies against.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path

import jsonschema

from .asmreorder import AsmModule, Mem, first_use_order, sequence_numbers
from .config import SmConfig
from .errors import InvalidKernel, ValidationError
from .occupancy import WARP_SIZE

SCHEMA_VERSION = 1


class OpKind(enum.Enum):
    ALU = "alu"
    GLOBAL_LOAD = "gload"
    GLOBAL_STORE = "gstore"
    SHARED_LOAD = "sload"
    SHARED_STORE = "sstore"
    BARRIER = "bar"
    EXIT = "exit"

    @property
    def is_global(self) -> bool:
        return self in (OpKind.GLOBAL_LOAD, OpKind.GLOBAL_STORE)

    @property
    def is_shared(self) -> bool:
        return self in (OpKind.SHARED_LOAD, OpKind.SHARED_STORE)


class Profile(enum.Enum):
    COMPUTE_BOUND = "compute"
    MEMORY_BOUND = "memory"
    SCRATCHPAD_HEAVY = "scratchpad"

    @classmethod
    def parse(cls, text) -> "Profile":
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("_", "").replace("-", "")
        for p in cls:
            if key in (p.value, p.name.lower().replace("_", "")):
                return p
        raise ValidationError(f"unknown profile {text!r}")


@dataclass(frozen=True)
class AddrPattern:
    base: int = 0
    warp_stride: int = 0
    iter_stride: int = 0

    def address(self, warp_index: int, iteration: int) -> int:
        return self.base + self.warp_stride * warp_index + self.iter_stride * iteration


@dataclass(frozen=True)
class TraceOp:
    kind: OpKind
    dst: tuple[int, ...] = ()
    src: tuple[int, ...] = ()
    shared_offset: int | None = None
    addr: AddrPattern | None = None

    def registers(self) -> tuple[int, ...]:
        return self.dst + self.src


@dataclass(frozen=True)
class KernelSpec:
    name: str
    grid_blocks: int
    threads_per_block: int
    regs_per_thread: int
    scratchpad_per_block: int
    body: tuple[TraceOp, ...]
    loop_trip_count: int = 1

    @property
    def warps_per_block(self) -> int:
        return math.ceil(self.threads_per_block / WARP_SIZE)

    @property
    def total_instructions(self) -> int:
        return self.grid_blocks * self.warps_per_block * len(self.body) * self.loop_trip_count

    def digest(self) -> str:
        blob = json.dumps(kernel_to_dict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def validate(k: KernelSpec, cfg: SmConfig) -> None:
    reasons = []
    if k.grid_blocks < 0:
        reasons.append("grid_blocks must be >= 0")
    if k.threads_per_block % WARP_SIZE or not WARP_SIZE <= k.threads_per_block <= cfg.max_threads:
        reasons.append(f"threads_per_block must be a multiple of 32 in [32, {cfg.max_threads}]")
    if k.regs_per_thread < 1:
        reasons.append("regs_per_thread must be >= 1")
    if k.scratchpad_per_block < 0:
        reasons.append("scratchpad_per_block must be >= 0")
    if k.loop_trip_count < 1:
        reasons.append("loop_trip_count must be >= 1")
    if not k.body or k.body[-1].kind is not OpKind.EXIT:
        reasons.append("body must end with exit")

    for i, op in enumerate(k.body):
        where = f"body[{i}]"
        if op.kind is OpKind.EXIT and i != len(k.body) - 1:
            reasons.append(f"{where}: exit must be the last op")
        if op.kind in (OpKind.BARRIER, OpKind.EXIT):
            if op.dst or op.src or op.shared_offset is not None or op.addr is not None:
                reasons.append(f"{where}: {op.kind.value} takes no operands")
            continue
        bad = [r for r in op.registers() if not 1 <= r <= k.regs_per_thread]
        if bad:
            reasons.append(f"{where}: register {bad[0]} outside [1, {k.regs_per_thread}]")
        if op.kind.is_shared:
            if op.shared_offset is None:
                reasons.append(f"{where}: {op.kind.value} needs shared_offset")
            elif not 0 <= op.shared_offset < k.scratchpad_per_block:
                reasons.append(f"{where}: shared_offset {op.shared_offset} out of range "
                               f"[0, {k.scratchpad_per_block})")
        elif op.shared_offset is not None:
            reasons.append(f"{where}: shared_offset only allowed on sload/sstore")
        if op.kind.is_global:
            if op.addr is None:
                reasons.append(f"{where}: {op.kind.value} needs addr")
            elif min(op.addr.base, op.addr.warp_stride, op.addr.iter_stride) < 0:
                reasons.append(f"{where}: address base and strides must be >= 0")
        elif op.addr is not None:
            reasons.append(f"{where}: addr only allowed on gload/gstore")

    if k.regs_per_thread >= 1 and k.threads_per_block >= 1:
        r_tb = k.warps_per_block * WARP_SIZE * k.regs_per_thread
        if r_tb > cfg.registers_per_sm:
            reasons.append(f"block cannot fit: needs {r_tb} registers, SM has {cfg.registers_per_sm}")
    if k.scratchpad_per_block > cfg.scratchpad_per_sm:
        reasons.append(f"block cannot fit: needs {k.scratchpad_per_block} scratchpad bytes, "
                       f"SM has {cfg.scratchpad_per_sm}")
    if reasons:
        raise InvalidKernel(reasons)


# JSON form

_INTS = {"type": "array", "items": {"type": "integer"}}
_NONNEG = {"type": "integer", "minimum": 0}

WORKLOAD_SCHEMA = {
    "type": "object",
    "required": ["name", "grid_blocks", "threads_per_block", "regs_per_thread",
                 "scratchpad_per_block", "loop_trip_count", "body"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "grid_blocks": _NONNEG,
        "threads_per_block": {"type": "integer", "minimum": 1},
        "regs_per_thread": {"type": "integer", "minimum": 1},
        "scratchpad_per_block": _NONNEG,
        "loop_trip_count": {"type": "integer", "minimum": 1},
        "body": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["op"],
                "additionalProperties": False,
                "properties": {
                    "op": {"enum": [k.value for k in OpKind]},
                    "dst": _INTS,
                    "src": _INTS,
                    "shared_offset": _NONNEG,
                    "addr": {
                        "type": "object",
                        "required": ["base", "warp_stride", "iter_stride"],
                        "additionalProperties": False,
                        "properties": {"base": _NONNEG, "warp_stride": _NONNEG,
                                       "iter_stride": _NONNEG},
                    },
                },
            },
        },
    },
}


def _op_to_dict(op: TraceOp) -> dict:
    d: dict = {"op": op.kind.value}
    if op.kind not in (OpKind.BARRIER, OpKind.EXIT):
        d["dst"] = list(op.dst)
        d["src"] = list(op.src)
    if op.shared_offset is not None:
        d["shared_offset"] = op.shared_offset
    if op.addr is not None:
        d["addr"] = {"base": op.addr.base, "warp_stride": op.addr.warp_stride,
                     "iter_stride": op.addr.iter_stride}
    return d


def kernel_to_dict(k: KernelSpec) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "name": k.name,
        "grid_blocks": k.grid_blocks,
        "threads_per_block": k.threads_per_block,
        "regs_per_thread": k.regs_per_thread,
        "scratchpad_per_block": k.scratchpad_per_block,
        "loop_trip_count": k.loop_trip_count,
        "body": [_op_to_dict(op) for op in k.body],
    }


def kernel_from_dict(data) -> KernelSpec:
    """Build a KernelSpec from parsed JSON; schema errors name the field path."""
    try:
        jsonschema.validate(data, WORKLOAD_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ValidationError(f"workload {path}: {exc.message}") from None
    body = []
    for item in data["body"]:
        addr = item.get("addr")
        body.append(TraceOp(
            OpKind(item["op"]),
            tuple(item.get("dst", ())),
            tuple(item.get("src", ())),
            item.get("shared_offset"),
            AddrPattern(**addr) if addr is not None else None,
        ))
    return KernelSpec(data["name"], data["grid_blocks"], data["threads_per_block"],
                      data["regs_per_thread"], data["scratchpad_per_block"], tuple(body),
                      data["loop_trip_count"])


def load_kernel(path) -> KernelSpec:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"workload {path}: invalid JSON ({exc})") from None
    return kernel_from_dict(data)


def save_kernel(k: KernelSpec, path) -> None:
    Path(path).write_text(json.dumps(kernel_to_dict(k), indent=2) + "\n")


# Register renumbering and assembly import

def renumber_by_first_use(k: KernelSpec) -> tuple[KernelSpec, dict[int, int]]:
    """Renumber registers 1..K in order of first use (destinations before sources).

    Registers never touched keep their relative order after the used ones.
    """
    used = first_use_order(op.registers() for op in k.body)
    used_set = set(used)
    order = used + [r for r in range(1, k.regs_per_thread + 1) if r not in used_set]
    mapping = {old: new for new, old in enumerate(order, start=1)}
    body = tuple(replace(op, dst=tuple(mapping[r] for r in op.dst),
                         src=tuple(mapping[r] for r in op.src)) for op in k.body)
    return replace(k, body=body), mapping


def kernel_from_asm(m: AsmModule, name: str = "asm", grid_blocks: int = 1,
                    threads_per_block: int = 32, loop_trip_count: int = 1,
                    scratchpad_per_block: int | None = None) -> KernelSpec:
    """Translate parsed assembly into a trace body.

    Register numbers come from declaration order, so running this on a
    reordered module yields the reordered numbering.  An instruction reading a
    scratchpad operand becomes a shared load, one writing it a shared store,
    ``bar.sync`` a barrier, anything else ALU work.
    """
    seq = sequence_numbers(m)
    body = []
    max_offset = -1
    for instr in m.instructions:
        if instr.opcode == "bar.sync":
            body.append(TraceOp(OpKind.BARRIER))
            continue
        dst = tuple(seq[n] for n in instr.dest_operands)
        src = tuple(seq[op.name] for op in instr.srcs if hasattr(op, "name"))
        mems = instr.memory_operands
        if mems:
            max_offset = max(max_offset, *(mm.offset for mm in mems))
        if any(isinstance(op, Mem) for op in instr.dests):
            body.append(TraceOp(OpKind.SHARED_STORE, (), dst + src, mems[0].offset))
        elif mems:
            body.append(TraceOp(OpKind.SHARED_LOAD, dst, src, mems[0].offset))
        else:
            body.append(TraceOp(OpKind.ALU, dst, src))
    body.append(TraceOp(OpKind.EXIT))
    if scratchpad_per_block is None:
        scratchpad_per_block = max_offset + 4 if max_offset >= 0 else 0
    return KernelSpec(name, grid_blocks, threads_per_block, max(1, len(seq)),
                      scratchpad_per_block, tuple(body), loop_trip_count)


# Generators

# Register-limited (threads_per_block, regs_per_thread) shapes that gain
# extra blocks under sharing on the default SM.
_REG_SHAPES = ((256, 36), (128, 60), (192, 52), (256, 40), (64, 120))
# (threads_per_block, regs_per_thread, lines per warp): lines are sized so
# baseline warps fit in the default L1 and the shared set does not.
_MEMORY_SHAPES = ((256, 36, 4), (128, 60, 7), (192, 52, 6), (256, 40, 4))
# Odd-warp register-limited shapes: one block per SM at baseline, two shared.
_COMPUTE_SHAPES = ((480, 40), (480, 36), (416, 40))
# Scratchpad-limited (threads_per_block, scratchpad bytes) shapes.
_SPM_SHAPES = ((128, 7200), (64, 3072), (128, 5200), (32, 5000))


@dataclass
class _BodyBuilder:
    rng: random.Random
    regs: int
    ops: list = field(default_factory=list)
    recent: list = field(default_factory=list)

    def pick_src(self) -> int:
        if self.recent and self.rng.random() < 0.6:
            return self.rng.choice(self.recent[-3:])
        return self.rng.randint(1, self.regs)

    def note(self, reg: int) -> int:
        self.recent.append(reg)
        return reg

    def alu(self):
        n_src = self.rng.randint(1, 2)
        src = tuple(self.pick_src() for _ in range(n_src))
        dst = (self.note(self.rng.randint(1, self.regs)),)
        self.ops.append(TraceOp(OpKind.ALU, dst, src))

    def gload(self, addr: AddrPattern):
        dst = (self.note(self.rng.randint(1, self.regs)),)
        self.ops.append(TraceOp(OpKind.GLOBAL_LOAD, dst, (self.rng.randint(1, self.regs),),
                                addr=addr))

    def gstore(self, addr: AddrPattern):
        self.ops.append(TraceOp(OpKind.GLOBAL_STORE, (), (self.pick_src(),), addr=addr))

    def sload(self, offset: int):
        dst = (self.note(self.rng.randint(1, self.regs)),)
        self.ops.append(TraceOp(OpKind.SHARED_LOAD, dst, (), offset))

    def sstore(self, offset: int):
        self.ops.append(TraceOp(OpKind.SHARED_STORE, (), (self.pick_src(),), offset))

    def ensure_range_coverage(self):
        # Touch one low (private at t=0.1) and one high register so both
        # sides of the boundary are exercised.
        low = max(1, math.floor(self.regs * 0.1))
        regs = {r for op in self.ops for r in op.registers()}
        if not any(r <= low for r in regs):
            self.ops.insert(0, TraceOp(OpKind.ALU, (self.rng.randint(1, low),), (self.regs,)))
        if not any(r > low for r in regs):
            self.ops.insert(0, TraceOp(OpKind.ALU, (self.regs,), (1,)))


def _compute_bound(rng: random.Random, seed: int) -> KernelSpec:
    # Big blocks with an odd warp count: one block per SM at baseline, and
    # the two scheduler units get uneven halves of it.
    tpb, regs = rng.choice(_COMPUTE_SHAPES)
    # The main body cycles over a few hot registers; a short epilogue writes
    # the rest of the register file.
    hot = rng.sample(range(1, regs + 1), rng.randint(2, 3))
    cold = [r for r in range(1, regs + 1) if r not in hot]
    line = 128
    n = rng.randint(24, 40)
    positions = set(rng.sample(range(2, n), rng.randint(1, 2)))
    ops = []
    for i in range(n):
        if i in positions:
            addr = AddrPattern(base=rng.randrange(64) * line, warp_stride=line, iter_stride=0)
            ops.append(TraceOp(OpKind.GLOBAL_LOAD, (rng.choice(hot),), (rng.choice(hot),),
                               addr=addr))
        else:
            src = tuple(rng.choice(hot) for _ in range(rng.randint(1, 2)))
            ops.append(TraceOp(OpKind.ALU, (rng.choice(hot),), src))
    for _ in range(rng.randint(3, 6)):
        ops.append(TraceOp(OpKind.ALU, (rng.choice(cold),), (rng.choice(hot),)))
    low = max(1, math.floor(regs * 0.1))
    if not any(r <= low for op in ops for r in op.registers()):
        ops.append(TraceOp(OpKind.ALU, (rng.randint(1, low),), (rng.choice(hot),)))
    if not any(r > low for op in ops for r in op.registers()):
        ops.append(TraceOp(OpKind.ALU, (regs,), (rng.choice(hot),)))
    ops.append(TraceOp(OpKind.EXIT))
    # Whole rounds of 28 blocks (14 SMs, two slots each when shared).
    grid = 28 * rng.randint(3, 6)
    return KernelSpec(f"compute-{seed}", grid, tpb, regs, 0, tuple(ops), rng.randint(3, 6))


def _memory_bound(rng: random.Random, seed: int) -> KernelSpec:
    tpb, regs, lines = rng.choice(_MEMORY_SHAPES)
    b = _BodyBuilder(rng, regs)
    line = 128
    # Each warp cycles over its own set of lines.  At baseline occupancy the
    # union fits in L1; the extra shared blocks push it past capacity.
    stride = lines * line
    n_global = lines + rng.randint(0, 4)
    kinds = [True] * n_global + [False] * rng.randint(n_global // 2, n_global)
    rng.shuffle(kinds)
    j = 0
    for is_global in kinds:
        if is_global:
            addr = AddrPattern(base=(j % lines) * line, warp_stride=stride, iter_stride=0)
            j += 1
            if rng.random() < 0.85:
                b.gload(addr)
            else:
                b.gstore(addr)
        else:
            b.alu()
    b.ensure_range_coverage()
    body = tuple(b.ops) + (TraceOp(OpKind.EXIT),)
    return KernelSpec(f"memory-{seed}", rng.randint(80, 160), tpb, regs, 0, body,
                      rng.randint(10, 20))


def _scratchpad_heavy(rng: random.Random, seed: int) -> KernelSpec:
    tpb, spm = rng.choice(_SPM_SHAPES)
    regs = rng.randint(8, 16)
    b = _BodyBuilder(rng, regs)
    half = math.floor(spm * 0.5)
    n = rng.randint(16, 30)
    n_shared = 0
    for i in range(n):
        if rng.random() < 0.4:
            # Most scratchpad traffic lands in the upper half.
            if n_shared % 4 == 3:
                offset = rng.randrange(0, half)
            else:
                offset = rng.randrange(half + 1, spm)
            n_shared += 1
            if rng.random() < 0.6:
                b.sload(offset)
            else:
                b.sstore(offset)
        else:
            b.alu()
    if n_shared < 2:
        b.ops.insert(0, TraceOp(OpKind.SHARED_STORE, (), (1,), spm - 4))
        b.ops.append(TraceOp(OpKind.SHARED_LOAD, (regs,), (), spm - 4))
    if rng.random() < 0.5:
        b.ops.insert(len(b.ops) // 2, TraceOp(OpKind.BARRIER))
    b.ensure_range_coverage()
    body = tuple(b.ops) + (TraceOp(OpKind.EXIT),)
    return KernelSpec(f"scratchpad-{seed}", rng.randint(80, 160), tpb, regs, spm, body,
                      rng.randint(2, 5))


_GENERATORS = {
    Profile.COMPUTE_BOUND: _compute_bound,
    Profile.MEMORY_BOUND: _memory_bound,
    Profile.SCRATCHPAD_HEAVY: _scratchpad_heavy,
}


def generate(profile, seed: int) -> KernelSpec:
    """Deterministic synthetic kernel for a resource profile."""
    if not isinstance(profile, Profile):
        profile = Profile.parse(str(profile))
    rng = random.Random(f"{profile.value}:{seed}")
    return _GENERATORS[profile](rng, seed)


def op_mix(k: KernelSpec) -> dict[OpKind, float]:
    """Fraction of body ops per kind."""
    counts = {kind: 0 for kind in OpKind}
    for op in k.body:
        counts[op.kind] += 1
    return {kind: c / len(k.body) for kind, c in counts.items()}
