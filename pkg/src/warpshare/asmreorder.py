"""Register-declaration unrolling and first-use reordering for PTXPlus-style code.

Registers are numbered by declaration order, and under register sharing only
the lowest ``floor(K * t)`` numbers are private to a warp.  Redeclaring every
register individually in order of first use pushes the registers a kernel
touches early into the private range, so a warp waiting on the shared pool
gets further before it blocks.

Only a small subset of the assembly is understood::

    .reg .u32 $r<27>;            array declaration, expands to r0..r26
    .reg .pred $p0;              scalar declaration
    set.le.s32.s32 $p0/$o127, s[0x003c], $r124;
    mov.u32 $r16, $r124;
    bar.sync 0;

The first operand of an instruction is its destination (``$a/$b`` writes
two registers), the rest are sources.  ``/* */`` comments are ignored.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ParseError
from .occupancy import as_fraction

SPACES = ("u32", "pred")

# Opcode roots accepted by the parser; the pass only needs to see operands.
OPCODES = frozenset({
    "set", "setp", "mov", "cvt", "add", "sub", "mul", "mad", "div", "rem",
    "min", "max", "abs", "neg", "and", "or", "xor", "not", "shl", "shr", "bar",
})

_DECL = re.compile(
    r"\.reg\s+\.(?P<space>[A-Za-z0-9]+)\s+\$(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"\s*(?:<\s*(?P<count>\d+)\s*>)?")
_OPCODE = re.compile(r"[a-z][a-z0-9_]*(?:\.[a-z0-9_]+)*")
_REG = re.compile(r"\$([A-Za-z_][A-Za-z_0-9]*)")
_MEM = re.compile(r"s\[\s*(0[xX][0-9A-Fa-f]+)\s*\]")
_IMM = re.compile(r"-?(?:0[xX][0-9A-Fa-f]+|\d+)")


@dataclass(frozen=True)
class RegDecl:
    space: str
    base_name: str
    count: int | None = None  # None for a scalar declaration

    def names(self) -> list[str]:
        if self.count is None:
            return [self.base_name]
        return [f"{self.base_name}{i}" for i in range(self.count)]

    def render(self) -> str:
        suffix = "" if self.count is None else f"<{self.count}>"
        return f".reg .{self.space} ${self.base_name}{suffix};"


@dataclass(frozen=True)
class Reg:
    name: str

    def render(self) -> str:
        return f"${self.name}"


@dataclass(frozen=True)
class Mem:
    """A scratchpad reference ``s[0x...]``; not a register."""

    offset: int
    text: str

    def render(self) -> str:
        return f"s[{self.text}]"


@dataclass(frozen=True)
class Imm:
    text: str

    def render(self) -> str:
        return self.text


@dataclass(frozen=True)
class AsmInstr:
    opcode: str
    dests: tuple = ()
    srcs: tuple = ()

    @property
    def dest_operands(self) -> tuple[str, ...]:
        return tuple(op.name for op in self.dests if isinstance(op, Reg))

    @property
    def src_operands(self) -> tuple:
        """Register names and memory operands, left to right."""
        return tuple(op.name if isinstance(op, Reg) else op
                     for op in self.srcs if not isinstance(op, Imm))

    @property
    def memory_operands(self) -> tuple[Mem, ...]:
        return tuple(op for op in self.dests + self.srcs if isinstance(op, Mem))

    def registers(self) -> list[str]:
        """Register names in textual order, destinations first."""
        return [op.name for op in self.dests + self.srcs if isinstance(op, Reg)]

    def render(self) -> str:
        parts = []
        if self.dests:
            parts.append("/".join(op.render() for op in self.dests))
        parts.extend(op.render() for op in self.srcs)
        if not parts:
            return f"{self.opcode};"
        return f"{self.opcode} {', '.join(parts)};"


@dataclass(frozen=True)
class AsmModule:
    declarations: tuple[RegDecl, ...]
    instructions: tuple[AsmInstr, ...]

    def register_names(self) -> list[str]:
        return [n for d in self.declarations for n in d.names()]

    def space_of(self) -> dict[str, str]:
        return {n: d.space for d in self.declarations for n in d.names()}


def _position(text: str, index: int) -> tuple[int, int]:
    line = text.count("\n", 0, index) + 1
    column = index - (text.rfind("\n", 0, index) + 1) + 1
    return line, column


def _strip_comments(text: str) -> str:
    def blank(m):
        return "".join(c if c == "\n" else " " for c in m.group(0))
    out = re.sub(r"/\*.*?\*/", blank, text, flags=re.S)
    if "/*" in out:
        line, col = _position(out, out.index("/*"))
        raise ParseError("unterminated comment", line, col)
    return out


def _split_operands(body: str) -> list[str]:
    return [p.strip() for p in body.split(",")] if body.strip() else []


def _parse_operand(tok: str, where, allow_pair: bool):
    if m := _MEM.fullmatch(tok):
        return [Mem(int(m.group(1), 16), m.group(1))]
    if allow_pair and "/" in tok:
        halves = [h.strip() for h in tok.split("/")]
        if len(halves) != 2 or not all(_REG.fullmatch(h) for h in halves):
            raise ParseError(f"bad destination pair {tok!r}", *where)
        return [Reg(_REG.fullmatch(h).group(1)) for h in halves]
    if m := _REG.fullmatch(tok):
        return [Reg(m.group(1))]
    if _IMM.fullmatch(tok):
        return [Imm(tok)]
    raise ParseError(f"bad operand {tok!r}", *where)


def _parse_instruction(stmt: str, where) -> AsmInstr:
    m = _OPCODE.match(stmt)
    if not m:
        raise ParseError(f"expected an opcode in {stmt!r}", *where)
    opcode = m.group(0)
    parts = opcode.split(".")
    if parts[0] not in OPCODES or (parts[0] == "bar" and opcode != "bar.sync"):
        raise ParseError(f"unsupported opcode {opcode!r}", *where)
    rest = stmt[m.end():]
    if rest and not rest[0].isspace():
        raise ParseError(f"unsupported opcode {stmt.split()[0]!r}", *where)
    tokens = _split_operands(rest)
    if any(t == "" for t in tokens):
        raise ParseError("empty operand", *where)
    if opcode == "bar.sync":
        srcs = [op for t in tokens for op in _parse_operand(t, where, False)]
        if any(not isinstance(op, Imm) for op in srcs):
            raise ParseError("bar.sync takes only an immediate barrier id", *where)
        return AsmInstr(opcode, (), tuple(srcs))
    if not tokens:
        raise ParseError(f"{opcode} needs at least one operand", *where)
    dests = _parse_operand(tokens[0], where, True)
    if isinstance(dests[0], Imm):
        raise ParseError("destination cannot be an immediate", *where)
    srcs = [op for t in tokens[1:] for op in _parse_operand(t, where, False)]
    return AsmInstr(opcode, tuple(dests), tuple(srcs))


def parse(text: str) -> AsmModule:
    clean = _strip_comments(text)
    decls: list[RegDecl] = []
    instrs: list[AsmInstr] = []
    uses: list[tuple[str, tuple[int, int]]] = []
    declared: set[str] = set()

    start = 0
    while start < len(clean):
        end = clean.find(";", start)
        chunk = clean[start:] if end < 0 else clean[start:end]
        stripped = chunk.strip()
        if stripped:
            where = _position(clean, start + (len(chunk) - len(chunk.lstrip())))
            if end < 0:
                raise ParseError("missing ';'", *where)
            stmt = " ".join(stripped.split())
            if stmt.startswith(".reg"):
                m = _DECL.fullmatch(stmt)
                if not m:
                    raise ParseError(f"malformed declaration {stmt!r}", *where)
                if m.group("space") not in SPACES:
                    raise ParseError(f"unsupported register space .{m.group('space')}", *where)
                count = m.group("count")
                if count is not None and int(count) < 1:
                    raise ParseError("array declaration needs a count >= 1", *where)
                decl = RegDecl(m.group("space"), m.group("name"),
                               None if count is None else int(count))
                for name in decl.names():
                    if name in declared:
                        raise ParseError(f"duplicate declaration of ${name}", *where)
                    declared.add(name)
                decls.append(decl)
            elif stmt.startswith("."):
                raise ParseError(f"unsupported directive {stmt.split()[0]!r}", *where)
            else:
                instr = _parse_instruction(stmt, where)
                uses.extend((name, where) for name in instr.registers())
                instrs.append(instr)
        if end < 0:
            break
        start = end + 1

    for name, where in uses:
        if name not in declared:
            raise ParseError(f"undeclared register ${name}", *where)
    return AsmModule(tuple(decls), tuple(instrs))


def serialize(m: AsmModule) -> str:
    lines = [d.render() for d in m.declarations]
    lines.extend(i.render() for i in m.instructions)
    return "\n".join(lines) + "\n"


def sequence_numbers(m: AsmModule) -> dict[str, int]:
    """1-based register numbers in (unrolled) declaration order."""
    return {name: i for i, name in enumerate(m.register_names(), start=1)}


def first_use_order(operand_lists: Iterable[Sequence]) -> list:
    """Distinct items in order of first appearance across the lists."""
    seen: dict = {}
    for ops in operand_lists:
        for op in ops:
            if op not in seen:
                seen[op] = len(seen)
    return list(seen)


def reorder(m: AsmModule) -> AsmModule:
    """Unroll every declaration and order them by first use.

    Registers that are never used keep their relative declaration order and
    come after all used ones.  The instruction stream is left untouched.
    """
    used = first_use_order(i.registers() for i in m.instructions)
    used_set = set(used)
    order = used + [n for n in m.register_names() if n not in used_set]
    space = m.space_of()
    return AsmModule(tuple(RegDecl(space[n], n) for n in order), m.instructions)


def private_boundary(num_registers: int, threshold) -> int:
    """Highest register number that stays private for a shared warp."""
    return math.floor(num_registers * as_fraction(threshold))


def instructions_before_shared(m: AsmModule, threshold, num_registers: int | None = None) -> int:
    """How many leading instructions touch only private registers."""
    seq = sequence_numbers(m)
    k = len(seq) if num_registers is None else num_registers
    bound = private_boundary(k, threshold)
    for count, instr in enumerate(m.instructions):
        if any(seq[r] > bound for r in instr.registers()):
            return count
    return len(m.instructions)


def reorder_report(before: AsmModule, after: AsmModule, threshold) -> list[tuple[str, int, int, str]]:
    """Rows of (name, seq_before, seq_after, shared|unshared), in new order."""
    old = sequence_numbers(before)
    new = sequence_numbers(after)
    bound = private_boundary(len(new), threshold)
    return [(name, old[name], s, "shared" if s > bound else "unshared")
            for name, s in sorted(new.items(), key=lambda kv: kv[1])]
