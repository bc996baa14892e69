"""SM hardware configuration and its JSON form.

Defaults follow a Fermi-class GPGPU-Sim setup: 14 SMs, 32768 registers and
16 KB of scratchpad per SM, 1536 threads and 8 blocks per SM, two warp
schedulers, 16 KB L1.  Latencies and L1 geometry are modelling choices.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .occupancy import SmLimits, as_fraction

SCHEDULERS = ("lrr", "gto", "owf")


@dataclass(frozen=True)
class Latencies:
    alu: int = 4
    shared_mem: int = 24
    l1_hit: int = 28
    l1_miss: int = 200


@dataclass(frozen=True)
class L1Geometry:
    sets: int = 32
    ways: int = 4
    line_bytes: int = 128


@dataclass(frozen=True)
class DynExec:
    enabled: bool = False
    window: int = 1000
    step: float = 0.1


@dataclass(frozen=True)
class SharingEnabled:
    registers: bool = True
    scratchpad: bool = True


@dataclass(frozen=True)
class SmConfig:
    num_sms: int = 14
    registers_per_sm: int = 32768
    scratchpad_per_sm: int = 16384
    max_threads: int = 1536
    max_blocks: int = 8
    num_schedulers: int = 2
    sharing_threshold: float = 0.1
    sharing_enabled: SharingEnabled = field(default_factory=SharingEnabled)
    latencies: Latencies = field(default_factory=Latencies)
    l1: L1Geometry = field(default_factory=L1Geometry)
    dyn_exec: DynExec = field(default_factory=DynExec)
    rng_seed: int = 0
    scheduler: str = "lrr"
    strict_block_ownership: bool = False
    max_cycles: int = 100_000_000

    def __post_init__(self):
        problems = []
        for name in ("num_sms", "registers_per_sm", "max_threads", "max_blocks",
                     "num_schedulers", "max_cycles"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1")
        if self.scratchpad_per_sm < 0:
            problems.append("scratchpad_per_sm must be >= 0")
        if self.rng_seed < 0:
            problems.append("rng_seed must be >= 0")
        for name, value in dataclasses.asdict(self.latencies).items():
            if value < 1:
                problems.append(f"latencies.{name} must be >= 1")
        for name, value in dataclasses.asdict(self.l1).items():
            if value < 1:
                problems.append(f"l1.{name} must be >= 1")
        if self.dyn_exec.window < 1:
            problems.append("dyn_exec.window must be >= 1")
        if not 0 < self.dyn_exec.step <= 1:
            problems.append("dyn_exec.step must be in (0, 1]")
        if not 0 < as_fraction(self.sharing_threshold) <= 1:
            problems.append("sharing_threshold must be in (0, 1]")
        if self.scheduler not in SCHEDULERS:
            problems.append(f"scheduler must be one of {', '.join(SCHEDULERS)}")
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def limits(self) -> SmLimits:
        return SmLimits(self.max_threads, self.max_blocks, num_sms=self.num_sms)

    def replace(self, **changes) -> "SmConfig":
        """Copy with top-level or dotted nested fields changed.

        >>> SmConfig().replace(**{"dyn_exec.enabled": True}).dyn_exec.enabled
        True
        """
        nested: dict[str, dict] = {}
        flat = {}
        for key, value in changes.items():
            if "." in key:
                outer, inner = key.split(".", 1)
                nested.setdefault(outer, {})[inner] = value
            else:
                flat[key] = value
        for outer, inner in nested.items():
            flat[outer] = dataclasses.replace(getattr(self, outer), **inner)
        return dataclasses.replace(self, **flat)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SmConfig":
        try:
            jsonschema.validate(data, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config {path}: {exc.message}") from None
        kwargs = dict(data)
        for name, sub in _NESTED.items():
            if name in kwargs:
                kwargs[name] = sub(**kwargs[name])
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "SmConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path}: invalid JSON ({exc})") from None
        return cls.from_dict(data)


_NESTED = {
    "sharing_enabled": SharingEnabled,
    "latencies": Latencies,
    "l1": L1Geometry,
    "dyn_exec": DynExec,
}


def _object(props: dict) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False}


_INT = {"type": "integer"}
_BOOL = {"type": "boolean"}
_NUM = {"type": "number"}

CONFIG_SCHEMA = _object({
    "num_sms": _INT,
    "registers_per_sm": _INT,
    "scratchpad_per_sm": _INT,
    "max_threads": _INT,
    "max_blocks": _INT,
    "num_schedulers": _INT,
    "sharing_threshold": _NUM,
    "sharing_enabled": _object({"registers": _BOOL, "scratchpad": _BOOL}),
    "latencies": _object({k: _INT for k in ("alu", "shared_mem", "l1_hit", "l1_miss")}),
    "l1": _object({k: _INT for k in ("sets", "ways", "line_bytes")}),
    "dyn_exec": _object({"enabled": _BOOL, "window": _INT, "step": _NUM}),
    "rng_seed": _INT,
    "scheduler": {"enum": list(SCHEDULERS)},
    "strict_block_ownership": _BOOL,
    "max_cycles": _INT,
})
