"""Top-level simulation entry point."""

from __future__ import annotations

from ..config import SmConfig
from ..workload import KernelSpec
from . import core
from ._pycore import Trace
from .metrics import MetricsReport, build_report
from .program import SHARE_REG, SHARE_SPM, PlanMode, build_program

_RESOURCE = {SHARE_REG: "register", SHARE_SPM: "scratchpad"}


def run(cfg: SmConfig, kernel: KernelSpec, plan_mode=PlanMode.SHARING,
        reorder_enabled: bool = False, trace: Trace | None = None,
        backend: str | None = None) -> MetricsReport:
    """Simulate every block of the grid on all SMs and collect metrics.

    Conservation and instruction-count checks run on every call and raise
    SimulatorInvariantViolation on a mismatch.
    """
    prog, rp, k = build_program(cfg, kernel, plan_mode, reorder_enabled)
    raw = core.simulate(prog, trace, backend)
    return build_report(raw, k.total_instructions, rp.plan.total_blocks,
                        rp.plan.unshared_blocks, rp.plan.shared_pairs,
                        _RESOURCE.get(rp.shared_kind, "none"))
