"""Cycle-level SM simulation with block-pair resource sharing."""

from ._pycore import Simulation, Trace
from .api import run
from .core import BACKEND, available_backends
from .metrics import MetricsReport, SmMetrics, UnitCounters
from .program import PlanMode, Program, ResidencyPlan, build_program, plan_residency
from .throttle import ThrottleState, throttle_gate, throttle_update

__all__ = [
    "BACKEND", "MetricsReport", "PlanMode", "Program", "ResidencyPlan", "Simulation",
    "SmMetrics", "ThrottleState", "Trace", "UnitCounters", "available_backends",
    "build_program", "plan_residency", "run", "throttle_gate", "throttle_update",
]
