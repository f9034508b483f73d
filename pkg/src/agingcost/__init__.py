"""Battery dispatch with a piecewise-linear cycle-aging cost."""

from .errors import AgingCostError, DomainError, InfeasibleError, NonConvexStressError, ValidationError
from .rainflow import CycleSet, SocProfile, benchmark_cost, count_cycles, extract_extrema, life_loss
from .segments import DispatchProfile, SegmentTrace, init_segments, segment_throughput, simulate, soc_series, step
from .stress import SegmentCostCurve, StressFunction, eval_stress, linearize, marginal_cost_at_depth

__version__ = "0.1.0"

__all__ = [
    "AgingCostError",
    "CycleSet",
    "DispatchProfile",
    "DomainError",
    "InfeasibleError",
    "NonConvexStressError",
    "SegmentCostCurve",
    "SegmentTrace",
    "SocProfile",
    "StressFunction",
    "ValidationError",
    "benchmark_cost",
    "count_cycles",
    "eval_stress",
    "extract_extrema",
    "init_segments",
    "life_loss",
    "linearize",
    "marginal_cost_at_depth",
    "segment_throughput",
    "simulate",
    "soc_series",
    "step",
]
