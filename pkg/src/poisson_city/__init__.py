"""Monte Carlo for the traffic flow through the centre of a Poissonian city."""

__version__ = "0.1.0"

from .errors import (
    DivergenceError,
    EmptySampleError,
    InvalidParameterError,
    NeedsExtensionError,
    OutOfRangeError,
)
from .estimator import FlowEstimate, estimate_half_plane, l1_error_bound, sample_total_flow, simulate_flows
from .rand_dist import RngStream
from .seminal import CurveVertex, SeminalCurve, new_curve

__all__ = [
    "CurveVertex",
    "DivergenceError",
    "EmptySampleError",
    "FlowEstimate",
    "InvalidParameterError",
    "NeedsExtensionError",
    "OutOfRangeError",
    "RngStream",
    "SeminalCurve",
    "estimate_half_plane",
    "l1_error_bound",
    "new_curve",
    "sample_total_flow",
    "simulate_flows",
]
