"""seqsemi: a simulation and verification laboratory for stochastic
integration driven by sequences of scalar semimartingales, with Fourier
coordinates for linear evolution equations."""

__version__ = "0.1.0"

from .grid_paths import (
    Ensemble,
    PathParts,
    ScalarPath,
    StepScalarProcess,
    StoppingTime,
    TimeGrid,
    build_grid,
    combine,
    constant_path,
    emery_estimate,
    scalar_step_integral,
    stop_path,
    ucp_seminorm,
)

__all__ = [
    "Ensemble",
    "PathParts",
    "ScalarPath",
    "StepScalarProcess",
    "StoppingTime",
    "TimeGrid",
    "build_grid",
    "combine",
    "constant_path",
    "emery_estimate",
    "scalar_step_integral",
    "stop_path",
    "ucp_seminorm",
    "__version__",
]
