"""Numerical verification of projective-motion solutions on six-dimensional h-spaces."""

from .jets import Jet2, JetMatrix, ParamFn, PoleError
from .metrics import HSpaceSpec, SamplerConfig, make_spec, metric_at, sample_points, validate_spec

__version__ = "0.1.0"

__all__ = [
    "HSpaceSpec",
    "Jet2",
    "JetMatrix",
    "ParamFn",
    "PoleError",
    "SamplerConfig",
    "make_spec",
    "metric_at",
    "sample_points",
    "validate_spec",
    "__version__",
]
