"""Calibrate anisotropic sentence-embedding spaces to an isotropic Gaussian
with an invertible flow, and measure the change with rank-correlation
evaluation, calibration baselines, and anisotropy diagnostics."""

from . import baselines, diagnostics, evaluation, flow, numerics, store, synth
from .errors import IsoflowError

__version__ = "0.1.0"

__all__ = [
    "IsoflowError",
    "baselines",
    "diagnostics",
    "evaluation",
    "flow",
    "numerics",
    "store",
    "synth",
    "__version__",
]
