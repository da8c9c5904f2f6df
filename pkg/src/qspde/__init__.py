"""Spectral solver and audits for a cut-off stochastic compressible nematic flow.

The state is (r, u, Q): symmetrized density, velocity and a traceless
symmetric order-parameter tensor on the periodic box (-pi, pi)^d.
"""
from .errors import ConfigError, DomainError, InvalidInputError, QSpdeError, StepRejected
from .tensor import MaterialConstants
from .spectral import TorusGrid, SpectralField, GalerkinLevel
from .truncation import CutoffProfile, ClampProfile
from .noise import NoiseModel, WienerPath
from .dynamics import SymmetricState
from .solver import FixedPointConfig, SolverConfig, Trajectory, run, step, fixed_point_drift, detect_stop

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DomainError", "InvalidInputError", "QSpdeError", "StepRejected",
    "MaterialConstants", "TorusGrid", "SpectralField", "GalerkinLevel",
    "CutoffProfile", "ClampProfile", "NoiseModel", "WienerPath", "SymmetricState",
    "FixedPointConfig", "SolverConfig", "Trajectory", "run", "step", "fixed_point_drift", "detect_stop",
]
