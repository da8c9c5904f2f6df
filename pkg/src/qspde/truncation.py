"""Smooth cut-off on the driving norms and the Galerkin coefficient clamp.

Both gates use the same profile: 1 on [0, R], 0 on [2R, inf) and the
quintic smoothstep 1 - S((x - R)/R) in between, where
S(t) = 6t^5 - 15t^4 + 10t^3.  S has vanishing first and second
derivatives at t = 0 and t = 1, so the gate is C^2 across both joins.
"""
from dataclasses import dataclass
import math

import numpy as np

from .errors import InvalidInputError


def smoothstep5(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def gate(x, R):
    """Profile value at x >= 0 for threshold R (vectorised)."""
    if math.isinf(R):
        return np.ones_like(np.asarray(x, dtype=float))
    return 1.0 - smoothstep5((np.asarray(x, dtype=float) - R) / R)


@dataclass(frozen=True)
class CutoffProfile:
    R: float

    def __post_init__(self):
        if not self.R > 0:
            raise InvalidInputError(f"cut-off threshold must be positive, got {self.R}")

    def __call__(self, x):
        return float(gate(x, self.R))


@dataclass(frozen=True)
class ClampProfile:
    """Coefficient clamp; ``K = inf`` disables it."""

    K: float = math.inf

    def __post_init__(self):
        if not self.K > 0:
            raise InvalidInputError(f"clamp threshold must be positive, got {self.K}")

    @property
    def active(self):
        return not math.isinf(self.K)


def phi_from_norms(u_norm, q_norm, profile):
    """Phi_R(||u||_{2,inf}) * Phi_R(||Q||_{3,inf})."""
    return profile(u_norm) * profile(q_norm)


def driving_norms(grid, u, Q):
    """(||u||_{2,inf}, ||Q||_{3,inf}) for raw collocation arrays."""
    return grid.sup_norm(u, 2), grid.sup_norm(Q.reshape((9,) + grid.shape), 3)


def phi_R(state, profile):
    """Shared cut-off value for a :class:`~qspde.dynamics.SymmetricState`."""
    un, qn = driving_norms(state.grid, state.u, state.Q)
    return phi_from_norms(un, qn, profile)


def clamp_coefficients(v, profile):
    """Replace every coordinate v_i by Psi_K(|v_i|) v_i."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("coefficients must be finite")
    if not profile.active:
        return v.copy()
    return gate(np.abs(v), profile.K) * v
