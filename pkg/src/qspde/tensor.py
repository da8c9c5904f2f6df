"""Pointwise algebra of 3x3 matrices and Q-tensors.

All functions accept either a single ``(3, 3)`` matrix or a field of
matrices with shape ``(3, 3, *spatial)``; the two leading axes are always
the matrix indices.  Landau-de Gennes bulk quantities follow the
conventions

    F(Q) = L/2 |grad Q|^2 + a/2 tr(Q^2) - b/3 tr(Q^3) + c/4 tr(Q^2)^2
    K(Q) = Gamma * (-a Q + b [Q^2 - I tr(Q^2)/3] - c Q tr(Q^2))
"""
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

TRACE_TOL = 1e-14


@dataclass(frozen=True)
class MaterialConstants:
    """Physical constants of the compressible nematic system."""

    A: float = 1.0
    gamma: float = 2.0
    upsilon: float = 0.1
    lam: float = 0.0
    L: float = 1.0
    Gamma: float = 1.0
    a: float = 1.0
    b: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        vals = {k: getattr(self, k) for k in self.__dataclass_fields__}
        for name, v in vals.items():
            if not np.isfinite(v):
                raise InvalidInputError(f"constant {name} must be finite, got {v}")
        checks = [
            ("A", self.A > 0), ("gamma", self.gamma > 1), ("upsilon", self.upsilon > 0),
            ("lam", self.lam >= 0), ("L", self.L > 0), ("Gamma", self.Gamma > 0),
            ("b", self.b > 0), ("c", self.c > 0),
        ]
        for name, ok in checks:
            if not ok:
                raise InvalidInputError(f"constant {name}={vals[name]} violates its sign constraint")


def _as_matrix(M):
    M = np.asarray(M, dtype=float)
    if M.ndim < 2 or M.shape[:2] != (3, 3):
        raise InvalidInputError(f"expected leading shape (3, 3), got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError("matrix has non-finite entries")
    return M


def matmul(A, B):
    """Pointwise matrix product of two matrix fields."""
    return np.einsum("ik...,kj...->ij...", A, B)


def transpose(M):
    return np.swapaxes(M, 0, 1)


def trace(M):
    return M[0, 0] + M[1, 1] + M[2, 2]


def identity_like(M):
    eye = np.zeros_like(M)
    for i in range(3):
        eye[i, i] = 1.0
    return eye


def frobenius(M):
    """Pointwise Frobenius norm |M| = sqrt(sum M_ij^2)."""
    return np.sqrt(np.einsum("ij...,ij...->...", M, M))


def project_S03(M):
    """Return (M + M^T)/2 - tr(M)/3 I, the projection onto Q-tensors."""
    M = _as_matrix(M)
    S = 0.5 * (M + transpose(M))
    tr = trace(S) / 3.0
    for i in range(3):
        S[i, i] = S[i, i] - tr
    return S


def is_qtensor(Q, tol=TRACE_TOL):
    """True when Q is exactly symmetric and trace-free up to ``tol`` relative."""
    Q = np.asarray(Q, dtype=float)
    if not np.array_equal(Q, transpose(Q)):
        return False
    scale = 1.0 + frobenius(Q)
    return bool(np.all(np.abs(trace(Q)) <= tol * scale))


def commutator(A, B):
    """A B - B A."""
    return matmul(A, B) - matmul(B, A)


def odot(grad_Q):
    """(grad Q (.) grad Q)_ij = sum_kl d_i Q_kl d_j Q_kl.

    ``grad_Q`` has shape ``(n, 3, 3, *spatial)`` with ``grad_Q[i] = d_i Q``;
    ``n`` is the spatial dimension (2 or 3).  The result is always 3x3, with
    rows/columns beyond ``n`` zero.
    """
    grad_Q = np.asarray(grad_Q, dtype=float)
    n = grad_Q.shape[0]
    out = np.zeros((3, 3) + grad_Q.shape[3:])
    out[:n, :n] = np.einsum("ikl...,jkl...->ij...", grad_Q, grad_Q)
    return out


def tr_Q2(Q):
    return np.einsum("ij...,ji...->...", Q, Q)


def tr_Q3(Q):
    return np.einsum("ij...,jk...,ki...->...", Q, Q, Q)


def bulk_potential(Q, consts):
    """a/2 tr(Q^2) - b/3 tr(Q^3) + c/4 tr(Q^2)^2 (no gradient part)."""
    t2 = tr_Q2(Q)
    return 0.5 * consts.a * t2 - consts.b / 3.0 * tr_Q3(Q) + 0.25 * consts.c * t2 * t2


def bulk_free_energy(Q, grad_Q_sq, consts):
    """Landau-de Gennes density F(Q) with a supplied |grad Q|^2."""
    grad_Q_sq = np.asarray(grad_Q_sq, dtype=float)
    if np.any(grad_Q_sq < 0):
        raise InvalidInputError("grad_Q_sq must be nonnegative")
    return 0.5 * consts.L * grad_Q_sq + bulk_potential(np.asarray(Q, dtype=float), consts)


def bulk_force_K(Q, consts):
    """K(Q) = Gamma (-a Q + b [Q^2 - I tr(Q^2)/3] - c Q tr(Q^2)).

    For symmetric trace-free input the result is symmetric and trace-free
    without any re-projection.
    """
    Q = np.asarray(Q, dtype=float)
    Q2 = matmul(Q, Q)
    t2 = tr_Q2(Q)
    dev = Q2.copy()
    for i in range(3):
        dev[i, i] = dev[i, i] - t2 / 3.0
    return consts.Gamma * (-consts.a * Q + consts.b * dev - consts.c * Q * t2)


def skew_part(G):
    """(G - G^T)/2; exactly antisymmetric in floating point."""
    return 0.5 * (G - transpose(G))
