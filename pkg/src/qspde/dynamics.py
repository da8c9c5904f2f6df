"""Right-hand sides of the cut-off symmetric system.

State variables are the symmetrized density r, the velocity u (``dim``
components) and the full 3x3 Q-tensor field.  Conventions used throughout:

* ``G[i, j] = d_i u_j`` (3x3, padded with zeros in 2D),
  ``Theta = (G - G^T)/2``;
* ``(div M)_j = sum_i d_i M_ij`` for matrix fields;
* ``M1 : M2 = tr(M1 M2)`` for the pairing in the cancellation identity.

The Q equation keeps Gamma L Lap(Q) outside the cut-off while transport,
co-rotation and K(Q) are multiplied by Phi; every term of the momentum
equation carries Phi.  Each assembled right-hand side is truncated to the
dealiased mode set before it is returned.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from . import tensor as ta
from .errors import DomainError, InvalidInputError
from .truncation import driving_norms, phi_from_norms

STRESS_FORMS = ("display", "elastic")


@dataclass(frozen=True)
class SymmetricState:
    """(r, u, Q) on a common grid plus the material constants and time."""

    grid: object
    r: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    Q: np.ndarray = field(repr=False)
    consts: ta.MaterialConstants = ta.MaterialConstants()
    t: float = 0.0

    def __post_init__(self):
        g = self.grid
        r, u, Q = (_frozen(a) for a in (self.r, self.u, self.Q))
        if r.shape != g.shape or u.shape != (g.dim,) + g.shape or Q.shape != (3, 3) + g.shape:
            raise InvalidInputError(
                f"state shapes r{r.shape} u{u.shape} Q{Q.shape} do not match grid {g.shape}")
        for name, a in (("r", r), ("u", u), ("Q", Q)):
            if not np.all(np.isfinite(a)):
                raise InvalidInputError(f"state field {name} has non-finite values")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "Q", Q)
        _check_positive(r, "r")

    @property
    def rho(self):
        return desymmetrize(self.r, self.consts)

    def with_fields(self, **kw):
        return replace(self, **kw)

    def structure_residuals(self):
        """(max |tr Q|, max |Q - Q^T|, max |Q|) over collocation points."""
        Q = self.Q
        scale = float(ta.frobenius(Q).max())
        return (float(np.abs(ta.trace(Q)).max()),
                float(np.abs(Q - ta.transpose(Q)).max()), scale)

    def packed(self):
        """Components stacked as (r, u_1..u_d, Q_11..Q_33) for snapshots."""
        g = self.grid
        return np.concatenate([self.r[None], self.u, self.Q.reshape((9,) + g.shape)])

    @classmethod
    def unpack(cls, grid, data, consts, t):
        d = grid.dim
        return cls(grid, data[0], data[1:1 + d], data[1 + d:].reshape((3, 3) + grid.shape), consts, t)


@dataclass(frozen=True)
class RhsBundle:
    dr_dt: np.ndarray
    du_dt_drift: np.ndarray
    dQ_dt: np.ndarray
    phi: float
    norms: tuple = (0.0, 0.0)


def _frozen(a):
    if isinstance(a, np.ndarray) and a.dtype == float and not a.flags.writeable:
        return a
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_positive(a, name):
    bad = ~(a > 0)
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise DomainError(f"{name} must be positive; first offending point {idx} has value {a[idx]}",
                          index=idx, value=float(a[idx]))


# ---- symmetrization ---------------------------------------------------------

def symmetrize_density(rho, consts):
    """r = sqrt(2 A gamma / (gamma - 1)) rho^((gamma - 1)/2)."""
    rho = np.asarray(rho, dtype=float)
    _check_positive(rho, "rho")
    g = consts.gamma
    return np.sqrt(2.0 * consts.A * g / (g - 1.0)) * rho ** ((g - 1.0) / 2.0)


def desymmetrize(r, consts):
    """Inverse of :func:`symmetrize_density`."""
    r = np.asarray(r, dtype=float)
    _check_positive(r, "r")
    g = consts.gamma
    return ((g - 1.0) / (2.0 * consts.A * g) * r * r) ** (1.0 / (g - 1.0))


def coeff_D(r, consts):
    """D(r) = 1/rho(r) = ((g-1)/(2 A g))^(-1/(g-1)) r^(-2/(g-1))."""
    r = np.asarray(r, dtype=float)
    _check_positive(r, "r")
    g = consts.gamma
    return ((g - 1.0) / (2.0 * consts.A * g)) ** (-1.0 / (g - 1.0)) * r ** (-2.0 / (g - 1.0))


def total_mass(state):
    return float(state.grid.integrate(state.rho))


# ---- kinematics ---------------------------------------------------------------

def velocity_gradient(grid, u):
    """3x3 field G[i, j] = d_i u_j."""
    d = grid.dim
    G = np.zeros((3, 3) + grid.shape)
    G[:d, :d] = grid.grad(u)
    return G


def advect(grid, u, f):
    """u . grad f for a field f with arbitrary leading component axes."""
    gf = grid.grad(f)
    return sum(u[i] * gf[i] for i in range(grid.dim))


def matrix_div(grid, M):
    """(div M)_j = sum_i d_i M_ij, returned for j < dim."""
    d = grid.dim
    hat = grid.fft(M[:d, :d])
    return grid.ifft(sum(grid.ik[i] * hat[i] for i in range(d)))


# ---- right-hand sides -------------------------------------------------------

def mass_pointwise(r, grad_r, u, div_u, gamma, phi=1.0):
    """-Phi (u . grad r + (gamma - 1)/2 r div u) on already-evaluated fields."""
    return -phi * (np.sum(u * grad_r, axis=0) + 0.5 * (gamma - 1.0) * r * div_u)


def rhs_mass(state, phi=1.0):
    g = state.grid
    out = mass_pointwise(state.r, g.grad(state.r), state.u, g.div(state.u), state.consts.gamma, phi)
    return g.filter(out)


def rhs_mass_conservative(state, phi=1.0):
    """-Phi div(rho u): the same equation written for rho."""
    g = state.grid
    return g.filter(-phi * g.div(state.rho[None] * state.u))


def lame(grid, u, consts):
    """upsilon Lap u + (upsilon + lambda) grad div u."""
    hat = grid.fft(u)
    divhat = sum(grid.ik[i] * hat[i] for i in range(grid.dim))
    out = consts.upsilon * (-grid.ksq) * hat + (consts.upsilon + consts.lam) * np.stack(
        [grid.ik[j] * divhat for j in range(grid.dim)])
    return grid.ifft(out)


def q_force_terms(grid, Q, consts, stress_form="display"):
    """The three Q-driven forces of the momentum equation, unweighted.

    Returns ``(elastic, isotropic, corotational)`` with
    elastic = -div(L gradQ (.) gradQ), isotropic = grad(F(Q)) (or only its
    gradient part for ``stress_form="elastic"``) and
    corotational = L div(Q Lap Q - Lap Q Q).
    """
    if stress_form not in STRESS_FORMS:
        raise InvalidInputError(f"unknown stress form {stress_form!r}")
    gQ = grid.grad(Q)
    elastic = -consts.L * matrix_div(grid, ta.odot(gQ))
    grad_sq = np.sum(gQ * gQ, axis=(0, 1, 2))
    if stress_form == "display":
        Fq = ta.bulk_free_energy(Q, grad_sq, consts)
    else:
        Fq = 0.5 * consts.L * grad_sq
    isotropic = grid.grad(Fq)
    lapQ = grid.laplacian(Q)
    corot = consts.L * matrix_div(grid, ta.commutator(Q, lapQ))
    return elastic, isotropic, corot


def q_stress(grid, Q, consts, stress_form="display"):
    """Assembled stress -L gradQ(.)gradQ + F(Q) I + L (Q LapQ - LapQ Q)."""
    gQ = grid.grad(Q)
    grad_sq = np.sum(gQ * gQ, axis=(0, 1, 2))
    if stress_form == "display":
        Fq = ta.bulk_free_energy(Q, grad_sq, consts)
    else:
        Fq = 0.5 * consts.L * grad_sq
    S = -consts.L * ta.odot(gQ) + consts.L * ta.commutator(Q, grid.laplacian(Q))
    for i in range(3):
        S[i, i] = S[i, i] + Fq
    return S


def rhs_momentum_drift(state, phi=1.0, stress_form="display"):
    """Drift of du: -Phi(u.grad u + r grad r) + Phi D(r)[Lame u + Q forces]."""
    g = state.grid
    c = state.consts
    u, r = state.u, state.r
    transport = advect(g, u, u) + r[None] * g.grad(r)
    elastic, isotropic, corot = q_force_terms(g, state.Q, c, stress_form)
    D = coeff_D(r, c)
    out = -phi * transport + phi * D[None] * (lame(g, u, c) + elastic + isotropic + corot)
    return g.filter(out)


def corotation(grid, u, Q):
    """-(u . grad Q - Theta Q + Q Theta) before the cut-off."""
    Theta = ta.skew_part(velocity_gradient(grid, u))
    return -(advect(grid, u, Q) - ta.commutator(Theta, Q))


def rhs_q_tensor(state, phi=1.0, include_diffusion=True):
    """-Phi(u.grad Q - Theta Q + Q Theta) + Gamma L Lap Q + Phi K(Q)."""
    g = state.grid
    c = state.consts
    out = phi * (corotation(g, state.u, state.Q) + ta.bulk_force_K(state.Q, c))
    if include_diffusion:
        out = out + c.Gamma * c.L * g.laplacian(state.Q)
    return g.filter(out)


def assemble_rhs(state, profile, stress_form="display", include_diffusion=True,
                 mass_form="symmetric", phi=None, norms=None):
    """Evaluate Phi once and every right-hand side at ``state``."""
    un, qn = driving_norms(state.grid, state.u, state.Q) if norms is None else norms
    if phi is None:
        phi = phi_from_norms(un, qn, profile)
    if mass_form == "conservative":
        dr = rhs_mass_conservative(state, phi)
    else:
        dr = rhs_mass(state, phi)
    return RhsBundle(
        dr_dt=dr,
        du_dt_drift=rhs_momentum_drift(state, phi, stress_form),
        dQ_dt=rhs_q_tensor(state, phi, include_diffusion),
        phi=phi,
        norms=(un, qn),
    )


# ---- cancellation identity ---------------------------------------------------

def cancellation_terms(grid, f, Qp, Q, u):
    """The two pairings (f(Theta Q' - Q' Theta), Lap Q) and (f(Q' LapQ - LapQ Q'), G^T)."""
    G = velocity_gradient(grid, u)
    Theta = ta.skew_part(G)
    lapQ = grid.laplacian(Q)
    pair = lambda A, B: float(grid.integrate(f * np.einsum("ij...,ji...->...", A, B)))
    term1 = pair(ta.commutator(Theta, Qp), lapQ)
    term2 = pair(ta.commutator(Qp, lapQ), ta.transpose(G))
    return term1, term2


def cancellation_residual(grid, f, Qp, Q, u):
    """Sum of both pairings; zero up to quadrature rounding."""
    t1, t2 = cancellation_terms(grid, f, Qp, Q, u)
    return t1 + t2


# names used by the public interface
lemma24_terms = cancellation_terms
lemma24_residual = cancellation_residual


# ---- energy quantities ---------------------------------------------------------

def energy_functional(state, s):
    """(sum ||d^a r||^2, sum ||d^a u||^2, sum ||sqrt(D) grad d^a Q||^2), |a| <= s."""
    if s < 0:
        raise InvalidInputError("s must be nonnegative")
    g = state.grid
    D = coeff_D(state.r, state.consts)
    dQ = g.derivatives(state.Q, s)
    grads = np.stack([g.grad(q) for q in dQ])
    eq = float(g.integrate(D * np.sum(grads ** 2, axis=(0, 1, 2, 3))))
    return (g.norm_sq(state.r, s, "multiindex"), g.norm_sq(state.u, s, "multiindex"), eq)


def dissipation(state, s, phi):
    """(Phi int D(ups|grad d^a u|^2 + (ups+lam)|div d^a u|^2), Gamma L ||sqrt(D) Lap d^a Q||^2)."""
    g = state.grid
    c = state.consts
    D = coeff_D(state.r, c)
    du = g.derivatives(state.u, s)
    grad_du = np.stack([g.grad(x) for x in du])
    div_du = np.stack([g.div(x) for x in du])
    du_term = c.upsilon * np.sum(grad_du ** 2, axis=(0, 1, 2)) + (c.upsilon + c.lam) * np.sum(div_du ** 2, axis=0)
    lap_dq = g.laplacian(g.derivatives(state.Q, s))
    dq_term = np.sum(lap_dq ** 2, axis=(0, 1, 2))
    return (phi * float(g.integrate(D * du_term)),
            c.Gamma * c.L * float(g.integrate(D * dq_term)))


def martingale_increment(state, noise_field, s, phi):
    """Phi sum_{|a|<=s} int d^a(F dW) . d^a u dx for a realized forcing."""
    g = state.grid
    w = g.multiindex_weight(s)
    a = g.fft(noise_field)
    b = g.fft(state.u)
    return phi * float(g.volume * np.sum(w * (a * np.conj(b)).real))
