"""Numerical audits of the analytic estimates behind the solver.

Each pointwise audit returns a ratio LHS / RHS for one pair of fields.
Constants are "calibrated" as the empirical maximum of that ratio over a
declared random ensemble (see :func:`calibrate`); what is checked is that
the maximum is stable between independent ensembles, not its value.

Trajectory audits (:func:`audit_lower_bound`, :func:`energy_ledger_check`,
:func:`ensemble_moments`) only read ledgers and never modify them.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from . import dynamics as dyn
from .errors import InvalidInputError
from .initial import random_band_limited, rng_for
from .spectral import multi_indices
from .solver import StopInfo, Trajectory

DEGENERATE_TOL = 1e-13


@dataclass(frozen=True)
class EstimateReport:
    estimate: str
    samples: int
    max_ratio: float
    constant: float
    ratios: np.ndarray = field(repr=False, default=None)
    skipped: int = 0


@dataclass(frozen=True)
class EnergyLedger:
    """Per-step remainders of the discrete energy inequality."""

    t: np.ndarray
    energy: np.ndarray
    increment: np.ndarray
    dissipation: np.ndarray
    martingale: np.ndarray
    remainder: np.ndarray
    slack: np.ndarray
    C_hat: float
    violations: int

    @property
    def certified(self):
        """The fitted constant floored at 0, as a bound constant must be."""
        return max(self.C_hat, 0.0)


@dataclass(frozen=True)
class LowerBoundReport:
    rate: float
    c_hat: float
    R: float
    envelope_rate: float
    violations: int
    steps: int


@dataclass(frozen=True)
class MomentEstimate:
    p: float
    mean: float
    stderr: float
    n: int
    values: np.ndarray = field(repr=False, default=None)
    note: str = ("per-path values of an expectation bound; the check is statistical, "
                 "not pathwise")


# ---- norms shared by the estimate audits ------------------------------------

def _hs(grid, f, s):
    return math.sqrt(grid.norm_sq(f, s, "multiindex"))


def _grad_sup(grid, f):
    """max_x |grad f(x)| with components summed in quadrature."""
    g = grid.grad(f)
    return float(np.sqrt(np.sum(g * g, axis=tuple(range(g.ndim - grid.dim)))).max())


def _ratio(lhs, rhs):
    if rhs <= DEGENERATE_TOL:
        if lhs > DEGENERATE_TOL:
            raise InvalidInputError(f"audit failure: RHS vanishes while LHS = {lhs:.3e}")
        return None
    return lhs / rhs


# ---- estimate audits -------------------------------------------------------------

def commutator_lhs(grid, u, v, s):
    """sqrt(sum_{|a|<=s} ||d^a(u.grad v) - u.grad d^a v||^2)."""
    total = []
    adv = dyn.advect(grid, u, v)
    for alpha in multi_indices(grid.dim, s):
        if sum(alpha) == 0:
            continue
        m = grid.multiplier(alpha)
        da_adv = grid.ifft(grid.fft(adv) * m)
        adv_da = dyn.advect(grid, u, grid.ifft(grid.fft(v) * m))
        diff = da_adv - adv_da
        total.append(float(grid.integrate(np.sum(diff * diff, axis=tuple(range(diff.ndim - grid.dim))))))
    return math.sqrt(math.fsum(total))


def audit_commutator(grid, u, v, s):
    """Ratio for the commutator estimate; ``None`` if both sides vanish."""
    if s <= grid.dim / 2 + 1:
        raise InvalidInputError(f"commutator estimate needs s > d/2 + 1, got s={s}")
    lhs = commutator_lhs(grid, u, v, s)
    rhs = _grad_sup(grid, u) * _hs(grid, v, s) + _grad_sup(grid, v) * _hs(grid, u, s)
    return _ratio(lhs, rhs)


def audit_moser(grid, u, v, s):
    """Ratio ||uv||_s / (|u|_inf ||v||_s + |v|_inf ||u||_s); ``None`` if degenerate."""
    lhs = _hs(grid, u * v, s)
    rhs = float(np.abs(u).max()) * _hs(grid, v, s) + float(np.abs(v).max()) * _hs(grid, u, s)
    return _ratio(lhs, rhs)


def audit_composition_D(grid, r1, r2, s, consts, R):
    """(||D(r1)||_s / ||r1||_s, ||D(r1) - D(r2)||_s / (||r1, r2||_s ||r1 - r2||_s)).

    The second entry is ``None`` when r1 = r2.
    """
    for r in (r1, r2):
        if not (np.all(r >= 1.0 / R) and np.all(r <= R)):
            raise InvalidInputError(f"fields must lie in [1/R, R] = [{1.0 / R:g}, {R:g}]")
    D1 = dyn.coeff_D(r1, consts)
    D2 = dyn.coeff_D(r2, consts)
    norm_ratio = _hs(grid, D1, s) / _hs(grid, r1, s)
    pair = math.sqrt(grid.norm_sq(r1, s, "multiindex") + grid.norm_sq(r2, s, "multiindex"))
    diff = _ratio(_hs(grid, D1 - D2, s), pair * _hs(grid, r1 - r2, s))
    return norm_ratio, diff


# ---- calibration protocol ------------------------------------------------------

def ensemble_pair(grid, rng, kind, kmax=None, slope=2.0, R=2.0):
    """One random sample for the named audit.

    Vector pairs for the commutator, scalar pairs for Moser, and densities
    with values in [0.65, 1.85] (inside [1/R, R] for R = 2) for composition.
    Band limit defaults to N/4 so that products are resolved without aliasing.
    """
    kmax = grid.N // 4 if kmax is None else kmax
    if kind == "commutator":
        comp = (grid.dim,)
        return (random_band_limited(grid, rng, comp, kmax, slope),
                random_band_limited(grid, rng, comp, kmax, slope))
    if kind == "moser":
        return (random_band_limited(grid, rng, (), kmax, slope),
                random_band_limited(grid, rng, (), kmax, slope))
    if kind == "composition":
        out = []
        for _ in range(2):
            f = random_band_limited(grid, rng, (), kmax, slope)
            f = f - f.mean()
            out.append(1.25 + 0.6 * f / np.abs(f).max())
        return tuple(out)
    raise InvalidInputError(f"unknown estimate kind {kind!r}")


def sample_ratios(grid, kind, n, seed, s, consts=None, R=2.0, kmax=None, slope=2.0):
    """Ratios of ``n`` samples; composition returns both estimates."""
    rng = rng_for(seed, 7)
    ratios = {"commutator": [], "moser": [], "composition-norm": [], "composition-diff": []}
    skipped = 0
    for _ in range(n):
        a, b = ensemble_pair(grid, rng, kind, kmax, slope, R)
        if kind == "commutator":
            r = audit_commutator(grid, a, b, s)
            key = ["commutator"]
            vals = [r]
        elif kind == "moser":
            vals, key = [audit_moser(grid, a, b, s)], ["moser"]
        else:
            vals = list(audit_composition_D(grid, a, b, s, consts, R))
            key = ["composition-norm", "composition-diff"]
        for k, v in zip(key, vals):
            if v is None:
                skipped += 1
            else:
                ratios[k].append(v)
    return {k: np.array(v) for k, v in ratios.items() if v}, skipped


def calibrate(grid, kind, n, seed, s, consts=None, R=2.0, kmax=None, slope=2.0):
    """Calibrated constants (empirical max ratio) for one ensemble."""
    ratios, skipped = sample_ratios(grid, kind, n, seed, s, consts, R, kmax, slope)
    return {k: EstimateReport(k, len(v), float(v.max()), float(v.max()), v, skipped)
            for k, v in ratios.items()}


def stability(report_a, report_b):
    """|C_a - C_b| / max(C_a, C_b)."""
    ca, cb = report_a.constant, report_b.constant
    return abs(ca - cb) / max(ca, cb)


def violations(report, constant, factor=1.0):
    """Samples of ``report`` whose ratio exceeds factor * constant."""
    return int(np.sum(report.ratios > factor * constant))


# ---- trajectory audits ---------------------------------------------------------

def uniform_compression(r0=1.0, div_u=-1.0, gamma=2.0, T=1.0, dt=1e-3, phi=1.0):
    """Mass equation for a spatially uniform state with prescribed div u.

    A velocity with constant divergence is not periodic, so the uniform
    state is integrated as the pointwise ODE dr/dt = -Phi (gamma-1)/2 r div u
    with explicit Euler.  Returns a ledger-only :class:`Trajectory`.
    """
    n = int(round(T / dt))
    r = np.array([float(r0)])
    zero = np.zeros((1, 1))
    rows = []
    times = []
    for i in range(n + 1):
        t = i * dt
        times.append(t)
        rows.append({"step": i, "t": t, "phi": phi, "min_r": float(r.min()), "max_r": float(r.max())})
        r = r + dt * dyn.mass_pointwise(r, zero, zero, np.array([div_u]), gamma, phi)
    return Trajectory(times=times, ledger=rows, snapshots=[], stop_info=StopInfo(), final=None)


def audit_lower_bound(trajectory, R, envelope_rate=None, tol=1e-12):
    """Smallest rate c R with inf r0 e^{-cRt} <= r(t) <= sup r0 e^{cRt}.

    ``envelope_rate`` is the a-priori rate used to count violations; if it
    is omitted the rate (gamma - 1) R is used by the caller.  A trajectory
    on which r never moves gives rate 0.
    """
    t = trajectory.column("t")
    lo = trajectory.column("min_r")
    hi = trajectory.column("max_r")
    phi = trajectory.column("phi")
    if len(t) < 11 or np.count_nonzero(phi[:-1] > 0) < 10:
        raise InvalidInputError("lower-bound audit needs at least 10 steps with Phi > 0")
    tt = t[1:] - t[0]
    growth = np.maximum(np.log(hi[1:] / hi[0]), np.log(lo[0] / lo[1:]))
    rate = max(0.0, float(np.max(growth / tt)))
    if envelope_rate is None:
        envelope_rate = rate
    bad = (lo[1:] < lo[0] * np.exp(-envelope_rate * tt) * (1 - tol)) | (
        hi[1:] > hi[0] * np.exp(envelope_rate * tt) * (1 + tol))
    return LowerBoundReport(rate, rate / R, R, envelope_rate, int(np.count_nonzero(bad)), len(t) - 1)


def energy_ledger_check(trajectory, dt=None):
    """Fit one C such that, at every step n,

        dE_n + dt (Dis_u + Dis_Q)_n - M_n <= C dt E_n,

    where E is the energy triple and M the realized martingale increment.
    The fitted C is the smallest value that works and may be negative when
    dissipation dominates.  Returns the remainders and the slack
    C dt E_n - remainder_n (>= 0).
    """
    rows = trajectory.ledger
    t = trajectory.column("t")
    if len(rows) < 2:
        z = np.zeros(0)
        return EnergyLedger(t, trajectory.column("energy_r"), z, z, z, z, z, 0.0, 0)
    E = trajectory.column("energy_r") + trajectory.column("energy_u") + trajectory.column("energy_q")
    dis = trajectory.column("dissipation_u") + trajectory.column("dissipation_q")
    mart = trajectory.column("martingale")
    steps = np.diff(t) if dt is None else np.full(len(t) - 1, dt)
    inc = np.diff(E)
    rem = inc + steps * dis[:-1] - mart[:-1]
    base = steps * E[:-1]
    pos = base > 0
    C = float(np.max(rem[pos] / base[pos])) if np.any(pos) else 0.0
    slack = C * base - rem
    viol = int(np.count_nonzero(slack < -1e-12 * np.maximum(np.abs(rem), 1e-300)))
    return EnergyLedger(t, E, inc, dis[:-1], mart[:-1], rem, slack, C, viol)


def path_functional(trajectory, horizon=None):
    """sup_t (||r,u||_s^2 + ||Q||_{s+1}^2) + int_0^t (Dis_u + Dis_Q) dt on one path."""
    t = trajectory.column("t")
    keep = t <= (np.inf if horizon is None else horizon + 1e-12)
    sup_part = trajectory.column("energy_r") + trajectory.column("energy_u") + trajectory.column("q_norm_sp1")
    dis = trajectory.column("dissipation_u") + trajectory.column("dissipation_q")
    tk = t[keep]
    integral = math.fsum(float(d) * float(h) for d, h in zip(dis[keep][:-1], np.diff(tk)))
    return float(np.max(sup_part[keep])) + integral


def ensemble_moments(trajectories, p=1.0, horizon=None):
    """Monte-Carlo estimate of E[X^p] for the path functional X, with standard error."""
    if not trajectories:
        raise InvalidInputError("no trajectories supplied")
    vals = np.array([path_functional(tr, horizon) ** p for tr in trajectories])
    n = len(vals)
    mean = math.fsum(vals) / n
    stderr = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return MomentEstimate(p, mean, stderr, n, vals)
