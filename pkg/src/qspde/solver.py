"""Euler-Maruyama integration of the cut-off symmetric system.

One step evaluates every drift at the current state (left point, as the
Ito integral requires), adds Phi F dW to the momentum update and projects
the velocity onto the Galerkin space X_n.  Optionally, Gamma L Lap(Q)
and the Lame operator are integrated exactly with an integrating factor.

``fixed_point_drift`` reproduces the same update as the fixed point of a
Picard map over a window of steps: given a candidate velocity path w, the
density and Q paths are advanced with w, and a new velocity path is
accumulated from the drifts and noise evaluated at (the clamped) w.  The
map is triangular in time, so on a window of W steps it becomes exact
after W applications; the measured successive-difference ratios give an
empirical contraction factor.
"""
from dataclasses import dataclass, field, replace
import logging
import math

import numpy as np

from . import dynamics as dyn
from .errors import ConfigError, DomainError, InvalidInputError, StepRejected
from .noise import NoiseModel, apply_noise
from .spectral import GalerkinLevel, TorusGrid
from .tensor import MaterialConstants
from .truncation import ClampProfile, CutoffProfile, clamp_coefficients, driving_norms

log = logging.getLogger(__name__)

LEDGER_COLUMNS = (
    "step", "t", "phi", "u_2inf", "q_3inf", "min_r", "max_r", "mass",
    "energy_r", "energy_u", "energy_q", "q_norm_sp1", "dissipation_u", "dissipation_q",
    "martingale", "trace_residual", "symmetry_residual", "q_scale", "fp_iters",
)


@dataclass(frozen=True)
class FixedPointConfig:
    window: int = 1
    max_iters: int = 1
    tol: float = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    """Everything that determines a trajectory besides the initial state and the path."""

    grid: TorusGrid = TorusGrid(2, 32)
    consts: MaterialConstants = MaterialConstants()
    dt: float = 1e-3
    T: float = 0.1
    galerkin_m: int = None
    fixed_point: FixedPointConfig = FixedPointConfig()
    cutoff_R: float = 100.0
    clamp_K: float = math.inf
    noise: NoiseModel = NoiseModel(kind="off")
    stop_max_level: int = 20
    density_floor: float = 1e-8
    q_diffusion: str = "explicit"
    velocity_diffusion: str = "explicit"
    mass_form: str = "symmetric"
    stress_form: str = "display"
    save_every: int = 0
    ledger_s: int = 1

    def __post_init__(self):
        if not self.dt > 0 or not self.T >= 0:
            raise ConfigError("dt must be positive and T nonnegative")
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(steps, 1.0):
            raise ConfigError(f"horizon {self.T} is not a multiple of dt {self.dt}")
        if self.galerkin_m is None:
            object.__setattr__(self, "galerkin_m", self.grid.dealias_cut)
        if not 0 <= self.galerkin_m < self.grid.N // 2:
            raise ConfigError("Galerkin cut must lie in [0, N/2)")
        for name, val, allowed in (
            ("q_diffusion", self.q_diffusion, ("explicit", "integrating-factor")),
            ("velocity_diffusion", self.velocity_diffusion, ("explicit", "integrating-factor")),
            ("mass_form", self.mass_form, ("symmetric", "conservative")),
            ("stress_form", self.stress_form, dyn.STRESS_FORMS),
        ):
            if val not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}, got {val!r}")
        fp = self.fixed_point
        if fp.window < 1 or fp.max_iters < 1 or not fp.tol >= 0:
            raise ConfigError("fixed point window/max_iters must be >= 1 and tol >= 0")
        if self.stop_max_level < 1 or not self.density_floor > 0:
            raise ConfigError("stop levels must be >= 1 and density floor positive")
        try:
            CutoffProfile(self.cutoff_R)
            ClampProfile(self.clamp_K)
        except InvalidInputError as exc:
            raise ConfigError(str(exc)) from exc
        if self.q_diffusion == "explicit":
            c = self.consts
            kmax_sq = self.grid.dim * self.grid.dealias_cut ** 2
            if self.dt * c.Gamma * c.L * kmax_sq > 2.0:
                raise ConfigError(
                    f"explicit Q diffusion unstable: dt*Gamma*L*kmax^2 = "
                    f"{self.dt * c.Gamma * c.L * kmax_sq:.3g} > 2; reduce dt or use integrating-factor")

    @property
    def n_steps(self):
        return int(round(self.T / self.dt))

    @property
    def levels(self):
        return [2.0 ** n for n in range(1, self.stop_max_level + 1)]

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass
class StopInfo:
    stopped: bool = False
    stop_time: float = None
    criterion: str = None
    value: float = None
    level: float = None
    message: str = ""


@dataclass(frozen=True)
class StopDecision:
    fired: bool
    criterion: str = None
    value: float = None
    level: float = None


@dataclass
class Trajectory:
    times: list
    ledger: list
    snapshots: list
    stop_info: StopInfo
    final: dyn.SymmetricState
    tau: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def column(self, name):
        return np.array([row[name] for row in self.ledger], dtype=float)


def detect_stop(state, level, norms=None):
    """Check one rung of the blow-up ladder.

    Fires when ||u||_{2,inf} >= level, ||Q||_{3,inf} >= level or
    min r <= 1/level, reporting the first criterion met in that order.
    """
    if norms is None:
        norms = driving_norms(state.grid, state.u, state.Q)
    un, qn = norms
    if un >= level:
        return StopDecision(True, "u", un, level)
    if qn >= level:
        return StopDecision(True, "Q", qn, level)
    rmin = float(state.r.min())
    if rmin <= 1.0 / level:
        return StopDecision(True, "density floor", rmin, level)
    return StopDecision(False, level=level)


@dataclass
class FixedPointResult:
    states: list
    iterations: int
    diffs: list
    converged: bool
    max_clamped_coeff: float
    infos: list

    @property
    def ratios(self):
        d = self.diffs
        return [d[i + 1] / d[i] for i in range(len(d) - 1) if d[i] > 0]


class Integrator:
    """Stepping machinery bound to one :class:`SolverConfig`."""

    def __init__(self, config):
        self.config = config
        self.grid = config.grid
        self.profile = CutoffProfile(config.cutoff_R)
        self.clamp = ClampProfile(config.clamp_K)
        self.level = GalerkinLevel(config.galerkin_m)
        self.pmask = self.level.mask(self.grid)
        c = config.consts
        g = self.grid
        self.q_factor = np.exp(-c.Gamma * c.L * g.ksq * config.dt) * g.dealias_mask
        ksq = np.where(g.ksq == 0, 1.0, g.ksq)
        self.khat = np.where(g.ksq == 0, 0.0, g.k / np.sqrt(ksq))
        self._norm_cache = None

    # ---- helpers -----------------------------------------------------------

    def norms(self, u, Q):
        """Driving norms with a one-entry cache keyed on the (immutable) arrays."""
        hit = self._norm_cache
        if hit is not None and hit[0] is u and hit[1] is Q:
            return hit[2]
        n = driving_norms(self.grid, u, Q)
        self._norm_cache = (u, Q, n)
        return n

    def project(self, u):
        return self.grid.ifft(self.grid.fft(u) * self.pmask)

    def to_galerkin(self, state, tol=1e-13):
        """State with u replaced by P_n u unless u already lies in X_n up to rounding."""
        pu = self.project(state.u)
        scale = max(1.0, float(np.abs(state.u).max()))
        if float(np.abs(pu - state.u).max()) <= tol * scale:
            return state
        return state.with_fields(u=pu)

    def clamp_velocity(self, u):
        if not self.clamp.active:
            return u, 0.0
        m = self.config.galerkin_m
        v = clamp_coefficients(self.grid.real_coefficients(u, m), self.clamp)
        return self.grid.from_real_coefficients(v, m), float(np.abs(v).max())

    def _lame_factor(self, scale):
        """exp(dt * scale * Lame symbol) applied in Fourier space."""
        c = self.config.consts
        g = self.grid
        dt = self.config.dt
        par = np.exp(-(2 * c.upsilon + c.lam) * g.ksq * dt * scale)
        perp = np.exp(-c.upsilon * g.ksq * dt * scale)

        def apply(u):
            hat = g.fft(u)
            kh = self.khat
            long = np.sum(kh * hat, axis=0)
            longv = kh * long[None]
            return g.ifft(perp * (hat - longv) + par * longv)
        return apply

    # ---- one step ------------------------------------------------------------

    def evaluate(self, state, dW):
        """Drifts, noise forcing and Phi at ``state`` (velocity already clamped)."""
        cfg = self.config
        bundle = dyn.assemble_rhs(
            state, self.profile, stress_form=cfg.stress_form,
            include_diffusion=cfg.q_diffusion == "explicit", mass_form=cfg.mass_form,
            norms=self.norms(state.u, state.Q))
        drift = bundle.du_dt_drift
        Dbar = None
        if cfg.velocity_diffusion == "integrating-factor":
            Dbar = float(np.mean(dyn.coeff_D(state.r, state.consts)))
            drift = drift - self.grid.filter(bundle.phi * Dbar * dyn.lame(self.grid, state.u, state.consts))
        if cfg.noise.off or dW is None:
            noise = np.zeros_like(state.u)
        else:
            noise = bundle.phi * apply_noise(cfg.noise, state, dW)
        return bundle, drift, noise, Dbar

    def advance(self, state, eval_state, u_acc, dW):
        """New (r, Q) from ``eval_state`` and new velocity accumulated on ``u_acc``."""
        cfg = self.config
        dt = cfg.dt
        g = self.grid
        bundle, drift, noise, Dbar = self.evaluate(eval_state, dW)
        if cfg.mass_form == "conservative":
            rho_new = state.rho + dt * bundle.dr_dt
            if not np.all(rho_new > cfg.density_floor):
                raise StepRejected("density fell below the floor",
                                   {"t": state.t, "min_rho": float(np.min(rho_new))})
            r_new = dyn.symmetrize_density(rho_new, state.consts)
        else:
            r_new = state.r + dt * bundle.dr_dt
        if cfg.q_diffusion == "integrating-factor":
            Q_new = g.ifft(g.fft(state.Q + dt * bundle.dQ_dt) * self.q_factor)
        else:
            Q_new = state.Q + dt * bundle.dQ_dt
        # u_acc already lies in X_n, so only the increment is projected
        u_new = u_acc + self.project(dt * drift + noise)
        if Dbar is not None and bundle.phi * Dbar != 0.0:
            u_new = self.project(self._lame_factor(bundle.phi * Dbar)(u_new))
        rmin = float(np.min(r_new))
        if not rmin > cfg.density_floor or not (
                np.all(np.isfinite(r_new)) and np.all(np.isfinite(u_new)) and np.all(np.isfinite(Q_new))):
            raise StepRejected("step rejected: density floor or non-finite values",
                               {"t": state.t, "min_r": rmin, "phi": bundle.phi})
        new = dyn.SymmetricState(g, r_new, u_new, Q_new, state.consts, state.t + dt)
        info = {"phi": bundle.phi, "norms": bundle.norms, "noise": noise}
        return new, info

    def step(self, state, dW):
        u_eval, _ = self.clamp_velocity(state.u)
        eval_state = state if u_eval is state.u else state.with_fields(u=u_eval)
        return self.advance(state, eval_state, state.u, dW)

    # ---- Picard window -----------------------------------------------------------

    def _coeffs(self, u):
        return self.grid.real_coefficients(u, self.config.galerkin_m)

    def fixed_point(self, state, dW_block):
        """Iterate the window map until successive velocity paths agree."""
        fp = self.config.fixed_point
        W = len(dW_block)
        w = [state.u] * (W + 1)
        diffs = []
        max_clamped = 0.0
        converged = False
        states = infos = None
        for it in range(1, fp.max_iters + 1):
            cur = state
            new_states = [state]
            new_infos = []
            u_acc = state.u
            for j in range(W):
                u_eval, mc = self.clamp_velocity(w[j])
                max_clamped = max(max_clamped, mc)
                eval_state = cur.with_fields(u=u_eval)
                nxt, info = self.advance(cur, eval_state, u_acc, dW_block[j])
                u_acc = nxt.u
                new_states.append(nxt)
                new_infos.append(info)
                cur = nxt
            new_w = [s.u for s in new_states]
            diff = max(float(np.abs(self._coeffs(a) - self._coeffs(b)).max()) for a, b in zip(new_w, w))
            scale = 1.0 + max(float(np.abs(self._coeffs(a)).max()) for a in new_w)
            diffs.append(diff)
            w = new_w
            states, infos = new_states, new_infos
            # iterate k reproduces steps 1..k exactly: the map is nilpotent on a window
            if diff <= fp.tol * scale or it >= W:
                converged = True
                break
        if not converged and fp.max_iters > 1:
            log.warning("fixed point did not converge in %d iterations (last diff %.3e)", fp.max_iters, diffs[-1])
        return FixedPointResult(states[1:], it, diffs, converged, max_clamped, infos)

    # ---- ledger ------------------------------------------------------------------

    def ledger_row(self, step, state, phi, norms, martingale, fp_iters):
        s = self.config.ledger_s
        er, eu, eq = dyn.energy_functional(state, s)
        dis_u, dis_q = dyn.dissipation(state, s, phi)
        tr, sym, scale = state.structure_residuals()
        return {
            "step": step, "t": state.t, "phi": phi, "u_2inf": norms[0], "q_3inf": norms[1],
            "min_r": float(state.r.min()), "max_r": float(state.r.max()), "mass": dyn.total_mass(state),
            "energy_r": er, "energy_u": eu, "energy_q": eq,
            "q_norm_sp1": state.grid.norm_sq(state.Q, s + 1, "multiindex"),
            "dissipation_u": dis_u, "dissipation_q": dis_q, "martingale": martingale,
            "trace_residual": tr, "symmetry_residual": sym, "q_scale": scale, "fp_iters": fp_iters,
        }

    # ---- orchestration -------------------------------------------------------------

    def run(self, initial, path=None):
        cfg = self.config
        if initial.grid != self.grid:
            raise InvalidInputError("initial state grid differs from the configured grid")
        n = cfg.n_steps
        if not cfg.noise.off:
            if path is None:
                raise InvalidInputError("noise is on but no Wiener path was supplied")
            if path.modes != cfg.noise.modes or abs(path.dt - cfg.dt) > 1e-12 * cfg.dt or path.n_steps < n:
                raise InvalidInputError("Wiener path does not match dt, horizon or noise modes")
        traj = Trajectory(times=[initial.t], ledger=[], snapshots=[(0, initial)], stop_info=StopInfo(),
                          final=initial)
        prof = self.profile
        if initial.grid.sup_norm(initial.r, 1) >= prof.R or initial.r.min() <= 1.0 / prof.R:
            traj.warnings.append("initial density outside ||r0||_{1,inf} < R, r0 > 1/R")
        levels = cfg.levels
        state = self.to_galerkin(initial)
        if state is not initial:
            traj.warnings.append("initial velocity projected onto the Galerkin space")
            traj.snapshots[0] = (0, state)
        step = 0
        pending = None
        while True:
            norms = self.norms(state.u, state.Q)
            self._update_tau(traj, state, norms, levels)
            if traj.stop_info.stopped or step >= n:
                phi = prof(norms[0]) * prof(norms[1])
                traj.ledger.append(self.ledger_row(step, state, phi, norms, 0.0, pending or 0))
                break
            W = min(cfg.fixed_point.window, n - step)
            dWs = [path.sample_increments(step + j) if not cfg.noise.off else None for j in range(W)]
            try:
                if cfg.fixed_point.window == 1 and cfg.fixed_point.max_iters == 1:
                    new, info = self.step(state, dWs[0])
                    block = [(new, info)]
                    iters = 1
                else:
                    res = self.fixed_point(state, dWs)
                    block = list(zip(res.states, res.infos))
                    iters = res.iterations
                    if not res.converged:
                        traj.warnings.append(f"fixed point not converged at t={state.t:.6g}")
            except (StepRejected, DomainError) as exc:
                phi = prof(norms[0]) * prof(norms[1])
                traj.ledger.append(self.ledger_row(step, state, phi, norms, 0.0, 0))
                diag = getattr(exc, "diagnostics", {})
                traj.stop_info = StopInfo(True, state.t, "step-rejected", diag.get("min_r"), None, str(exc))
                break
            prev = state
            for j, (nxt, info) in enumerate(block):
                if j > 0:
                    pnorms = self.norms(prev.u, prev.Q)
                    self._update_tau(traj, prev, pnorms, levels)
                    if traj.stop_info.stopped:
                        break
                mart = dyn.martingale_increment(prev, info["noise"], cfg.ledger_s, 1.0)
                traj.ledger.append(self.ledger_row(step, prev, info["phi"], info["norms"]
                                                   if j == 0 else pnorms, mart, iters))
                step += 1
                traj.times.append(nxt.t)
                if cfg.save_every and step % cfg.save_every == 0:
                    traj.snapshots.append((step, nxt))
                prev = nxt
            state = prev
            traj.final = state
        traj.final = state
        return traj

    def _update_tau(self, traj, state, norms, levels):
        for lev in levels:
            if lev in traj.tau:
                continue
            dec = detect_stop(state, lev, norms)
            if dec.fired:
                traj.tau[lev] = state.t
                if lev == levels[-1]:
                    traj.stop_info = StopInfo(True, state.t, dec.criterion, dec.value, lev,
                                              f"blow-up ladder exhausted at level {lev:g}")


def step(state, dW, config):
    """One Euler-Maruyama step; returns the new state."""
    return Integrator(config).step(state, dW)[0]


def fixed_point_drift(state, dW_block, config):
    """Picard iteration of the window map; see :class:`FixedPointResult`."""
    dW_block = [None] * config.fixed_point.window if dW_block is None else list(dW_block)
    return Integrator(config).fixed_point(state, dW_block)


def run(initial, config, path=None):
    """Integrate from ``initial`` to ``config.T`` or until a stop event."""
    return Integrator(config).run(initial, path)
