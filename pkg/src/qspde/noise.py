"""Truncated cylindrical Wiener process and the multiplicative coefficient.

The noise space is truncated to ``modes`` directions e_1..e_K.  The default
coefficient acts on the momentum equation as

    F(r, u) e_k = alpha_k g_k(x) u(x),     alpha_k = sigma / k^beta,

with g_1 = 1 and g_2, g_3, ... the cos/sin profiles of the lowest Fourier
modes.  It is linear in u, independent of r, and satisfies the growth and
Lipschitz bounds with constants set by max |g_k| and its derivatives.

Wiener increments are generated level by level with a Brownian bridge so
that a path refined by a factor 2 sums back exactly to the coarse path.
Each (seed, mode, level) triple owns an independent Philox stream, which
makes increments independent of evaluation order and of ``modes``.
"""
from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np

from .errors import InvalidInputError

NOISE_KINDS = ("off", "diagonal-multiplicative", "custom-table")


def _stream(seed, mode, level, size):
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(mode), int(level)])
    return np.random.Generator(np.random.Philox(ss)).standard_normal(size)


@dataclass(frozen=True)
class WienerPath:
    """Increments of ``modes`` independent Brownian motions.

    ``base_dt`` and ``base_steps`` define level 0; level ``l`` has step
    ``base_dt / 2**l`` and ``base_steps * 2**l`` steps over the same horizon.
    """

    seed: int
    modes: int
    base_dt: float
    base_steps: int
    level: int = 0

    def __post_init__(self):
        if self.modes < 0 or self.base_steps < 0 or self.level < 0:
            raise InvalidInputError("modes, steps and level must be nonnegative")
        if not self.base_dt > 0:
            raise InvalidInputError("dt must be positive")

    @classmethod
    def for_horizon(cls, seed, modes, dt, T, level=0):
        steps = int(round(T / dt))
        if abs(steps * dt - T) > 1e-9 * max(T, 1.0):
            raise InvalidInputError(f"horizon {T} is not a multiple of dt {dt}")
        return cls(seed, modes, dt, steps, level)

    @property
    def dt(self):
        return self.base_dt / 2 ** self.level

    @property
    def n_steps(self):
        return self.base_steps * 2 ** self.level

    def refine(self, times=1):
        return WienerPath(self.seed, self.modes, self.base_dt, self.base_steps, self.level + times)

    @cached_property
    def increments(self):
        """Array ``(n_steps, modes)`` of N(0, dt) increments."""
        out = np.empty((self.n_steps, self.modes))
        for k in range(self.modes):
            w = math.sqrt(self.base_dt) * _stream(self.seed, k, 0, self.base_steps)
            h = self.base_dt
            for lev in range(1, self.level + 1):
                xi = _stream(self.seed, k, lev, w.size)
                child = np.empty(2 * w.size)
                child[0::2] = 0.5 * w + 0.5 * math.sqrt(h) * xi
                child[1::2] = 0.5 * w - 0.5 * math.sqrt(h) * xi
                w = child
                h = h / 2
            out[:, k] = w
        out.setflags(write=False)
        return out

    def sample_increments(self, step):
        if not 0 <= step < self.n_steps:
            raise InvalidInputError(f"step {step} outside 0..{self.n_steps - 1}")
        return self.increments[step].copy()

    def block(self, start, count):
        if start < 0 or start + count > self.n_steps:
            raise InvalidInputError("increment block outside the horizon")
        return self.increments[start:start + count].copy()


def profile_wavevectors(dim, count):
    """Half-space wavevectors ordered by |k|_inf, then |k|^2, then lexicographically."""
    out = []
    m = 1
    while len(out) < count:
        rng = range(-m, m + 1)
        shell = []
        for kv in np.array(np.meshgrid(*([rng] * dim), indexing="ij")).reshape(dim, -1).T:
            if np.max(np.abs(kv)) != m:
                continue
            nz = kv[kv != 0]
            if nz[0] > 0:
                shell.append(tuple(int(x) for x in kv))
        shell.sort(key=lambda kv: (sum(x * x for x in kv), tuple(-x for x in kv)))
        out.extend(shell)
        m += 1
    return out[:count]


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "diagonal-multiplicative"
    sigma: float = 0.0
    modes: int = 16
    beta: float = 1.0
    table: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise InvalidInputError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0:
            raise InvalidInputError("sigma must be nonnegative")
        if self.beta <= 0.5:
            raise InvalidInputError("beta must exceed 1/2 for square-summable amplitudes")
        if self.kind == "custom-table":
            if any(a < 0 for a in self.table):
                raise InvalidInputError("table amplitudes must be nonnegative")
            object.__setattr__(self, "modes", len(self.table))

    @property
    def off(self):
        return self.kind == "off" or self.modes == 0

    @property
    def amplitudes(self):
        if self.kind == "custom-table":
            return np.array(self.table, dtype=float)
        k = np.arange(1, self.modes + 1, dtype=float)
        return self.sigma / k ** self.beta

    def profiles(self, grid):
        """g_k on the collocation grid, shape ``(modes, *grid.shape)``."""
        cache = grid.__dict__.setdefault("_noise_profiles", {})
        if self.modes in cache:
            return cache[self.modes]
        g = np.empty((self.modes,) + grid.shape)
        if self.modes:
            g[0] = 1.0
        waves = profile_wavevectors(grid.dim, self.modes)
        x = grid.points
        j = 1
        for kv in waves:
            arg = sum(kv[a] * x[a] for a in range(grid.dim))
            for fn in (np.cos, np.sin):
                if j < self.modes:
                    g[j] = fn(arg)
                    j += 1
        g.setflags(write=False)
        cache[self.modes] = g
        return g

    def weight_field(self, grid, dW):
        """sum_k alpha_k g_k(x) dW_k."""
        dW = np.asarray(dW, dtype=float)
        if dW.shape != (self.modes,):
            raise InvalidInputError(f"expected {self.modes} increments, got shape {dW.shape}")
        return np.tensordot(self.amplitudes * dW, self.profiles(grid), axes=1)


def apply_noise(model, state, dW):
    """Stochastic forcing F(r, u) dW of the momentum equation (Phi excluded)."""
    if model.off:
        return np.zeros_like(state.u)
    return state.u * model.weight_field(state.grid, dW)[None]


def hs_norm_sq(model, state, s):
    """sum_k ||F(r, u) e_k||_{s,2}^2 over the retained noise directions."""
    if model.off:
        return 0.0
    grid = state.grid
    amps = model.amplitudes
    g = model.profiles(grid)
    return float(sum(grid.norm_sq(a * g[k][None] * state.u, s) for k, a in enumerate(amps) if a))


def growth_ratio(model, state, s):
    """||F||_HS^2 / ((||r||_{1,inf}^2 + ||u||_{2,inf}^2) ||r, u||_{s,2}^2)."""
    grid = state.grid
    denom = (grid.sup_norm(state.r, 1) ** 2 + grid.sup_norm(state.u, 2) ** 2) * (
        grid.norm_sq(state.r, s) + grid.norm_sq(state.u, s))
    return hs_norm_sq(model, state, s) / denom


def lipschitz_ratio(model, state1, state2, s):
    """||F(u1) - F(u2)||_HS^2 / ||u1 - u2||_{s,2}^2 (default model is r-free)."""
    grid = state1.grid
    diff = state1.u - state2.u
    num = sum(grid.norm_sq(a * model.profiles(grid)[k][None] * diff, s)
              for k, a in enumerate(model.amplitudes) if a)
    den = grid.norm_sq(diff, s)
    return float(num / den) if den > 0 else 0.0
