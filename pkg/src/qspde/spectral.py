"""Fourier representation of periodic fields on the cube (-pi, pi)^d.

Normalization
-------------
Collocation points are ``x_j = -pi + 2 pi j / N`` on every axis and the
Fourier coefficients are

    u_hat(k) = (2 pi)^-d  int_T u(x) exp(-i k.x) dx,

so a constant field ``c`` has ``u_hat(0) = c`` and ``cos(x_1)`` has
coefficients ``1/2`` at ``k = +-e_1``.  With this choice

    ||u||_{s,2}^2 = (2 pi)^d  sum_k (1 + |k|^2)^s |u_hat(k)|^2

and ``s = 0`` reproduces the integral L2 norm on the cube.

Two layers live here.  :class:`TorusGrid` carries array-level helpers
(``fft``, ``grad``, ``filter``...) that act on plain numpy arrays whose
trailing axes are spatial; the solver uses these directly.
:class:`SpectralField` is the immutable public value type built on top.
"""
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
import math
import struct

import numpy as np

from .errors import InvalidInputError

TWO_PI = 2.0 * np.pi


def multi_indices(dim, order):
    """All multi-indices alpha in N^dim with |alpha| <= order, graded."""
    out = []
    for total in range(order + 1):
        for alpha in product(range(total + 1), repeat=dim):
            if sum(alpha) == total:
                out.append(alpha)
    return out


@dataclass(frozen=True)
class TorusGrid:
    """Collocation grid with ``N`` points per axis in ``dim`` dimensions."""

    dim: int
    N: int
    dealias: float = 2.0 / 3.0

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise InvalidInputError(f"dim must be 2 or 3, got {self.dim}")
        if self.N < 4 or self.N % 2:
            raise InvalidInputError(f"N must be an even integer >= 4, got {self.N}")
        if not 0.0 < self.dealias <= 1.0:
            raise InvalidInputError(f"dealias fraction must lie in (0, 1], got {self.dealias}")

    @property
    def shape(self):
        return (self.N,) * self.dim

    @property
    def axes(self):
        return tuple(range(-self.dim, 0))

    @property
    def volume(self):
        return TWO_PI ** self.dim

    @property
    def cell_volume(self):
        return (TWO_PI / self.N) ** self.dim

    @cached_property
    def points(self):
        x = -np.pi + TWO_PI * np.arange(self.N) / self.N
        return np.array(np.meshgrid(*([x] * self.dim), indexing="ij"))

    @cached_property
    def k(self):
        """Integer wavenumbers, shape ``(dim, *shape)``."""
        k1 = np.fft.fftfreq(self.N, 1.0 / self.N)
        return np.array(np.meshgrid(*([k1] * self.dim), indexing="ij"))

    @cached_property
    def ksq(self):
        return np.sum(self.k ** 2, axis=0)

    @cached_property
    def ik(self):
        """Spectral first-derivative multipliers with the Nyquist mode zeroed."""
        kk = self.k.copy()
        kk[kk == -self.N // 2] = 0.0
        return 1j * kk

    @cached_property
    def phase(self):
        """exp(-i k x_0) for x_0 = -pi, i.e. (-1)^(k_1 + ... + k_d)."""
        return np.where(np.sum(self.k, axis=0) % 2 == 0, 1.0, -1.0)

    @property
    def dealias_cut(self):
        return int(math.floor(self.dealias * self.N / 2 + 1e-12))

    @cached_property
    def dealias_mask(self):
        return self.mode_mask(self.dealias_cut)

    def mode_mask(self, m):
        """Boolean mask of modes with |k|_inf <= m (symmetric under k -> -k)."""
        mask = np.all(np.abs(self.k) <= m, axis=0)
        if m >= self.N // 2:
            # the Nyquist row has no partner -k on the grid
            mask &= np.all(self.k != -self.N // 2, axis=0)
        return mask

    # ---- array-level transforms (trailing axes spatial) -------------------

    def check(self, values):
        values = np.asarray(values)
        if values.shape[values.ndim - self.dim:] != self.shape:
            raise InvalidInputError(
                f"array of shape {values.shape} does not end with grid shape {self.shape}")
        return values

    def fft(self, values):
        """Coefficients scaled by 1/N^d, without the x_0 phase."""
        return np.fft.fftn(values, axes=self.axes) / self.N ** self.dim

    def ifft(self, coeffs):
        return np.fft.ifftn(coeffs * self.N ** self.dim, axes=self.axes).real

    def filter(self, values, mask=None):
        mask = self.dealias_mask if mask is None else mask
        return self.ifft(self.fft(values) * mask)

    def deriv(self, values, axis, order=1):
        return self.ifft(self.fft(values) * self.ik[axis] ** order)

    def grad(self, values):
        """Stack of partial derivatives, shape ``(dim, *values.shape)``."""
        hat = self.fft(values)
        return self.ifft(np.stack([hat * self.ik[a] for a in range(self.dim)]))

    def div(self, vec):
        """sum_i d_i vec[i] for a leading axis of length dim."""
        hat = self.fft(vec)
        return self.ifft(sum(hat[a] * self.ik[a] for a in range(self.dim)))

    def laplacian(self, values):
        return self.ifft(-self.fft(values) * self.ksq)

    def multiplier(self, alpha):
        """Symbol of d^alpha, built from integer products so it is exact."""
        real = np.ones(self.shape)
        for a, p in enumerate(alpha):
            if p:
                real = real * self.ik[a].imag ** p
        return real * (1j ** (sum(alpha) % 4))

    def derivatives(self, values, order):
        """All d^alpha values for |alpha| <= order, stacked on a new axis 0."""
        hat = self.fft(values)
        mults = np.stack([self.multiplier(al) for al in multi_indices(self.dim, order)])
        mults = mults.reshape(mults.shape[:1] + (1,) * (hat.ndim - self.dim) + self.shape)
        return self.ifft(mults * hat[None])

    def integrate(self, values):
        return np.sum(values, axis=self.axes) * self.cell_volume

    def multiindex_weight(self, s):
        """sum_{|alpha| <= s} prod_i k_i^(2 alpha_i) on the wavenumber grid."""
        w = np.zeros(self.shape)
        for alpha in multi_indices(self.dim, s):
            term = np.ones(self.shape)
            for a, p in enumerate(alpha):
                term = term * self.k[a] ** (2 * p)
            w += term
        return w

    def norm_sq(self, values, s=0, weight="fourier"):
        """Squared W^{s,2} norm of a (possibly multi-component) real array.

        ``weight="fourier"`` uses (1 + |k|^2)^s; ``weight="multiindex"`` uses
        sum_{|alpha|<=s} ||d^alpha u||^2.  Components are summed.
        """
        hat = self.fft(values)
        w = (1.0 + self.ksq) ** s if weight == "fourier" else self.multiindex_weight(s)
        return float(self.volume * np.sum(w * np.abs(hat) ** 2))

    def sup_norm(self, values, order):
        """max_x sum_{|alpha|<=order} sum_components |d^alpha u(x)|."""
        if order == 0:
            pointwise = np.abs(values)
        else:
            pointwise = np.abs(self.derivatives(values, order)).sum(axis=0)
        extra = pointwise.ndim - self.dim
        if extra:
            pointwise = pointwise.sum(axis=tuple(range(extra)))
        return float(pointwise.max())

    # ---- Galerkin real basis ----------------------------------------------

    def _real_basis(self, m):
        key = ("_real_basis", m)
        cache = self.__dict__.setdefault("_basis_cache", {})
        if key in cache:
            return cache[key]
        k = self.k.reshape(self.dim, -1).T.astype(int)
        mask = self.mode_mask(m).reshape(-1)
        reps = []
        zero = None
        for idx in np.flatnonzero(mask):
            kv = k[idx]
            nz = kv[kv != 0]
            if nz.size == 0:
                zero = idx
            elif nz[0] > 0:
                reps.append(idx)
        reps = np.array(reps, dtype=int)
        neg = []
        for idx in reps:
            kv = -k[idx] % self.N
            neg.append(int(np.ravel_multi_index(tuple(kv), self.shape)))
        ksq = np.sum(k[reps] ** 2, axis=1)
        scale_pair = np.sqrt((1.0 + ksq) * self.volume / 2.0)
        out = (zero, reps, np.array(neg, dtype=int), scale_pair)
        cache[key] = out
        return out

    def real_coefficients(self, values, m):
        """Coordinates in the H1-orthonormal real Fourier basis |k|_inf <= m.

        Per component the order is [constant, (cos, sin) for each mode in the
        half space].  Sum of squares equals the H1 (s=1) norm of the retained
        part.  Returns shape ``(*leading, (2m+1)^dim)``.
        """
        zero, reps, _, scale = self._real_basis(m)
        hat = (self.fft(values) * self.phase).reshape(values.shape[: values.ndim - self.dim] + (-1,))
        c0 = hat[..., zero].real * np.sqrt(self.volume)
        h = hat[..., reps]
        cos = 2.0 * h.real * scale
        sin = -2.0 * h.imag * scale
        pairs = np.stack([cos, sin], axis=-1).reshape(h.shape[:-1] + (-1,))
        return np.concatenate([c0[..., None], pairs], axis=-1)

    def from_real_coefficients(self, coeffs, m):
        zero, reps, neg, scale = self._real_basis(m)
        coeffs = np.asarray(coeffs, dtype=float)
        lead = coeffs.shape[:-1]
        hat = np.zeros(lead + (self.N ** self.dim,), dtype=complex)
        hat[..., zero] = coeffs[..., 0] / np.sqrt(self.volume)
        pairs = coeffs[..., 1:].reshape(lead + (-1, 2))
        a = pairs[..., 0] / scale
        b = pairs[..., 1] / scale
        hat[..., reps] = 0.5 * (a - 1j * b)
        hat[..., neg] = 0.5 * (a + 1j * b)
        hat = hat.reshape(lead + self.shape) * self.phase
        return self.ifft(hat)


@dataclass(frozen=True)
class GalerkinLevel:
    """Retained set X_n: Fourier modes with |k|_inf <= m, per component."""

    m: int

    def __post_init__(self):
        if self.m < 0:
            raise InvalidInputError("Galerkin cut must be nonnegative")

    def n(self, dim, components):
        return components * (2 * self.m + 1) ** dim

    def mask(self, grid):
        return grid.mode_mask(self.m)


@dataclass(frozen=True)
class SpectralField:
    """Real field stored as Fourier coefficients, shape ``(C, *grid.shape)``."""

    grid: TorusGrid
    coeffs: np.ndarray = field(repr=False)
    # derivatives are tracked as a multi-index on untouched base coefficients
    # so that mixed partials commute bitwise
    base: np.ndarray = field(default=None, repr=False, compare=False)
    alpha: tuple = field(default=None, compare=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim == self.grid.dim:
            c = c[None]
        if c.shape[1:] != self.grid.shape:
            raise InvalidInputError(f"coefficient shape {c.shape} does not match grid {self.grid.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        if self.base is None:
            object.__setattr__(self, "base", c)
            object.__setattr__(self, "alpha", (0,) * self.grid.dim)

    @property
    def components(self):
        return self.coeffs.shape[0]

    def values(self):
        return inverse_transform(self)


def transform(values, grid):
    """Collocation values (``(*shape)`` or ``(C, *shape)``) to a SpectralField."""
    values = np.asarray(values, dtype=float)
    if values.shape[values.ndim - grid.dim:] != grid.shape or values.ndim not in (grid.dim, grid.dim + 1):
        raise InvalidInputError(f"values of shape {values.shape} do not match grid {grid.shape}")
    if not np.all(np.isfinite(values)):
        raise InvalidInputError("non-finite collocation values")
    return SpectralField(grid, grid.fft(values) * grid.phase)


def inverse_transform(f, check_reality=False):
    """Collocation values of shape ``(C, *shape)``."""
    g = f.grid
    full = np.fft.ifftn(f.coeffs * g.phase * g.N ** g.dim, axes=g.axes)
    if check_reality:
        return full.real, float(np.abs(full.imag).max() / max(np.abs(full.real).max(), 1e-300))
    return full.real


def derivative(f, axis, order=1):
    """Multiply every coefficient by (i k_axis)^order."""
    if not 0 <= axis < f.grid.dim:
        raise InvalidInputError(f"axis {axis} out of range")
    alpha = tuple(a + (order if i == axis else 0) for i, a in enumerate(f.alpha))
    # the multiplier is a product of small integers and powers of i, hence exact
    return SpectralField(f.grid, f.base * f.grid.multiplier(alpha), f.base, alpha)


def sobolev_norm_sq(f, s):
    """(2 pi)^d sum_k (1 + |k|^2)^s |u_hat(k)|^2, summed over components."""
    if s < 0:
        raise InvalidInputError("s must be nonnegative")
    return float(f.grid.volume * np.sum((1.0 + f.grid.ksq) ** s * np.abs(f.coeffs) ** 2))


def sobolev_norm(f, s):
    return math.sqrt(sobolev_norm_sq(f, s))


def l2_inner(f, g):
    """Integral L2 inner product sum_c int f_c g_c dx via Parseval."""
    _same_grid(f, g)
    return float(f.grid.volume * np.sum(f.coeffs * np.conj(g.coeffs)).real)


def sup_norm_W_k_inf(f, k):
    """max over collocation points of sum_{|alpha|<=k} sum_c |d^alpha f_c|."""
    if not 0 <= k <= 3:
        raise InvalidInputError("k must lie in 0..3")
    return f.grid.sup_norm(inverse_transform(f), k)


def galerkin_project(f, level):
    """Orthogonal projection onto the modes of ``level``."""
    return SpectralField(f.grid, f.coeffs * level.mask(f.grid))


def dealias_multiply(f, g):
    """Pointwise product with modes beyond the dealias cut zeroed."""
    _same_grid(f, g)
    if not (f.components == g.components or 1 in (f.components, g.components)):
        raise InvalidInputError("component counts are not broadcast compatible")
    prod = inverse_transform(f) * inverse_transform(g)
    grid = f.grid
    return SpectralField(grid, grid.fft(prod) * grid.phase * grid.dealias_mask)


def _same_grid(f, g):
    if f.grid != g.grid:
        raise InvalidInputError("fields live on different grids")


# ---- snapshot files ---------------------------------------------------------

MAGIC = b"QSPDE1"
_HEADER = struct.Struct("<6sqqqd")


def save_snapshot(path, values, grid_dim, N, time):
    """Write ``values`` (``(C, N, ..., N)`` float64) in the QSPDE1 format.

    Layout: 6-byte magic, then dim, N, component count as int64 and time as
    float64 (all little-endian), then row-major little-endian float64 data.
    """
    values = np.ascontiguousarray(values, dtype="<f8")
    C = values.shape[0]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, int(grid_dim), int(N), int(C), float(time)))
        fh.write(values.tobytes(order="C"))


def load_snapshot(path):
    """Return ``(header, values)`` where header has dim, N, components, time."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise InvalidInputError(f"{path}: truncated header")
    magic, dim, N, C, time = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise InvalidInputError(f"{path}: bad magic {magic!r}")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    shape = (C,) + (N,) * dim
    if data.size != int(np.prod(shape)):
        raise InvalidInputError(f"{path}: payload size {data.size} does not match header {shape}")
    header = {"dim": dim, "N": N, "components": C, "time": time}
    return header, data.reshape(shape).astype(float)
