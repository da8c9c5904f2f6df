"""Named initial-condition recipes and random band-limited fields.

Every recipe returns a :class:`~qspde.dynamics.SymmetricState`; the
density is given in physical form and symmetrized on the way in.  Random
fields are drawn from a Philox stream keyed by the seed, so a recipe is a
pure function of its arguments.
"""
import numpy as np

from . import dynamics as dyn
from . import tensor as ta
from .errors import InvalidInputError

# fixed traceless symmetric directions used by the deterministic recipes
_Q_DIR = np.array([[1.0, 0.5, 0.0], [0.5, -1.0, 0.0], [0.0, 0.0, 0.0]]) / np.sqrt(2.5)


def rng_for(seed, stream=0):
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream)])
    return np.random.Generator(np.random.Philox(ss))


def random_band_limited(grid, rng, components=(), kmax=4, slope=2.0):
    """Real field with Gaussian Fourier coefficients on |k|_inf <= kmax.

    Amplitudes decay like (1 + |k|^2)^(-slope/2); the zero mode is kept.
    ``components`` is the leading shape (``()`` for a scalar field).
    """
    if not 0 <= kmax < grid.N // 2:
        raise InvalidInputError(f"kmax must lie in [0, N/2), got {kmax}")
    shape = tuple(components) + grid.shape
    hat = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    hat = hat * grid.mode_mask(kmax) * (1.0 + grid.ksq) ** (-slope / 2.0)
    # the real part of the inverse transform keeps the band and symmetrizes k, -k
    return grid.ifft(hat)


def random_qtensor(grid, rng, kmax=4, slope=2.0):
    """Band-limited field with values in S_0^3."""
    M = random_band_limited(grid, rng, (3, 3), kmax, slope)
    return ta.project_S03(M)


def _state(grid, consts, rho, u, Q, t=0.0):
    return dyn.SymmetricState(grid, dyn.symmetrize_density(rho, consts), u, Q, consts, t)


def uniform(grid, consts, rho0=1.0, velocity=None, q0=None):
    """Constant density, constant velocity and constant Q (zero by default)."""
    rho = np.full(grid.shape, float(rho0))
    u = np.zeros((grid.dim,) + grid.shape)
    if velocity is not None:
        u += np.asarray(velocity, dtype=float).reshape((grid.dim,) + (1,) * grid.dim)
    Q = np.zeros((3, 3) + grid.shape)
    if q0 is not None:
        Q += ta.project_S03(np.asarray(q0, dtype=float)).reshape((3, 3) + (1,) * grid.dim)
    return _state(grid, consts, rho, u, Q)


def single_mode(grid, consts, k=(1, 0), q_amp=0.1, u_amp=0.0, rho_amp=0.0, rho0=1.0):
    """cos(k.x) perturbations of a uniform state along fixed directions.

    Q = q_amp cos(k.x) E with a unit traceless symmetric E; the velocity is
    u_amp sin(k.x) along the first axis and the density rho0 (1 + rho_amp cos(k.x)).
    """
    k = tuple(int(x) for x in k)
    if len(k) != grid.dim:
        raise InvalidInputError(f"wavevector {k} does not match dim {grid.dim}")
    arg = sum(k[a] * grid.points[a] for a in range(grid.dim))
    rho = rho0 * (1.0 + rho_amp * np.cos(arg))
    u = np.zeros((grid.dim,) + grid.shape)
    u[0] = u_amp * np.sin(arg)
    Q = q_amp * _Q_DIR.reshape(3, 3, *([1] * grid.dim)) * np.cos(arg)
    return _state(grid, consts, rho, u, Q)


def random_state(grid, consts, seed, kmax=4, u_amp=0.1, q_amp=0.1, rho_amp=0.1, slope=3.0):
    """Smooth random state; each field is rescaled to the given sup amplitude."""
    rng = rng_for(seed, 1)

    def scaled(f, amp):
        m = np.abs(f).max()
        return f * (amp / m) if m > 0 else f

    rho = 1.0 + scaled(random_band_limited(grid, rng, (), kmax, slope), rho_amp)
    u = scaled(random_band_limited(grid, rng, (grid.dim,), kmax, slope), u_amp)
    Q = scaled(random_qtensor(grid, rng, kmax, slope), q_amp)
    return _state(grid, consts, rho, u, Q)


def uniaxial_q(grid, consts, S=0.3, tilt=0.5, rho0=1.0):
    """Q = S (n n^T - I/3) with an in-plane director rotated by tilt*sin(x_1)."""
    theta = tilt * np.sin(grid.points[0])
    n = np.stack([np.cos(theta), np.sin(theta), np.zeros_like(theta)])
    Q = S * (np.einsum("i...,j...->ij...", n, n) - np.eye(3).reshape(3, 3, *([1] * grid.dim)) / 3.0)
    rho = np.full(grid.shape, float(rho0))
    u = np.zeros((grid.dim,) + grid.shape)
    return _state(grid, consts, rho, u, Q)


GENERATORS = {
    "uniform": uniform,
    "single-mode": single_mode,
    "random-band-limited": random_state,
    "uniaxial-Q": uniaxial_q,
}


def make_initial(name, grid, consts, **params):
    if name not in GENERATORS:
        raise InvalidInputError(f"unknown initial-condition generator {name!r}; known: {sorted(GENERATORS)}")
    return GENERATORS[name](grid, consts, **params)
