import numpy as np
import pytest

from qspde import initial
from qspde.errors import InvalidInputError
from qspde.noise import (NoiseModel, WienerPath, apply_noise, growth_ratio, hs_norm_sq,
                         lipschitz_ratio, profile_wavevectors)


def test_path_determinism_and_range():
    p = WienerPath.for_horizon(11, 4, 1e-2, 0.5)
    q = WienerPath.for_horizon(11, 4, 1e-2, 0.5)
    assert np.array_equal(p.sample_increments(7), q.sample_increments(7))
    assert p.n_steps == 50
    for bad in (-1, 50):
        with pytest.raises(InvalidInputError):
            p.sample_increments(bad)
    with pytest.raises(InvalidInputError):
        WienerPath.for_horizon(1, 2, 0.3, 1.0)
    assert not np.array_equal(p.increments, WienerPath.for_horizon(12, 4, 1e-2, 0.5).increments)


def test_path_independent_of_mode_count():
    a = WienerPath(3, 2, 0.1, 10, level=2).increments
    b = WienerPath(3, 5, 0.1, 10, level=2).increments
    assert np.array_equal(a, b[:, :2])


def test_refinement_consistency():
    coarse = WienerPath(5, 3, 0.04, 25)
    fine = coarse.refine()
    finer = fine.refine(2)
    assert fine.dt == 0.02 and fine.n_steps == 50
    np.testing.assert_allclose(fine.increments[0::2] + fine.increments[1::2], coarse.increments,
                               rtol=0, atol=1e-15)
    summed = finer.increments.reshape(-1, 8, 3).sum(axis=1)
    np.testing.assert_allclose(summed, coarse.increments, rtol=0, atol=1e-14)


def test_increment_statistics():
    dt = 1e-3
    n = 100_000
    w = WienerPath(2024, 2, dt, n).increments
    mean = w.mean(axis=0)
    var = w.var(axis=0)
    assert np.all(np.abs(mean) <= 4 * np.sqrt(dt / n))
    assert np.all(np.abs(var / dt - 1) <= 0.05)
    # bridge levels keep the variance
    fine = WienerPath(2024, 1, dt, 50_000, level=1).increments
    assert abs(fine.var() / (dt / 2) - 1) < 0.05


def test_noise_model_validation():
    with pytest.raises(InvalidInputError):
        NoiseModel(kind="additive")
    with pytest.raises(InvalidInputError):
        NoiseModel(sigma=-1)
    with pytest.raises(InvalidInputError):
        NoiseModel(beta=0.5)
    with pytest.raises(InvalidInputError):
        NoiseModel(kind="custom-table", table=(1.0, -0.1))
    m = NoiseModel(kind="custom-table", table=(1.0, 0.5))
    assert m.modes == 2 and np.array_equal(m.amplitudes, [1.0, 0.5])


def test_amplitudes_and_tail():
    m = NoiseModel(sigma=2.0, modes=4)
    assert np.allclose(m.amplitudes, [2.0, 1.0, 2 / 3, 0.5])
    # sigma/k: the tail beyond 16 modes is below 4% of the infinite sum
    k = np.arange(1, 200_001)
    total = np.sum(1 / k ** 2)
    assert np.sum(1 / k[16:] ** 2) / total < 0.04


def test_profiles(grid2):
    m = NoiseModel(sigma=1.0, modes=5)
    g = m.profiles(grid2)
    assert g.shape == (5, 32, 32)
    assert np.all(g[0] == 1.0)
    x = grid2.points
    assert np.allclose(g[1], np.cos(x[0]))
    assert np.allclose(g[2], np.sin(x[0]))
    assert profile_wavevectors(2, 4) == [(1, 0), (0, 1), (1, 1), (1, -1)]


def test_apply_noise_examples(grid2, consts):
    m = NoiseModel(sigma=0.5, modes=6)
    dW = np.linspace(-1, 1, 6)
    zero = initial.uniform(grid2, consts)
    assert np.all(apply_noise(m, zero, dW) == 0)
    s = initial.random_state(grid2, consts, seed=2)
    out = apply_noise(m, s, dW)
    s2 = s.with_fields(u=2 * s.u)
    assert np.array_equal(apply_noise(m, s2, dW), 2 * out)
    off = NoiseModel(kind="off")
    assert np.all(apply_noise(off, s, np.zeros(16)) == 0)
    with pytest.raises(InvalidInputError):
        m.weight_field(grid2, np.zeros(3))


def test_hs_norm_examples(grid2, consts):
    s = initial.random_state(grid2, consts, seed=3)
    one = NoiseModel(kind="custom-table", table=(1.0,))
    assert hs_norm_sq(one, s, 2) == pytest.approx(grid2.norm_sq(s.u, 2), rel=1e-14)
    m = NoiseModel(sigma=0.3, modes=8)
    assert hs_norm_sq(m, initial.uniform(grid2, consts), 2) == 0.0


def test_growth_and_lipschitz_calibration(grid2, consts):
    m = NoiseModel(sigma=1.0, modes=8)
    growth = [growth_ratio(m, initial.random_state(grid2, consts, seed=i), 2) for i in range(12)]
    lip = [lipschitz_ratio(m, initial.random_state(grid2, consts, seed=i),
                           initial.random_state(grid2, consts, seed=100 + i), 2) for i in range(12)]
    assert np.all(np.isfinite(growth)) and max(growth) > 0
    # a single constant covers all samples; for sigma/k profiles it stays O(1)
    assert max(lip) < 50 and max(growth) < 50
