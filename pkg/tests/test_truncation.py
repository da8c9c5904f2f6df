import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from qspde import dynamics as dyn
from qspde.errors import InvalidInputError
from qspde.initial import uniform
from qspde.truncation import (ClampProfile, CutoffProfile, clamp_coefficients, gate,
                              phi_from_norms, phi_R, smoothstep5)

pos = st.floats(0, 100, allow_nan=False)


def test_profile_plateaus():
    p = CutoffProfile(2.0)
    assert p(0.0) == 1.0 and p(2.0) == 1.0
    assert p(4.0) == 0.0 and p(100.0) == 0.0
    # quintic smoothstep at the midpoint is exactly 1/2
    assert p(3.0) == 0.5


def test_profile_is_c2_at_joins():
    R = 1.0
    h = 1e-4
    for x0 in (R, 2 * R):
        xs = x0 + h * np.arange(-3, 4)
        v = gate(xs, R)
        d1 = np.gradient(v, h)
        d2 = np.gradient(d1, h)
        # S' ~ 30 t^2 and S'' ~ 60 t near the joins, so O(h^2) and O(h) here
        assert np.abs(d1).max() < 40 * (3 * h) ** 2
        assert np.abs(d2).max() < 80 * (3 * h)


def test_profile_rejects_bad_threshold():
    for R in (0.0, -1.0, float("nan")):
        with pytest.raises(InvalidInputError):
            CutoffProfile(R)
    with pytest.raises(InvalidInputError):
        ClampProfile(0.0)


@given(pos, pos)
def test_profile_monotone(a, b):
    p = CutoffProfile(3.0)
    lo, hi = sorted((a, b))
    assert p(lo) >= p(hi)
    assert 0.0 <= p(hi) <= 1.0


def test_smoothstep_endpoints():
    assert smoothstep5(0.0) == 0.0 and smoothstep5(1.0) == 1.0
    assert smoothstep5(-3.0) == 0.0 and smoothstep5(7.0) == 1.0


def test_phi_from_norms_examples():
    p = CutoffProfile(1.0)
    assert phi_from_norms(0.0, 0.0, p) == 1.0
    assert phi_from_norms(3.0, 0.0, p) == 0.0
    assert phi_from_norms(0.0, 3.0, p) == 0.0
    v = phi_from_norms(1.5, 1.5, p)
    assert 0 < v < 1
    assert v == p(1.5) ** 2 == 0.25


@given(pos, pos, pos)
@settings(max_examples=50)
def test_phi_monotone_in_each_norm(a, b, q):
    p = CutoffProfile(2.0)
    lo, hi = sorted((a, b))
    assert phi_from_norms(lo, q, p) >= phi_from_norms(hi, q, p)
    assert phi_from_norms(q, lo, p) >= phi_from_norms(q, hi, p)


def test_phi_on_states(grid2, consts):
    p = CutoffProfile(1.0)
    assert phi_R(uniform(grid2, consts), p) == 1.0
    x = grid2.points
    s = uniform(grid2, consts)
    u = np.stack([3.0 * np.ones(grid2.shape), np.zeros(grid2.shape)])
    assert phi_R(s.with_fields(u=u), p) == 0.0
    # ||sin x||_{2,inf} = max(|sin| + |cos| + |sin|) > 2 at amplitude 1.2
    u = np.stack([1.2 * np.sin(x[0]), np.zeros(grid2.shape)])
    assert phi_R(s.with_fields(u=u), p) < 1.0


def test_clamp_examples():
    prof = ClampProfile(1.0)
    v = np.array([0.3, -1.0, 0.999])
    assert np.array_equal(clamp_coefficients(v, prof), v)
    w = clamp_coefficients(np.array([2.5, -3.0, 0.5]), prof)
    assert w[0] == 0.0 and w[1] == 0.0 and w[2] == 0.5
    inf = ClampProfile()
    assert not inf.active
    assert np.array_equal(clamp_coefficients(np.array([1e9]), inf), [1e9])
    with pytest.raises(InvalidInputError):
        clamp_coefficients(np.array([np.nan]), prof)


@given(arrays(np.float64, 20, elements=st.floats(-50, 50)), st.floats(0.1, 10))
def test_clamp_bound(v, K):
    out = clamp_coefficients(v, ClampProfile(K))
    assert np.all(np.abs(out) <= 2 * K)


@given(arrays(np.float64, 10, elements=st.floats(-1, 1)))
def test_clamp_idempotent_inside(v):
    prof = ClampProfile(1.0)
    once = clamp_coefficients(v, prof)
    assert np.array_equal(once, v)
    assert np.array_equal(clamp_coefficients(once, prof), once)
