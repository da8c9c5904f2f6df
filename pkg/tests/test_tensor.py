from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from qspde import tensor as ta
from qspde.errors import InvalidInputError
from qspde.tensor import MaterialConstants

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
mat3 = arrays(np.float64, (3, 3), elements=finite)
UNIAXIAL = np.diag([2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0])


def random_rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


# ---- constants -------------------------------------------------------------

@pytest.mark.parametrize("field,value", [
    ("A", 0.0), ("gamma", 1.0), ("upsilon", 0.0), ("lam", -0.1), ("L", 0.0),
    ("Gamma", -1.0), ("b", 0.0), ("c", 0.0), ("a", np.nan)])
def test_constants_reject_bad_signs(field, value):
    with pytest.raises(InvalidInputError):
        MaterialConstants(**{field: value})


def test_constants_allow_negative_a():
    assert MaterialConstants(a=-2.0).a == -2.0


# ---- projection ----------------------------------------------------------------

def test_project_identity_is_zero():
    assert np.array_equal(ta.project_S03(np.eye(3)), np.zeros((3, 3)))


def test_project_single_offdiagonal():
    M = np.zeros((3, 3))
    M[0, 1] = 1.0
    expect = np.zeros((3, 3))
    expect[0, 1] = expect[1, 0] = 0.5
    assert np.array_equal(ta.project_S03(M), expect)


def test_project_rejects_nonfinite():
    M = np.eye(3)
    M[2, 1] = np.inf
    with pytest.raises(InvalidInputError):
        ta.project_S03(M)


@given(mat3)
def test_project_is_idempotent_and_lands_in_s03(M):
    Q = ta.project_S03(M)
    assert ta.is_qtensor(Q)
    np.testing.assert_allclose(ta.project_S03(Q), Q, rtol=0, atol=1e-14 * (1 + np.abs(M).max()))


@given(mat3, mat3, finite)
def test_project_is_linear(A, B, s):
    lhs = ta.project_S03(A + s * B)
    rhs = ta.project_S03(A) + s * ta.project_S03(B)
    scale = 1 + np.abs(A).max() + abs(s) * np.abs(B).max()
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-13 * scale)


def test_project_field_shape(rng):
    M = rng.standard_normal((3, 3, 4, 5))
    Q = ta.project_S03(M)
    assert Q.shape == M.shape
    assert ta.is_qtensor(Q)


# ---- bulk energy and force -------------------------------------------------------

def test_bulk_free_energy_zero():
    assert ta.bulk_free_energy(np.zeros((3, 3)), 0.0, MaterialConstants()) == 0.0


def test_bulk_free_energy_uniaxial():
    # 1/2 * 2/3 - 1/3 * 2/9 + 1/4 * (2/3)^2 = 10/27, checked with exact fractions
    t2, t3 = Fraction(2, 3), Fraction(2, 9)
    exact = Fraction(1, 2) * t2 - Fraction(1, 3) * t3 + Fraction(1, 4) * t2 ** 2
    assert exact == Fraction(10, 27)
    for L in (0.5, 1.0, 7.0):
        val = ta.bulk_free_energy(UNIAXIAL, 0.0, MaterialConstants(L=L))
        assert val == pytest.approx(10 / 27, rel=1e-14)


def test_bulk_free_energy_gradient_only():
    assert ta.bulk_free_energy(np.zeros((3, 3)), 2.0, MaterialConstants(L=3.0)) == 3.0


def test_bulk_free_energy_rejects_negative_gradient():
    with pytest.raises(InvalidInputError):
        ta.bulk_free_energy(np.zeros((3, 3)), -1.0, MaterialConstants())


def test_bulk_free_energy_rotation_invariant(rng):
    c = MaterialConstants(a=-0.3, b=1.7, c=0.9)
    for _ in range(20):
        Q = ta.project_S03(rng.standard_normal((3, 3)))
        R = random_rotation(rng)
        f1 = ta.bulk_free_energy(Q, 0.4, c)
        f2 = ta.bulk_free_energy(R @ Q @ R.T, 0.4, c)
        assert f2 == pytest.approx(f1, rel=1e-12)


def test_bulk_force_zero():
    assert np.array_equal(ta.bulk_force_K(np.zeros((3, 3)), MaterialConstants()), np.zeros((3, 3)))


def test_bulk_force_uniaxial():
    K = ta.bulk_force_K(UNIAXIAL, MaterialConstants())
    np.testing.assert_allclose(K, np.diag([-8 / 9, 4 / 9, 4 / 9]), rtol=0, atol=1e-15)


def test_bulk_force_preserves_s03(rng):
    c = MaterialConstants(a=0.7, b=2.0, c=1.3, Gamma=0.5)
    for _ in range(100):
        Q = ta.project_S03(rng.standard_normal((3, 3)) * rng.uniform(0.1, 5))
        K = ta.bulk_force_K(Q, c)
        assert np.array_equal(K, K.T)
        assert abs(np.trace(K)) <= 1e-14 * (1 + np.abs(K).max())


def test_bulk_force_is_minus_gradient_of_potential(rng):
    # K = -Gamma * (projected) dF/dQ for the bulk potential
    c = MaterialConstants(a=0.4, b=1.1, c=0.8)
    Q = ta.project_S03(rng.standard_normal((3, 3)))
    E = ta.project_S03(rng.standard_normal((3, 3)))
    h = 1e-6
    dF = (ta.bulk_potential(Q + h * E, c) - ta.bulk_potential(Q - h * E, c)) / (2 * h)
    K = ta.bulk_force_K(Q, c)
    assert np.sum(K * E) == pytest.approx(-c.Gamma * dF, rel=1e-7)


# ---- commutator and odot ------------------------------------------------------------

@given(mat3)
def test_commutator_with_itself(A):
    assert np.array_equal(ta.commutator(A, A), np.zeros((3, 3)))


@given(mat3, mat3)
@settings(max_examples=50)
def test_commutator_skew_symmetric_pair(A, B):
    Theta = ta.skew_part(A)
    Q = ta.project_S03(B)
    C = ta.commutator(Theta, Q)
    scale = 1 + np.abs(A).max() * np.abs(B).max()
    np.testing.assert_allclose(C, C.T, rtol=0, atol=1e-13 * scale)
    assert abs(np.trace(C)) <= 1e-13 * scale


def test_odot_zero():
    assert np.array_equal(ta.odot(np.zeros((3, 3, 3))), np.zeros((3, 3)))


def test_odot_single_entry():
    g = np.zeros((3, 3, 3))
    g[0, 0, 1] = g[0, 1, 0] = 1.0
    expect = np.zeros((3, 3))
    expect[0, 0] = 2.0
    assert np.array_equal(ta.odot(g), expect)


def test_odot_two_dimensional_padding(rng):
    g = rng.standard_normal((2, 3, 3, 4))
    M = ta.odot(g)
    assert M.shape == (3, 3, 4)
    assert np.all(M[2] == 0) and np.all(M[:, 2] == 0)


@given(arrays(np.float64, (3, 3, 3), elements=finite))
def test_odot_exactly_symmetric(g):
    M = ta.odot(g)
    assert np.array_equal(M, M.T)


def test_skew_part_exact(rng):
    G = rng.standard_normal((3, 3, 5))
    T = ta.skew_part(G)
    assert np.array_equal(T, -ta.transpose(T))
