import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpflow import forms
from qpflow import matlie as ml
from qpflow import phasespace as ps
from qpflow.phasespace import TangentVec

seeds = st.integers(0, 2**31)


def _point(n, d, seed):
    return ps.random_point(n, d, x=np.linspace(1.0, -1.5, d), seed=seed)


def _rand_tangent(m, rng):
    n, d = m.n, m.d
    xa = _ah(n, rng)
    xb = _ah(n, rng)
    W = rng.normal(size=(d, n)) + 1j * rng.normal(size=(d, n))
    return TangentVec(xa @ m.A, xb @ m.B, W)


def _ah(n, rng):
    M = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (M - M.conj().T)


def test_ball_small_v_limit():
    rng = np.random.default_rng(0)
    X = rng.normal(size=3) + 1j * rng.normal(size=3)
    Y = rng.normal(size=3) + 1j * rng.normal(size=3)
    x = 1.3
    expected = float(np.real(1j * x * (X @ Y.conj() - Y @ X.conj())))
    assert abs(forms.omega_ball(np.zeros(3), x, X, Y) - expected) <= 1e-14
    tiny = np.array([1e-9, 0, 0], complex)
    assert abs(forms.omega_ball(tiny, x, X, Y) - expected) <= 1e-12


@pytest.mark.parametrize("x,r", [(1.0, 0.7), (-1.5, 0.4), (2.0, 1.1)])
def test_ball_rank_one_point(x, r):
    v = np.array([r, 0, 0], complex)
    e1, e2 = np.eye(3)[0].astype(complex), np.eye(3)[1].astype(complex)
    # radial plane carries the flat coefficient, the orthogonal plane carries sin(x r^2)/r^2
    assert abs(forms.omega_ball(v, x, e1, 1j * e1) - 2 * x) <= 1e-13
    assert abs(forms.omega_ball(v, x, e2, 1j * e2) - 2 * np.sin(x * r * r) / r**2) <= 1e-13
    assert abs(forms.omega_ball(v, x, e1, e2)) <= 1e-14


@given(seeds)
@settings(max_examples=30, deadline=None)
def test_ball_antisymmetric(seed):
    rng = np.random.default_rng(seed)
    v = 0.5 * (rng.normal(size=2) + 1j * rng.normal(size=2))
    X = rng.normal(size=2) + 1j * rng.normal(size=2)
    Y = rng.normal(size=2) + 1j * rng.normal(size=2)
    assert abs(forms.omega_ball(v, 0.9, X, Y) + forms.omega_ball(v, 0.9, Y, X)) <= 1e-12


@pytest.mark.parametrize("n", [1, 2, 3])
def test_double_at_identity(n):
    rng = np.random.default_rng(n)
    xi, zeta, xi2, zeta2 = (_ah(n, rng) for _ in range(4))
    one = np.eye(n, dtype=complex)
    val = forms.omega_double(one, one, (xi, zeta), (xi2, zeta2))
    # hand expansion at A = B = 1: the AB/BA term is symmetric and drops out
    expected = float(np.real(np.trace(xi @ zeta2) - np.trace(xi2 @ zeta)))
    assert abs(val - expected) <= 1e-12


@pytest.mark.parametrize("n,d", [(2, 1), (2, 2), (3, 2)])
def test_pencil_antisymmetry_and_invariance(n, d):
    rng = np.random.default_rng(10 * n + d)
    m = _point(n, d, 3)
    z = ps.PencilParams.random(d, 4)
    X, Y = _rand_tangent(m, rng), _rand_tangent(m, rng)
    for kind in ("pencil", "master", "double", "ball"):
        f = forms.TwoFormEval(m, kind, z)
        assert abs(f(X, Y) + f(Y, X)) <= 1e-10
        assert abs(f(X, X)) <= 1e-10
        g = ml.haar_random(n, 7)
        res = forms.invariance_residual(lambda mm: forms.TwoFormEval(mm, kind, z), m, X, Y, g)
        assert res <= 1e-10


def test_ztilde_radial_differential():
    m = _point(2, 2, 5)
    z = ps.PencilParams(2, [0.8])
    zeroA = np.zeros((2, 2), complex)
    X = TangentVec(zeroA, zeroA, np.array([m.V[0], 0 * m.V[1]]))
    Y = TangentVec(zeroA, zeroA, np.array([0 * m.V[0], m.V[1]]))
    r = m.radii2()
    expected = m.x[0] * m.x[1] * 0.8 * (2 * r[0]) * (2 * r[1])
    assert abs(forms.omega_ztilde(m, z, X, Y) - expected) <= 1e-12
    T = TangentVec(zeroA, zeroA, np.array([1j * m.V[0], 1j * m.V[1]]))
    assert abs(forms.omega_ztilde(m, z, T, Y)) <= 1e-14


def test_ztilde_linear_in_z():
    rng = np.random.default_rng(1)
    m = _point(2, 3, 1)
    z1, z2 = ps.PencilParams.random(3, 1), ps.PencilParams.random(3, 2)
    X, Y = _rand_tangent(m, rng), _rand_tangent(m, rng)
    lhs = forms.omega_ztilde(m, z1 + z2.scaled(2.5), X, Y)
    rhs = forms.omega_ztilde(m, z1, X, Y) + 2.5 * forms.omega_ztilde(m, z2, X, Y)
    assert abs(lhs - rhs) <= 1e-13


def test_zero_v_reduces_to_double():
    rng = np.random.default_rng(2)
    m = ps.MPoint(ml.haar_random(2, 1), ml.haar_random(2, 2), np.zeros((2, 2)), [1.0, -0.5])
    z = ps.PencilParams.random(2, 3)
    X, Y = _rand_tangent(m, rng), _rand_tangent(m, rng)
    X0 = TangentVec(X.dA, X.dB, 0 * X.dV)
    Y0 = TangentVec(Y.dA, Y.dB, 0 * Y.dV)
    assert abs(forms.omega_ztilde(m, z, X, Y)) <= 1e-14
    double = forms.omega_double(m.A, m.B, (X.dA, X.dB), (Y.dA, Y.dB))
    assert abs(forms.omega_pencil(m, z, X0, Y0) - double) <= 1e-12


def test_theta_zero_and_double_identity():
    m = _point(2, 2, 0)
    assert np.max(np.abs(forms.pullback_theta(m, TangentVec.zeros(2, 2)))) == 0
    rng = np.random.default_rng(0)
    B = ml.haar_random(2, 9)
    m0 = ps.MPoint(np.eye(2, dtype=complex), B, np.zeros((0, 2)), [])
    xi = _ah(2, rng)
    X = TangentVec(xi, 0 * B, np.zeros((0, 2)))
    expected = xi - B @ xi @ B.conj().T
    assert np.max(np.abs(forms.pullback_theta(m0, X, "R") - expected)) <= 1e-13


@pytest.mark.parametrize("n,d", [(2, 1), (2, 2), (3, 2)])
@pytest.mark.parametrize("which", ["L", "R"])
def test_theta_vs_finite_difference(n, d, which):
    rng = np.random.default_rng(n + d)
    m = _point(n, d, 11)
    assert forms.theta_fd_residual(m, _rand_tangent(m, rng), which=which) <= 1e-6


@pytest.mark.parametrize("n,d", [(1, 1), (2, 1), (2, 2), (3, 2)])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_axiom_b2(n, d, seed):
    m = _point(n, d, seed)
    assert forms.b2_residual(m) <= 1e-8
    assert forms.b2_residual(m, ps.PencilParams.random(d, seed)) <= 1e-8


@pytest.mark.parametrize("n,d", [(1, 1), (2, 1), (2, 2)])
@pytest.mark.parametrize("zkind", ["zero", "random"])
def test_compatibility(n, d, zkind):
    m = _point(n, d, 21)
    z = None if zkind == "zero" else ps.PencilParams.random(d, 5)
    assert forms.compat_residual(m, z) <= 1e-6


def test_compatibility_sign_matters():
    m = _point(2, 2, 4)
    assert forms.compat_operator_residual(m, None, sign=+1.0) > 1e-2


def test_degenerate_kind_rejected():
    from qpflow.bivector import BivectorKind

    m = _point(2, 2, 4)
    with pytest.raises(ValueError):
        forms.compat_residual(m, None, kind=BivectorKind.degenerate(ps.PencilParams.random(2, 1)))


@pytest.mark.parametrize("n,d", [(1, 1), (2, 2), (3, 2)])
def test_omega_matrix_matches_pairwise(n, d):
    from qpflow.bivector import chart_of

    m = _point(n, d, 6)
    z = ps.PencilParams.random(d, 7)
    ch = chart_of(m)
    E = [ch.basis_tangent(k) for k in range(ch.dim)]
    Om = forms.omega_matrix(m, z)
    rng = np.random.default_rng(0)
    for k, l in rng.integers(0, ch.dim, size=(40, 2)):
        assert abs(Om[k, l] - forms.omega_pencil(m, z, E[k], E[l])) <= 1e-13
