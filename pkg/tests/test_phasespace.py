import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpflow import matlie as ml
from qpflow import phasespace as ps

CONFIGS = [(1, 1), (2, 1), (2, 2), (3, 2), (3, 3), (4, 2)]
seeds = st.integers(0, 2**31)


def _close(P, Q, tol):
    return np.max(np.abs(P - Q)) <= tol


def test_trivial_moment_map():
    A = ml.haar_random(3, 0)
    m = ps.MPoint(A, A, np.zeros((2, 3)), [1.0, -2.0])
    assert _close(ps.moment_map(m), np.eye(3), 1e-14)


@pytest.mark.parametrize("n,d", CONFIGS)
def test_det_identity(n, d):
    for seed in range(100):
        m = ps.random_point(n, d, seed=seed, x=np.linspace(-1.5, 2.0, d) + 0.1)
        assert abs(np.linalg.det(ps.moment_map(m)) - np.exp(1j * np.sum(m.ball_args()))) <= 1e-12


@pytest.mark.parametrize("n,d", CONFIGS)
def test_equivariance_and_psi(n, d):
    for seed in range(100):
        rng = np.random.default_rng(seed)
        m = ps.random_point(n, d, seed=rng)
        g = ml.haar_random(n, rng)
        assert _close(ps.moment_map(ps.act(g, m)), g @ ps.moment_map(m) @ ml.dagger(g), 1e-11)
        pm = ps.psi_map(m)
        assert _close(ps.tilde_moment_map(pm), ps.moment_map(m), 1e-11)
        spec = lambda U: np.sort(np.angle(np.linalg.eigvals(U)))
        assert _close(spec(pm.A), spec(pm.B), 1e-11)
        a, b = ps.psi_map(ps.act(g, m)), ps.act(g, pm)
        assert _close(a.B, b.B, 1e-11) and _close(a.A, b.A, 1e-11)


def test_psi_trivial_cases():
    m = ps.random_point(3, 2, seed=1).replace(B=np.eye(3))
    pm = ps.psi_map(m)
    assert _close(pm.B, m.A, 1e-15)
    assert np.array_equal(ps.psi_map(pm).A, m.A)
    A = ml.haar_random(2, 3)
    assert _close(ps.tilde_moment_map(ps.MPoint(A, A, np.zeros((1, 2)), [1.0])), np.eye(2), 1e-14)


@pytest.mark.parametrize("x", [1.0, -0.5])
def test_tilde_on_half_sphere(x):
    rng = np.random.default_rng(2)
    v = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    v *= np.sqrt(np.pi / abs(x)) / np.linalg.norm(v)
    A, Bt = ml.haar_random(3, rng), ml.haar_random(3, rng)
    m = ps.MPoint(A, Bt, v, [x])
    r2 = np.vdot(v, v).real
    expected = A @ ml.dagger(Bt) @ (np.eye(3) + (np.exp(1j * x * r2) - 1) / r2 * np.outer(v, v.conj()))
    assert _close(ps.tilde_moment_map(m), expected, 1e-12)


@given(st.sampled_from(CONFIGS), seeds)
@settings(max_examples=30, deadline=None)
def test_action_axiom(nd, seed):
    n, d = nd
    rng = np.random.default_rng(seed)
    m = ps.random_point(n, d, seed=rng)
    g, h = ml.haar_random(n, rng), ml.haar_random(n, rng)
    a, b = ps.act(g, ps.act(h, m)), ps.act(g @ h, m)
    assert _close(a.A, b.A, 1e-11) and _close(a.B, b.B, 1e-11) and _close(a.V, b.V, 1e-11)
    mi = ps.act(np.eye(n), m)
    assert _close(mi.A, m.A, 1e-15) and _close(mi.V, m.V, 1e-15)


@given(st.sampled_from(CONFIGS), seeds, st.floats(0, 2 * np.pi))
@settings(max_examples=30, deadline=None)
def test_u1_action(nd, seed, phase):
    n, d = nd
    m = ps.random_point(n, d, seed=seed)
    beta = seed % d
    mm = ps.u1_act(beta, np.exp(1j * phase), m)
    assert _close(ps.moment_map(mm), ps.moment_map(m), 1e-12)
    assert abs(mm.radii2()[beta] - m.radii2()[beta]) <= 1e-12


def test_rescale_iso():
    m = ps.random_point(3, 3, x=[0.5, -2.0, 1.5], seed=4)
    r = ps.rescale_iso(m)
    assert _close(ps.moment_map(r), ps.moment_map(m), 1e-12)
    assert np.allclose(r.ball_args(), m.ball_args(), atol=1e-13)
    m1 = ps.random_point(2, 2, x=[1.0, 1.0], seed=4)
    assert _close(ps.rescale_iso(m1).V, m1.V, 0)


def test_random_point_reproducible_and_in_ball():
    a, b = ps.random_point(3, 2, x=[1.0, -3.0], seed=9), ps.random_point(3, 2, x=[1.0, -3.0], seed=9)
    assert np.array_equal(a.A, b.A) and np.array_equal(a.V, b.V)
    assert a.check().ball_margin() > 0


@pytest.mark.parametrize("n,x", [(1, 1.0), (2, -2.0), (3, 0.7)])
def test_uniform_ball_moment(n, x):
    rng = np.random.default_rng(n)
    margin = 1e-3
    N = 10_000
    s = np.array([x * np.vdot(v, v).real for v in (ps.random_ball_vector(n, x, rng, margin) for _ in range(N))])
    R = 2 * np.pi * (1 - margin)
    # x |v|^2 = sgn(x) R u^(1/n), u uniform: mean n/(n+1) R, variance R^2 n/((n+2)(n+1)^2)
    sigma = R * np.sqrt(n / ((n + 2) * (n + 1) ** 2) / N)
    assert abs(s.mean() - np.sign(x) * n / (n + 1) * R) <= 3 * sigma


def test_freeness_margin():
    m = ps.MPoint(np.eye(2), np.eye(2), np.zeros((2, 2)), [1.0, 1.0])
    assert ps.freeness_margin(m) < 1e-14
    m1 = ps.MPoint(np.exp(0.3j) * np.eye(1), np.eye(1), np.array([[0.4 + 0.2j]]), [1.0])
    assert ps.freeness_margin(m1) == pytest.approx(abs(0.4 + 0.2j))
    assert ps.freeness_margin(ps.random_point(2, 2, seed=0)) > 1e-3


def test_pencil_params():
    z = ps.PencilParams(3, (0.5, -1.0, 2.0))
    Z = z.zstar()
    assert np.allclose(Z, -Z.T) and np.all(np.diag(Z) == 0)
    assert Z[0, 2] == -1.0 and Z[2, 1] == -2.0
    assert ps.PencilParams(1).values == ()
    with pytest.raises(ValueError):
        ps.PencilParams(2, (1.0, 2.0))
    assert (z + z).values == z.scaled(2).values


def test_json_roundtrip():
    m = ps.random_point(2, 2, x=[1.0, -1.0], seed=3)
    data = json.loads(m.to_json(gamma=1.1))
    assert data["gamma"] == 1.1 and data["n"] == 2 and len(data["v"]) == 2
    back = ps.MPoint.from_dict(data)
    assert np.array_equal(back.A, m.A) and np.array_equal(back.V, m.V)


def test_tangent_vectors():
    m = ps.random_point(3, 2, seed=5)
    X = ps.xi_action(m, ml.random_antiherm(3, 1))
    assert X.tangency_residual(m) <= 1e-10
    assert (X - X).norm() == 0 and (2 * X).norm() == pytest.approx(2 * X.norm())


def test_ball_exit():
    m = ps.MPoint(np.eye(1), np.eye(1), np.array([[3.0]]), [1.0])
    with pytest.raises(ps.BallExit):
        m.check()
