import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpflow import scalars as sc

GRID = np.linspace(-2 * np.pi + 0.01, 2 * np.pi - 0.01, 1000)
branch = st.floats(-2 * np.pi + 1e-2, 2 * np.pi - 1e-2, allow_nan=False)


def test_b_special_values():
    assert sc.b_fn(0.0) == 0.0
    assert sc.b_fn(np.pi) == pytest.approx(-2 / np.pi, abs=1e-15)
    assert sc.a_fn(0.0) == pytest.approx(2.0)
    assert sc.c_fn(0.0) == pytest.approx(1.0)


def _reference(name, t):
    """40-digit reference values of the closed forms."""
    with mpmath.workdps(40):
        A, B, dA, C, dC = sc._closed_mp(t)
        ct = mpmath.cot(mpmath.mpf(t) / 2)
        dB = -1 / (2 * mpmath.sin(mpmath.mpf(t) / 2) ** 2) + 2 / mpmath.mpf(t) ** 2
        return complex({"a_fn": A, "b_fn": B, "da_fn": dA, "c_fn": C, "dc_fn": dC, "db_fn": dB}[name])


@pytest.mark.parametrize("fn", [sc.b_fn, sc.a_fn, sc.c_fn, sc.db_fn, sc.da_fn, sc.dc_fn])
@pytest.mark.parametrize("t", [1e-6, 1e-3, 0.3, 0.999, 1.001, -2.5, 6.0])
def test_against_high_precision(fn, t):
    ref = _reference(fn.__name__, t)
    assert abs(fn(t) - ref) <= 4e-16 * max(1.0, abs(ref)) * (1 + abs(t) / (2 * np.pi - abs(t))) * 4


def test_b_closed_form_away_from_zero():
    t = np.array([0.5, -1.0, 3.0, 6.0])
    assert np.allclose(sc.b_fn(t), 1 / np.tan(t / 2) - 2 / t, atol=1e-15)


def test_b_from_varphi():
    t = 0.7
    assert abs(sc.b_fn(t) - 2j * sc.varphi_fn(-1j * t)) <= 1e-13


def test_sinc_helpers_near_zero():
    assert sc.sinc_defect(0.0) == 0.0 and sc.sinc(0.0) == 1.0
    for s in (1e-4, 0.5, 2.0):
        assert abs(sc.sinc_defect(s) - (1 - np.sin(s) / s) / s) <= 1e-12
        assert abs(sc.sinc(s) - np.sin(s) / s) <= 1e-15


def test_out_of_branch():
    with pytest.raises(sc.OutOfBranch):
        sc.b_fn(2 * np.pi)
    with pytest.raises(sc.PoleProximity):
        sc.varphi_fn(2j * np.pi)


def test_a_minus_tb_is_two_on_grid():
    assert np.max(np.abs(sc.a_fn(GRID) - GRID * sc.b_fn(GRID) - 2)) <= 1e-12


def test_parity_on_grid():
    assert np.max(np.abs(sc.b_fn(GRID) + sc.b_fn(-GRID))) <= 1e-12
    assert np.max(np.abs(sc.a_fn(GRID) - sc.a_fn(-GRID))) <= 1e-12


@pytest.mark.parametrize("t", [0.0, 1.2, -3.0, 5.5])
def test_ansatz_residual(t):
    assert abs(sc.ansatz_residual(t)) <= 1e-12


@pytest.mark.parametrize("a0", [0.5, 2.0, -3.0])
def test_ansatz_constant_family(a0):
    t = np.linspace(-3, 3, 11)
    r = sc.ansatz_residual(t, a=lambda s: a0 + 0 * s, b=lambda s: -s / a0, da=lambda s: 0 * s)
    assert np.max(np.abs(r)) <= 1e-14


@pytest.mark.parametrize("t", [0.0, 0.9, -1.5, 1e-4])
def test_momentmap_relations(t):
    r1, r2 = sc.momentmap_relations_residual(t)
    assert r1 <= 1e-12 and r2 <= 1e-12


def test_exact_relations_on_grid():
    assert np.max(sc.ansatz_residual(GRID, exact=True)) <= 1e-12
    assert max(max(sc.momentmap_relations_residual(t, exact=True)) for t in GRID) <= 1e-12
    assert max(max(sc.momentmap_relations_residual(t)) for t in GRID) <= 1e-12


@given(branch)
@settings(max_examples=200)
def test_relations_property(t):
    # float64: roundoff in t b(t) is amplified by a'(t), which grows like 1/(2 pi - |t|)^2
    a, b, da = sc.a_fn(t), sc.b_fn(t), sc.da_fn(t)
    scale = 1 + abs(a * b) + abs(da) * (abs(a) + abs(t * b)) + abs(t)
    assert abs(sc.ansatz_residual(t)) <= 1e-14 * scale
    assert max(sc.momentmap_relations_residual(t)) <= 1e-12


@given(branch)
@settings(max_examples=100)
def test_derivatives_fd(t):
    e = 1e-6
    for f, df in ((sc.b_fn, sc.db_fn), (sc.a_fn, sc.da_fn), (sc.c_fn, sc.dc_fn)):
        if abs(t) > 2 * np.pi - 1e-2 - 2 * e:
            return
        assert abs((f(t + e) - f(t - e)) / (2 * e) - df(t)) <= 1e-6 * (1 + abs(df(t)))
