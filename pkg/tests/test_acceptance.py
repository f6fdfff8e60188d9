"""Acceptance suite: one PASS/FAIL line per criterion at the specified tolerances.

Run ``python tests/test_acceptance.py`` for the summary alone; under pytest each criterion is
a separate test and the summary lines are repeated at the end of the session.
"""

import time

import numpy as np
import pytest

from qpflow import bivector as bv
from qpflow import dynamics as dy
from qpflow import forms
from qpflow import integrals as fi
from qpflow import matlie as ml
from qpflow import phasespace as ps
from qpflow import scalars as sc
from qpflow import spinrs as rs

RESULTS = {}


def _x(d):
    return np.linspace(1.0, -1.5, d)


def _point(n, d, rng):
    return ps.random_point(n, d, _x(d), rng)


def _check(name, val, tol, at_least=False):
    return name, val, tol, at_least


def _fmt(checks):
    return "; ".join(
        f"{name} {val:.2e} ({'>=' if lo else '<='} {tol:.3g})" for name, val, tol, lo in checks
    )


def _verdict(checks, extra=""):
    checks = [c if len(c) == 4 else _check(*c) for c in checks]
    ok = all((val >= tol) if lo else (val <= tol) for _, val, tol, lo in checks)
    return ok, _fmt(checks) + (f"; {extra}" if extra else "")


# ---------------------------------------------------------------------------
# criteria


def criterion_1():
    """Quasi-Jacobi identity, 100 cases per (n, d) in {2,3}x{1,2,3}, runtime <= 5 min."""
    t0 = time.time()
    worst = 0.0
    for n in (2, 3):
        for d in (1, 2, 3):
            gens = bv.generator_catalog(n, d)
            for i in range(100):
                rng = np.random.default_rng([1, n, d, i])
                m = _point(n, d, rng)
                kind = bv.BivectorKind.standard(ps.PencilParams.random(d, rng))
                f = [gens[j] for j in rng.choice(len(gens), 3, replace=False)]
                worst = max(worst, bv.quasi_jacobi_residual(*f, m, kind))
    elapsed = time.time() - t0
    return _verdict([("jacobiator - phi/2", worst, 1e-6), ("runtime [s]", elapsed, 300.0)])


def criterion_2():
    """Moment-map condition for (P_z, Phi) and (P_{z,c}, Phi~), 50 cases per configuration."""
    std = deg = 0.0
    for n in (2, 3):
        for d in (1, 2, 3):
            for i in range(50):
                rng = np.random.default_rng([2, n, d, i])
                m = _point(n, d, rng)
                z = ps.PencilParams.random(d, rng)
                std = max(std, bv.momentmap_residual(m, bv.BivectorKind.standard(z)))
                deg = max(deg, bv.momentmap_residual(m, bv.BivectorKind.degenerate(z)))
    return _verdict([("standard", std, 1e-8), ("degenerate", deg, 1e-8)])


def _invariant_pool(d):
    pool = [bv.tr_power(1), bv.tr_power(2)]
    pool += [bv.I_obs(k, a, b) for k in range(3) for a in range(d) for b in range(d)]
    return pool


def criterion_3():
    """Pencil: P_z affine in z; Jacobi on invariant triples for three z including 0."""
    aff = jac = rel = 0.0
    for n, d in [(2, 2), (3, 2), (2, 3)]:
        pool = _invariant_pool(d)
        zs = [None, ps.PencilParams.random(d, 1), ps.PencilParams.random(d, 2)]
        for i in range(20):
            rng = np.random.default_rng([3, n, d, i])
            m = _point(n, d, rng)
            aff = max(aff, bv.pencil_affinity_residual(m, zs[1], zs[2]))
            f = [pool[j] for j in rng.choice(len(pool), 3, replace=False)]
            for z in zs:
                terms = bv.jacobiator_terms(*f, m, bv.BivectorKind.standard(z))
                jac = max(jac, abs(terms.sum()))
                rel = max(rel, abs(terms.sum()) / max(1.0, float(np.max(np.abs(terms)))))
    info = f"relative to the largest cyclic term {rel:.2e}"
    return _verdict([("affinity", aff, 1e-13), ("invariant Jacobi", jac, 1e-6)], info)


def criterion_4():
    """Compatibility and axiom (B2), 50 random cases over (n, d) <= (3, 2), z in {0, random}."""
    configs = [(1, 1), (2, 1), (2, 2), (3, 1), (3, 2)]
    comp = b2 = 0.0
    for i in range(50):
        n, d = configs[i % len(configs)]
        rng = np.random.default_rng([4, i])
        m = _point(n, d, rng)
        for z in (None, ps.PencilParams.random(d, rng)):
            comp = max(comp, forms.compat_residual(m, z))
            b2 = max(b2, forms.b2_residual(m, z))
    return _verdict([("compatibility", comp, 1e-6), ("B2", b2, 1e-8)])


def criterion_5():
    """Master flows: Phi, Psi and trace-word conservation on [0, 10]; commuting flows."""
    h = ml.ClassFnSpec.h_r(2) + ml.ClassFnSpec.im_tr(1, 0.3)
    h2 = ml.ClassFnSpec.re_tr(1) + ml.ClassFnSpec.h_i(3)
    phi = psi = word = comm = 0.0
    for n, d in [(2, 1), (2, 2), (3, 2)]:
        words = dy.trace_words(d, max_len=4)
        for i in range(3):
            rng = np.random.default_rng([5, n, d, i])
            m = _point(n, d, rng)
            res = dy.integrate_master(h, m, np.linspace(0.0, 10.0, 5), words)
            phi = max(phi, res.max_drift("phi_drift"))
            psi = max(psi, res.max_drift("psi_drift"))
            word = max(word, res.max_drift("word_drift"))
            t1, t2 = rng.uniform(-5, 5, size=2)
            comm = max(comm, dy.commuting_flows_residual(h, h2, m, t1, t2))
    return _verdict([("Phi drift", phi, 1e-10), ("Psi drift", psi, 1e-12),
                     ("word drift", word, 1e-10), ("commuting flows", comm, 1e-12)])


def criterion_6():
    """Psi is a morphism onto the degenerate structure: all generator pairs, 25 points, n=2,3, d=2."""
    worst = 0.0
    for n in (2, 3):
        gens = bv.generator_catalog(n, 2)
        for i in range(25):
            rng = np.random.default_rng([6, n, i])
            m = _point(n, 2, rng)
            z = ps.PencilParams.random(2, rng)
            pm = ps.psi_map(m)
            G = np.array([g.gradient(pm) for g in gens])
            Gp = np.array([bv.psi_pullback(g).gradient(m) for g in gens])
            lhs = Gp @ bv.assemble_P(m, bv.BivectorKind.standard(z)) @ Gp.T
            rhs = G @ bv.assemble_P(pm, bv.BivectorKind.degenerate(z)) @ G.T
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return _verdict([("generator pairs", worst, 1e-9)])


def criterion_7():
    """Reduced dynamics: off-diagonal Q'Q^-1, master vs reduced at T=1, dt=1e-3, RK4 order."""
    h = ml.ClassFnSpec.h_r(2) + ml.ClassFnSpec.im_tr(1, 0.3)
    off = agree = 0.0
    for n, d in [(2, 2), (3, 2)]:
        for i in range(2):
            s0, _ = dy.gauge_fix(_point(n, d, np.random.default_rng([7, n, d, i])))
            w, _ = dy.qdot_offdiag_residual(h, s0, 1.0, 1e-3)
            off = max(off, w)
            agree = max(agree, dy.master_vs_reduced(h, s0, T=1.0, dt=1e-3))
    s0, _ = dy.gauge_fix(_point(3, 1, np.random.default_rng([7, 0])))
    ratio, _, _ = dy.rk4_order_ratio(h, s0, T=1.0, dt=0.1)
    return _verdict([("offdiag", off, 1e-8), ("master vs reduced", agree, 1e-6),
                     ("|ratio - 16|", abs(ratio - 16.0), 4.0)], f"ratio {ratio:.2f}")


def criterion_8():
    """First-integral algebra: full sweep k, l <= 3; mutation detects every single sign flip."""
    worst = 0.0
    for n in (2, 3):
        for d in (2, 3):
            for i in range(20):
                rng = np.random.default_rng([8, n, d, i])
                m = _point(n, d, rng)
                for _ in range(2):
                    worst = max(worst, fi.sweep_residual(m, ps.PencilParams.random(d, rng), kmax=3))
    rng = np.random.default_rng([8, 99])
    m = _point(2, 3, rng)
    z = ps.PencilParams.random(3, rng)
    weakest = min(fi.mutation_sensitivity(m, z, term, kmax=3) for term in fi.TERMS)
    difference = fi.sweep_residual(m, z, kmax=3, variant="difference")
    checks = [("closed vs engine", worst, 1e-9), _check("weakest mutation", weakest, 1e-3, at_least=True)]
    return _verdict(checks, f"difference-of-sums first line misses by {difference:.2e}")


def criterion_9():
    """Leaf construction: solver success on SU(3), leaf and determinant residuals, family, d=1."""
    ok = 0
    trials = 40
    for seed in range(trials):
        U = ml.haar_random(3, 1000 + seed)
        U = U / np.linalg.det(U) ** (1 / 3)
        try:
            A, B, _ = rs.solve_commutator(U, seed=seed)
        except rs.NotConverged:
            continue
        ok += np.linalg.norm(A @ B @ A.conj().T @ B.conj().T - U) <= 1e-10
    leaf = det = 0.0
    for n in (2, 3):
        for d in (2, 3):
            spec = rs.LeafSpec(1.1, n, d, tuple(np.linspace(1.0, -0.8, d)))
            for seed in range(10):
                m = rs.build_leaf_point(spec, seed)
                leaf = max(leaf, rs.leaf_residual(m, 1.1))
                det = max(det, rs.det_constraint_residual(m, 1.1))
    mu = ml.haar_random(2, 5)
    mu = mu / np.sqrt(np.linalg.det(mu))
    fam = rs.family_identity_residual(rs.noncompact_family(0.5, mu, 1.0, -2.0, seed=0))
    radius = 0.0
    for n in (2, 3):
        for x1 in (0.8, -1.2):
            m = rs.build_leaf_point(rs.LeafSpec(1.1, n, 1, (x1,)), 0)
            G = np.mod(n * 1.1, 2 * np.pi)
            law = G / x1 if x1 > 0 else (G - 2 * np.pi) / x1
            radius = max(radius, abs(float(np.vdot(m.V[0], m.V[0]).real) - law))
    rate = ok / trials
    checks = [_check("solver success rate", rate, 0.95, at_least=True), ("leaf", leaf, 1e-9), ("det", det, 1e-12),
              ("E1 E2 = 1", fam, 1e-12), ("d=1 radius", radius, 1e-9)]
    return _verdict(checks, f"{ok}/{trials} solver successes")


def criterion_10():
    """Spin RS: reconstruction, kz combination, eom vs reduced, acceleration, leaf drift."""
    rec = kz = eom = acc = drift = 0.0
    for n in (2, 3):
        spec = rs.LeafSpec(1.1, n, 2, (1.0, -0.8))
        for seed in range(3):
            s = rs.leaf_slice_point(spec, seed)
            rec = max(rec, rs.spin_data(s, 1.1).reconstruction)
            kz = max(kz, rs.kz_combination_residual(s, 1.1))
            eom = max(eom, rs.eom_vs_reduced_residual(s, 1.1, "re"), rs.eom_vs_reduced_residual(s, 1.1, "im"))
            acc = max(acc, rs.accel_residual(s, 1.1))
        res = rs.integrate_rs(rs.leaf_slice_point(spec, 0), 1.1, T=1.0, dt=5e-4, record_every=100)
        drift = max(drift, res.max_drift("leaf") if not res.truncated else np.inf)
    return _verdict([("reconstruction", rec, 1e-8), ("kz combination", kz, 1e-10),
                     ("eom vs reduced", eom, 1e-9), ("q'' vs FD", acc, 1e-5), ("leaf drift", drift, 1e-6)])


def criterion_11():
    """Scalar identities on a 1000-point grid of (-2 pi, 2 pi)."""
    t = np.linspace(-2 * np.pi + 0.01, 2 * np.pi - 0.01, 1000)
    ans = float(np.max(sc.ansatz_residual(t, exact=True)))
    abc = max(max(sc.momentmap_relations_residual(ti, exact=True)) for ti in t)
    atb = float(np.max(np.abs(sc.a_fn(t) - t * sc.b_fn(t) - 2.0)))
    ans64 = float(np.max(np.abs(sc.ansatz_residual(t))))
    abc64 = float(max(np.max(r) for r in sc.momentmap_relations_residual(t)))
    info = f"float64 evaluation: Ans1 {ans64:.2e}, abc {abc64:.2e}"
    return _verdict([("Ans1 (40 digits)", ans, 1e-12), ("abc (40 digits)", abc, 1e-12),
                     ("a - t b - 2", atb, 1e-12)], info)


CRITERIA = {k: globals()[f"criterion_{k}"] for k in range(1, 12)}


def run(k):
    ok, detail = CRITERIA[k]()
    line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[k] = line
    print(line)
    return ok, line


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k):
    ok, line = run(k)
    assert ok, line


if __name__ == "__main__":
    for k in sorted(CRITERIA):
        run(k)
