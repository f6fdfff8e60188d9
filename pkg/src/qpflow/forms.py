"""Quasi-Hamiltonian 2-forms on the master phase space and the bivector/2-form compatibility.

Conventions
-----------
* Scalar or matrix-valued 1-forms a, b wedge as (a ^ b)(X, Y) = a(X) b(Y) - a(Y) b(X).
* theta^L = g^-1 dg, theta^R = dg g^-1, and sum_a theta_a^L ^ theta_a^R uses the component
  pairing <xi, zeta> = -tr(xi zeta).
* omega_flat(X) = omega(X, .), and P_sharp(alpha) = P(alpha, .) = P^t alpha in the real
  chart (alpha contracts the first slot; X_H = P grad H contracts the second).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matlie
from .bivector import BivectorKind, action_vectors, assemble_P, chart_of
from .phasespace import (
    MPoint,
    PencilParams,
    TangentVec,
    ball_factors,
    moment_map,
    partial_moment_map,
    xi_action,
)
from .scalars import c_fn, dc_fn, sinc, sinc_defect

SMALL_V = 1e-6


def _wedge(aX, bY, aY, bX):
    return aX * bY - aY * bX


def _trwedge(aX, bY, aY, bX):
    return np.trace(aX @ bY) - np.trace(aY @ bX)


# ---------------------------------------------------------------------------
# individual pieces


def omega_ball(v, x, X, Y):
    """Ball 2-form at v (parameter x) on ambient vectors X, Y in C^n.

    Uses omega = i S sum dv_j ^ dvbar_j + i (x - S)/|v|^2 (v^+ dv) ^ (v^t dvbar) with
    S = sin(x|v|^2)/|v|^2; the symmetric dv_j ^ dv_k terms cancel.
    """
    v = np.asarray(v, dtype=complex)
    X = np.asarray(X, dtype=complex)
    Y = np.asarray(Y, dtype=complex)
    r2 = float(np.real(np.vdot(v, v)))
    s = x * r2
    S = x * sinc(s)  # sin(s)/|v|^2
    coef = x * x * sinc_defect(s)  # (x - S)/|v|^2
    base = 1j * S * (X @ Y.conj() - Y @ X.conj())
    if r2 < SMALL_V**2:
        return float(np.real(base))
    pX, pY = np.vdot(v, X), np.vdot(v, Y)  # v^+ dv
    qX, qY = v @ X.conj(), v @ Y.conj()  # v^t dvbar
    return float(np.real(base + 1j * coef * _wedge(pX, qY, pY, qX)))


def omega_double(A, B, X, Y):
    """Internally fused double 2-form on (dA, dB) pairs X = (XA, XB), Y = (YA, YB)."""
    Ai, Bi = np.linalg.inv(A), np.linalg.inv(B)
    ABi = np.linalg.inv(A @ B)
    BAi = np.linalg.inv(B @ A)

    def feats(dA, dB):
        return (
            Ai @ dA,
            dB @ Bi,
            dA @ Ai,
            Bi @ dB,
            ABi @ (dA @ B + A @ dB),
            BAi @ (dB @ A + B @ dA),
        )

    fX, fY = feats(*X), feats(*Y)
    val = (
        _trwedge(fX[0], fY[1], fY[0], fX[1])
        + _trwedge(fX[2], fY[3], fY[2], fX[3])
        - _trwedge(fX[4], fY[5], fY[4], fX[5])
    )
    return float(np.real(0.5 * val))


def d_rank1_exp(v, x, w):
    """Derivative of exp(i x v v^+) along w."""
    r2 = float(np.real(np.vdot(v, v)))
    s = x * r2
    ds = 2.0 * x * float(np.real(np.vdot(v, w)))
    return 1j * x * (dc_fn(s) * ds * np.outer(v, v.conj()) + c_fn(s) * (np.outer(w, v.conj()) + np.outer(v, w.conj())))


def _double_factors(m, X):
    Ai, Bi = np.linalg.inv(m.A), np.linalg.inv(m.B)
    mats = [m.A, m.B, Ai, Bi]
    dmats = [X.dA, X.dB, -Ai @ X.dA @ Ai, -Bi @ X.dB @ Bi]
    return mats, dmats


def _product_derivative(mats, dmats, n):
    """(prod M_i, sum_i M_1 .. dM_i .. M_r)."""
    val = np.eye(n, dtype=complex)
    der = np.zeros((n, n), dtype=complex)
    for M, dM in zip(mats, dmats):
        der = der @ M + val @ dM
        val = val @ M
    return val, der


def moment_derivative(m, X, upto=None, only_ball=None):
    """(Phi, D Phi . X) for a moment-map variant.

    upto=None: full Phi; upto=k: partial Phi_{M_k} = [A,B] E_1..E_k;
    only_ball=alpha: the single factor exp(i x_alpha v_alpha v_alpha^+).
    """
    n = m.n
    if only_ball is not None:
        a = only_ball
        Ea = ball_factors(m)[a]
        return Ea, d_rank1_exp(m.V[a], m.x[a], X.dV[a])
    k = m.d if upto is None else upto
    mats, dmats = _double_factors(m, X)
    Es = ball_factors(m)
    for a in range(k):
        mats.append(Es[a])
        dmats.append(d_rank1_exp(m.V[a], m.x[a], X.dV[a]))
    return _product_derivative(mats, dmats, n)


def pullback_theta(m, X, which="L", upto=None, only_ball=None):
    """Phi^-1 (D Phi . X) for which="L", (D Phi . X) Phi^-1 for which="R"."""
    Phi, dPhi = moment_derivative(m, X, upto, only_ball)
    Pi = np.linalg.inv(Phi)
    return Pi @ dPhi if which == "L" else dPhi @ Pi


def omega_ztilde(m, z, X, Y):
    """sum_{a<b} x_a x_b z_ab d|v_a|^2 ^ d|v_b|^2."""
    if z is None or m.d < 2:
        return 0.0
    dX = 2.0 * np.real(np.sum(m.V.conj() * X.dV, axis=1))
    dY = 2.0 * np.real(np.sum(m.V.conj() * Y.dV, axis=1))
    total = 0.0
    for (a, b), zab in zip(z.pairs(), z.values):
        total += m.x[a] * m.x[b] * zab * (dX[a] * dY[b] - dY[a] * dX[b])
    return float(total)


def fusion_term(m, X, Y):
    """-1/2 sum_alpha sum_a Phi_{M_{alpha-1}}^* theta_a^L ^ Phi_alpha^* theta_a^R."""
    total = 0.0
    for a in range(m.d):
        LX = pullback_theta(m, X, "L", upto=a)
        LY = pullback_theta(m, Y, "L", upto=a)
        RX = pullback_theta(m, X, "R", only_ball=a)
        RY = pullback_theta(m, Y, "R", only_ball=a)
        # <xi, zeta> = -tr(xi zeta)
        total += -np.trace(LX @ RY) + np.trace(LY @ RX)
    return float(np.real(-0.5 * total))


def omega_pencil(m, z, X, Y):
    """omega_z(X, Y) = omega_double + sum omega_ball + fusion terms + omega~_z."""
    val = omega_double(m.A, m.B, (X.dA, X.dB), (Y.dA, Y.dB))
    for a in range(m.d):
        val += omega_ball(m.V[a], m.x[a], X.dV[a], Y.dV[a])
    val += fusion_term(m, X, Y)
    val += omega_ztilde(m, z, X, Y)
    return val


def omega_master(m, X, Y):
    return omega_pencil(m, None, X, Y)


@dataclass(frozen=True)
class TwoFormEval:
    """Closure evaluating a 2-form at a point; kind in {"ball", "double", "master", "pencil"}."""

    m: MPoint
    kind: str = "pencil"
    z: PencilParams | None = None
    ball: int = 0

    def __call__(self, X, Y):
        if self.kind == "ball":
            a = self.ball
            return omega_ball(self.m.V[a], self.m.x[a], X.dV[a], Y.dV[a])
        if self.kind == "double":
            return omega_double(self.m.A, self.m.B, (X.dA, X.dB), (Y.dA, Y.dB))
        if self.kind == "master":
            return omega_master(self.m, X, Y)
        if self.kind == "pencil":
            return omega_pencil(self.m, self.z, X, Y)
        raise ValueError(self.kind)


# ---------------------------------------------------------------------------
# frames, matrices and residuals


def tangent_frame(m):
    """Deterministic spanning frame of T_m M: (e_a A, 0, 0), (0, e_a B, 0), coordinate directions in v."""
    n, d = m.n, m.d
    basis = matlie.orthonormal_basis(n)
    out = []
    zA = np.zeros((n, n), complex)
    zV = np.zeros((d, n), complex)
    for e in basis:
        out.append(TangentVec(e @ m.A, zA, zV))
    for e in basis:
        out.append(TangentVec(zA, e @ m.B, zV))
    for a in range(d):
        for i in range(n):
            for ph in (1.0, 1j):
                W = zV.copy()
                W[a, i] = ph
                out.append(TangentVec(zA, zA, W))
    return out


def _pair_features(m, z, X):
    """Terms (c, f(X), g(X)) with omega_z(X, Y) = Re sum c (f(X).g(Y) - f(Y).g(X)).

    Matrix features are flattened so that tr(F G) = sum(F.ravel() * G.T.ravel()).
    """
    out = []

    def mat(c, F, G):
        out.append((c, F.ravel(), G.T.ravel()))

    # internally fused double
    A, B = m.A, m.B
    Ai, Bi = np.linalg.inv(A), np.linalg.inv(B)
    ABi, BAi = np.linalg.inv(A @ B), np.linalg.inv(B @ A)
    dA, dB = X.dA, X.dB
    mat(0.5, Ai @ dA, dB @ Bi)
    mat(0.5, dA @ Ai, Bi @ dB)
    mat(-0.5, ABi @ (dA @ B + A @ dB), BAi @ (dB @ A + B @ dA))
    # balls
    for a in range(m.d):
        v, w, x = m.V[a], X.dV[a], m.x[a]
        r2 = float(np.real(np.vdot(v, v)))
        s_ = x * r2
        out.append((1j * x * sinc(s_), w, w.conj()))
        if r2 >= SMALL_V**2:
            out.append((1j * x * x * sinc_defect(s_), np.atleast_1d(np.vdot(v, w)), np.atleast_1d(v @ w.conj())))
    # fusion
    for a in range(m.d):
        mat(0.5, pullback_theta(m, X, "L", upto=a), pullback_theta(m, X, "R", only_ball=a))
    # omega~_z
    if z is not None and m.d >= 2:
        dX = 2.0 * np.real(np.sum(m.V.conj() * X.dV, axis=1))
        for (a, b), zab in zip(z.pairs(), z.values):
            out.append((m.x[a] * m.x[b] * zab, np.atleast_1d(dX[a]), np.atleast_1d(dX[b])))
    return out


def omega_matrix(m, z=None):
    """Omega[k, l] = omega_z(e_k, e_l) on the real chart basis (ambient extension)."""
    ch = chart_of(m)
    feats = [_pair_features(m, z, ch.basis_tangent(k)) for k in range(ch.dim)]
    Om = np.zeros((ch.dim, ch.dim))
    for j, (c, _, _) in enumerate(feats[0]):
        F = np.array([f[j][1] for f in feats])
        G = np.array([f[j][2] for f in feats])
        Om += np.real(c * (F @ G.T - G @ F.T))
    return Om


def compat_operator_residual(m, z=None, sign=-1.0):
    """max over the tangent frame of | P_sharp(omega_flat X) - X + 1/4 (Phi^*(theta^L - theta^R)(X))_M |."""
    ch = chart_of(m)
    P = assemble_P(m, BivectorKind.standard(z))
    Om = omega_matrix(m, z)
    err = 0.0
    for X in tangent_frame(m):
        xv = ch.vector_of(X)
        alpha = xv @ Om  # alpha_l = omega(X, e_l)
        lhs = sign * (P @ alpha)  # sign=-1 gives P^t alpha
        diff = pullback_theta(m, X, "L") - pullback_theta(m, X, "R")
        rhs = xv - 0.25 * ch.vector_of(xi_action(m, diff))
        err = max(err, float(np.max(np.abs(lhs - rhs))))
    return err


def compat_residual(m, z=None, kind=None):
    """Compatibility residual of (P_z, omega_z) on the tangent frame."""
    if kind is not None and kind.tag != "standard":
        raise ValueError("the degenerate structure carries no compatible 2-form")
    return compat_operator_residual(m, z)


def b2_residual(m, z=None):
    """max_{a, Y} | omega_z((e_a)_M, Y) - 1/2 <e_a, Phi^*(theta^R + theta^L)(Y)> |, <,> = -tr."""
    err = 0.0
    basis = matlie.orthonormal_basis(m.n)
    frame = tangent_frame(m)
    for e in basis:
        Xi = xi_action(m, e)
        for Y in frame:
            lhs = omega_pencil(m, z, Xi, Y)
            th = pullback_theta(m, Y, "R") + pullback_theta(m, Y, "L")
            rhs = 0.5 * float(np.real(-np.trace(e @ th)))
            err = max(err, abs(lhs - rhs))
    return err


def theta_fd_residual(m, X, h=1e-6, which="L"):
    """Analytic pullback_theta vs central differences of the moment map."""
    mp = MPoint(m.A + h * X.dA, m.B + h * X.dB, m.V + h * X.dV, m.x)
    mm = MPoint(m.A - h * X.dA, m.B - h * X.dB, m.V - h * X.dV, m.x)
    dPhi = (moment_map(mp) - moment_map(mm)) / (2 * h)
    Phi = moment_map(m)
    Pi = np.linalg.inv(Phi)
    fd = Pi @ dPhi if which == "L" else dPhi @ Pi
    return float(np.max(np.abs(fd - pullback_theta(m, X, which))))


def invariance_residual(form, m, X, Y, g):
    """|omega_{g.m}(g.X, g.Y) - omega_m(X, Y)| for a TwoFormEval factory ``form(m)``."""
    from .phasespace import act

    gi = g.conj().T

    def push(T):
        return TangentVec(g @ T.dA @ gi, g @ T.dB @ gi, (g @ T.dV.T).T)

    return abs(form(act(g, m))(push(X), push(Y)) - form(m)(X, Y))
