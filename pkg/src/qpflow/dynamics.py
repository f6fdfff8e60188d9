"""Master flows, reduced vector fields on the gauge slice, and the quadrature integrator.

The slice consists of points (A, Q, v_1..v_d) with Q = diag(exp(i q_j)) regular.
Reduced vector fields are stored as :class:`SliceTangent` (dA, dq, dV) where dq is the
real velocity of the phases, i.e. dQ = i Q diag(dq).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matlie
from .matlie import ClassFnSpec, grad_class_fn
from .phasespace import MPoint, TangentVec, act, moment_map, psi_map

ZETA_ZERO = "zero"
ZETA_HALF = "minus_half_diag"


class RegularityLost(RuntimeError):
    """B(t) or Q(t) left the regular part of the torus."""


class StepRejected(RuntimeError):
    """Unitary reprojection failed during integration."""


# ---------------------------------------------------------------------------
# slice points


@dataclass(frozen=True)
class SlicePoint:
    """Gauge-fixed point (A, Q = diag(exp(i q)), v_1..v_d) with ball parameters x."""

    A: np.ndarray
    q: np.ndarray
    V: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", np.asarray(self.A, dtype=complex))
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        V = np.asarray(self.V, dtype=complex)
        object.__setattr__(self, "V", V[None, :] if V.ndim == 1 else V)
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def d(self):
        return self.V.shape[0]

    @property
    def Qdiag(self):
        return np.exp(1j * self.q)

    @property
    def Q(self):
        return np.diag(self.Qdiag)

    def to_mpoint(self):
        return MPoint(self.A, self.Q, self.V, self.x)

    def min_gap(self):
        return matlie.min_phase_gap(self.q)

    def replace(self, **kw):
        f = dict(A=self.A, q=self.q, V=self.V, x=self.x)
        f.update(kw)
        return SlicePoint(**f)


@dataclass(frozen=True)
class SliceTangent:
    dA: np.ndarray
    dq: np.ndarray
    dV: np.ndarray

    def __add__(self, o):
        return SliceTangent(self.dA + o.dA, self.dq + o.dq, self.dV + o.dV)

    def __mul__(self, s):
        return SliceTangent(s * self.dA, s * self.dq, s * self.dV)

    __rmul__ = __mul__

    def as_tangent(self, s):
        """Ambient TangentVec with dB = i Q diag(dq)."""
        return TangentVec(self.dA, 1j * s.Q @ np.diag(self.dq), self.dV)


def gauge_fix(m, delta=matlie.DELTA_REG):
    """Return (s, g) with act(g, m) = s on the slice (Q = g B g^-1 diagonal, sorted phases)."""
    Q, C, degenerate = matlie.unitary_eig(m.B, delta)
    if degenerate:
        raise matlie.DegenerateSpectrum("B does not have a regular spectrum")
    g = matlie.dagger(C)
    mg = act(g, m)
    return SlicePoint(mg.A, Q.q, mg.V, m.x), g


def torus_align(s, ref_ball=0):
    """Remove the residual torus gauge: make each component of v_ref real nonnegative."""
    v = s.V[ref_ball]
    ph = np.where(np.abs(v) > 1e-300, np.abs(v) / np.where(v == 0, 1, v), 1.0)
    tau = np.diag(ph)
    taui = tau.conj()
    return s.replace(A=tau @ s.A @ taui, V=(tau @ s.V.T).T)


def sort_slice(s):
    """Permute the slice coordinates so that the phases increase in (-pi, pi]."""
    q = np.angle(np.exp(1j * s.q))
    order = np.argsort(q, kind="stable")
    P = np.eye(s.n)[order]
    return s.replace(A=P @ s.A @ P.T, q=q[order], V=(P @ s.V.T).T)


def slice_distance(s1, s2):
    """Gauge-invariant distance between two slice points (permutation and torus removed)."""
    a, b = torus_align(sort_slice(s1)), torus_align(sort_slice(s2))
    dq = np.angle(np.exp(1j * (a.q - b.q)))
    return float(max(np.max(np.abs(a.A - b.A)), np.max(np.abs(dq)), np.max(np.abs(a.V - b.V))))


def invariant_signature(m, kmax=None):
    """Complete invariants used for trajectory comparison.

    Sorted eigenphases of A and of B, |v_alpha|^2, and I^k_{ab} for 0 <= k <= kmax.
    """
    A, B, V = m.A, m.B, m.V
    kmax = m.n if kmax is None else kmax
    out = [np.sort(np.angle(np.linalg.eigvals(A))), np.sort(np.angle(np.linalg.eigvals(B)))]
    out.append(np.real(np.sum(np.abs(V) ** 2, axis=1)))
    Ak = np.eye(m.n, dtype=complex)
    for _ in range(kmax + 1):
        I = V.conj() @ Ak @ V.T
        out.append(I.real.ravel())
        out.append(I.imag.ravel())
        Ak = Ak @ A
    return np.concatenate(out)


# ---------------------------------------------------------------------------
# master flow


def master_flow(h, m0, t):
    """Exact flow of H = h o E_1: (A0, B0 exp(-t grad h(A0)), v0)."""
    g = grad_class_fn(h, m0.A)
    return m0.replace(B=m0.B @ matlie.mat_exp(-t * g))


def master_flow_B(h, m0, t):
    """Flow of h o E_2: (A0 exp(t grad h(B0)), B0, v0)."""
    g = grad_class_fn(h, m0.B)
    return m0.replace(A=m0.A @ matlie.mat_exp(t * g))


def commuting_flows_residual(h1, h2, m0, t1, t2):
    a = master_flow(h1, master_flow(h2, m0, t2), t1)
    b = master_flow(h2, master_flow(h1, m0, t1), t2)
    return float(max(np.max(np.abs(a.A - b.A)), np.max(np.abs(a.B - b.B)), np.max(np.abs(a.V - b.V))))


@dataclass
class FlowResult:
    """Sampled trajectory with a conservation log (dict of name -> array over samples)."""

    times: np.ndarray
    points: list
    log: dict = field(default_factory=dict)
    truncated: bool = False
    message: str = ""

    def max_drift(self, key):
        return float(np.max(self.log[key])) if len(self.log.get(key, [])) else 0.0


def _word_values(m, words):
    from .bivector import word_wirtinger

    return np.array([word_wirtinger(m, w)[0] for w in words])


def trace_words(d, max_len=4):
    """Words over {A, A^-1, B A B^-1, v_a v_b^+} up to length max_len (one representative each)."""
    letters = ["A", "Ai", "Bt", "Bti"] + [("vv", a, b) for a in range(d) for b in range(d)]
    words = [[L] for L in letters]
    frontier = list(words)
    for _ in range(max_len - 1):
        nxt = []
        for w in frontier:
            for L in letters:
                nxt.append(w + [L])
        words.extend(nxt)
        frontier = nxt
    return words


def integrate_master(h, m0, times, words=None):
    """Sample the exact master flow; log Phi, Psi, word and unitarity drift."""
    times = np.asarray(times, dtype=float)
    Phi0 = moment_map(m0)
    Psi0 = psi_map(m0)
    w0 = _word_values(m0, words) if words else None
    pts, log = [], {"phi_drift": [], "psi_drift": [], "word_drift": [], "unitarity": []}
    for t in times:
        m = master_flow(h, m0, t)
        pts.append(m)
        log["phi_drift"].append(float(np.max(np.abs(moment_map(m) - Phi0))))
        pm = psi_map(m)
        log["psi_drift"].append(float(max(np.max(np.abs(pm.A - Psi0.A)), np.max(np.abs(pm.B - Psi0.B)), np.max(np.abs(pm.V - Psi0.V)))))
        log["word_drift"].append(float(np.max(np.abs(_word_values(m, words) - w0))) if words else 0.0)
        log["unitarity"].append(float(max(matlie.unitarity_residual(m.A), matlie.unitarity_residual(m.B))))
    return FlowResult(times, pts, {k: np.array(v) for k, v in log.items()})


# ---------------------------------------------------------------------------
# reduced vector field


def zeta_of(h, A, mode=ZETA_HALF):
    g = grad_class_fn(h, A)
    if mode == ZETA_ZERO:
        return np.zeros_like(g)
    if mode == ZETA_HALF:
        return -0.5 * matlie.project_t(g)
    raise ValueError(f"unknown zeta mode {mode!r}")


def gauge_generator(h, s, zeta_mode=ZETA_HALF):
    """xi = -(R(Q) + 1/2) grad h(A) - zeta, so that W = X_H + ([xi, A], [xi, Q], xi v)."""
    g = grad_class_fn(h, s.A)
    zeta = zeta_of(h, s.A, zeta_mode)
    return -(matlie.rmatrix_apply(s.q, g) + 0.5 * g) - zeta


def reduced_vf(h, s, zeta_mode=ZETA_HALF):
    """Reduced vector field W on the slice for H = h o E_1."""
    g = grad_class_fn(h, s.A)
    zeta = zeta_of(h, s.A, zeta_mode)
    Rg = matlie.rmatrix_apply(s.q, g)
    M = Rg + zeta
    dA = s.A @ M - M @ s.A
    # W^2 = -Q g_t = i Q diag(dq)  =>  dq_j = i g_jj
    dq = np.real(1j * np.diag(g))
    dV = -((Rg + 0.5 * g + zeta) @ s.V.T).T
    return SliceTangent(dA, dq, dV)


def reduced_vs_hamiltonian_residual(h, s, zeta_mode=ZETA_HALF):
    """| W - X_H - ([xi,A],[xi,Q],xi v) | with X_H from the bivector engine."""
    from .bivector import class_pullback, hamiltonian_vf

    m = s.to_mpoint()
    X = hamiltonian_vf(class_pullback(h, "A"), m)
    W = reduced_vf(h, s, zeta_mode).as_tangent(s)
    xi = gauge_generator(h, s, zeta_mode)
    Q = s.Q
    D = W - X - TangentVec(xi @ s.A - s.A @ xi, xi @ Q - Q @ xi, (xi @ s.V.T).T)
    return float(max(np.max(np.abs(D.dA)), np.max(np.abs(D.dB)), np.max(np.abs(D.dV))))


# ---------------------------------------------------------------------------
# quadrature integrator


def _Y_of(C, h, A0, Bt):
    """Right-hand side Y with C' = Y C (off-diagonal only)."""
    Ci = matlie.dagger(C)
    Qm = C @ Bt @ Ci
    Qd = np.diag(Qm)
    g = grad_class_fn(h, C @ A0 @ Ci)
    n = len(Qd)
    Y = np.zeros((n, n), dtype=complex)
    off = ~np.eye(n, dtype=bool)
    ratio = Qd[None, :] / Qd[:, None]  # Q_k / Q_j at [j, k]
    Y[off] = g[off] / (ratio[off] - 1.0)
    return Y


def _B_of(s0, g0, t):
    return s0.Q @ matlie.mat_exp(-t * g0)


def integrate_reduced(h, s0, T, dt, delta=matlie.DELTA_REG, record_every=1):
    """RK4 for C(t) with polar reprojection; returns the slice trajectory.

    Logs: offdiag (max |off-diagonal of Q(t)|), qdot_offdiag (off-diagonal part of Q' Q^-1
    by central differences of the trajectory), spectrum drift of A(t), unitarity of C.
    """
    if dt <= 0 or T < 0:
        raise ValueError("need dt > 0 and T >= 0")
    nsteps = int(round(T / dt))
    g0 = grad_class_fn(h, s0.A)
    A0, V0 = s0.A, s0.V
    spec0 = np.sort(np.angle(np.linalg.eigvals(A0)))
    C = np.eye(s0.n, dtype=complex)
    times, pts = [], []
    log = {"offdiag": [], "spectrum_drift": [], "unitarity": [], "min_gap": []}
    Cs = []

    def record(t, C):
        Bt = _B_of(s0, g0, t)
        Qm = C @ Bt @ matlie.dagger(C)
        qd = np.diag(Qm)
        q = np.angle(qd)
        A = C @ A0 @ matlie.dagger(C)
        pts.append(SlicePoint(A, q, (C @ V0.T).T, s0.x))
        times.append(t)
        Cs.append(C.copy())
        log["offdiag"].append(float(np.max(np.abs(Qm - np.diag(qd)))))
        log["spectrum_drift"].append(float(np.max(np.abs(np.sort(np.angle(np.linalg.eigvals(A))) - spec0))))
        log["unitarity"].append(matlie.unitarity_residual(C))
        log["min_gap"].append(matlie.min_phase_gap(q))

    record(0.0, C)
    truncated, msg = False, ""
    for k in range(nsteps):
        t = k * dt
        try:
            if matlie.min_phase_gap(np.angle(np.linalg.eigvals(_B_of(s0, g0, t + dt)))) < delta:
                raise RegularityLost(f"B(t) not regular at t={t + dt:.6g}")
            B1, Bh, B2 = _B_of(s0, g0, t), _B_of(s0, g0, t + 0.5 * dt), _B_of(s0, g0, t + dt)
            k1 = _Y_of(C, h, A0, B1) @ C
            k2 = _Y_of(C + 0.5 * dt * k1, h, A0, Bh) @ (C + 0.5 * dt * k1)
            k3 = _Y_of(C + 0.5 * dt * k2, h, A0, Bh) @ (C + 0.5 * dt * k2)
            k4 = _Y_of(C + dt * k3, h, A0, B2) @ (C + dt * k3)
            Cn = C + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            C = matlie.polar_unitary(Cn)
            if not np.all(np.isfinite(C)):
                raise StepRejected("non-finite step")
        except (RegularityLost, StepRejected, matlie.NearDegenerate) as exc:
            truncated, msg = True, str(exc)
            break
        if (k + 1) % record_every == 0 or k + 1 == nsteps:
            record((k + 1) * dt, C)
    res = FlowResult(np.array(times), pts, {k: np.array(v) for k, v in log.items()}, truncated, msg)
    res.C = Cs
    return res


def qdot_offdiag_residual(h, s0, T, dt):
    """Off-diagonal part of Q'(t) Q(t)^-1 along the integrated flow, evaluated analytically.

    Q' Q^-1 = Y + C B' B^-1 C^-1 - Q Y Q^-1 with Y = C' C^-1 computed from the state.
    """
    res = integrate_reduced(h, s0, T, dt)
    g0 = grad_class_fn(h, s0.A)
    worst = 0.0
    for t, C in zip(res.times, res.C):
        Bt = _B_of(s0, g0, t)
        Ci = matlie.dagger(C)
        Qm = C @ Bt @ Ci
        Y = _Y_of(C, h, s0.A, Bt)
        dB = Bt @ (-g0)
        QdQi = Y + C @ dB @ np.linalg.inv(Bt) @ Ci - Qm @ Y @ np.linalg.inv(Qm)
        worst = max(worst, float(np.max(np.abs(matlie.project_tperp(QdQi)))))
    return worst, res


def endpoint(h, s0, T, dt):
    res = integrate_reduced(h, s0, T, dt)
    if res.truncated:
        raise RegularityLost(res.message)
    return res.points[-1], res.C[-1]


def rk4_order_ratio(h, s0, T=1.0, dt=0.1):
    """err(dt)/err(dt/2) against a dt/8 reference on C(T)."""
    _, Cref = endpoint(h, s0, T, dt / 8)
    _, C1 = endpoint(h, s0, T, dt)
    _, C2 = endpoint(h, s0, T, dt / 2)
    e1 = np.linalg.norm(C1 - Cref)
    e2 = np.linalg.norm(C2 - Cref)
    return e1 / e2, e1, e2


def master_vs_reduced(h, s0, T=1.0, dt=1e-3):
    """Distance between the gauge-fixed master-flow endpoint and the reduced endpoint."""
    m_end = master_flow(h, s0.to_mpoint(), T)
    s_master, _ = gauge_fix(m_end)
    s_red, _ = endpoint(h, s0, T, dt)
    sig = np.max(np.abs(invariant_signature(m_end) - invariant_signature(s_red.to_mpoint())))
    return max(slice_distance(s_master, s_red), float(sig))
