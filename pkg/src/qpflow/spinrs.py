"""Points of the leaf Phi^-1(e^{i gamma} 1), spin data and the spin Ruijsenaars-Schneider equations.

Slice points on the leaf satisfy Q A Q^-1 = e^{-i gamma}(A + F) with F = sum_a v_a w_a^+.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matlie
from .dynamics import (
    ZETA_HALF,
    FlowResult,
    RegularityLost,
    SlicePoint,
    gauge_fix,
    reduced_vf,
)
from .matlie import ClassFnSpec
from .phasespace import BallExit, MPoint, moment_map, random_ball_vector, rank1_exp
from .scalars import c_fn

ROOT_TOL = 1e-9
POLE_TOL = 1e-8


class NotConverged(RuntimeError):
    """Commutator solver exhausted its budget; ``best`` holds (A, B, residual)."""

    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


class InfeasibleRescale(ValueError):
    """No admissible radius for v_1 satisfies the determinant constraint."""


class ReconstructionFailed(ValueError):
    """The slice point is not on the leaf (A_kl reconstruction fails)."""


class PotentialPole(ValueError):
    """Argument of the potential V too close to a pole."""


class ConstraintDrift(RuntimeError):
    """Leaf constraint violated beyond tolerance during integration."""


@dataclass(frozen=True)
class LeafSpec:
    gamma: float
    n: int
    d: int
    x: tuple = ()

    def __post_init__(self):
        x = tuple(float(t) for t in self.x) if len(self.x) else (1.0,) * self.d
        object.__setattr__(self, "x", x)
        if len(x) != self.d or any(t == 0 for t in x):
            raise ValueError("need d nonzero ball parameters")
        if not (0 < self.gamma < 2 * np.pi):
            raise ValueError("gamma must lie in (0, 2 pi)")
        for k in range(1, self.n + 1):
            r = np.mod(k * self.gamma, 2 * np.pi)
            if min(r, 2 * np.pi - r) < ROOT_TOL:
                raise ValueError(f"k gamma is a multiple of 2 pi for k={k}")

    @property
    def Gamma(self):
        """n gamma reduced to [0, 2 pi)."""
        return float(np.mod(self.n * self.gamma, 2 * np.pi))


# ---------------------------------------------------------------------------
# commutator solver


def _commutator(A, B):
    return A @ B @ matlie.dagger(A) @ matlie.dagger(B)


def _comm_grad(A, B, U):
    """Riemannian gradient of ||A B A^-1 B^-1 - U||^2 for the retractions A e^X, B e^Y."""
    Ai, Bi = matlie.dagger(A), matlie.dagger(B)
    R = _commutator(A, B) - U

    def term(P, Q):
        return 2.0 * matlie.dagger(P) @ R @ matlie.dagger(Q)

    GA = term(A, B @ Ai @ Bi) - term(A @ B, Ai @ Bi)
    GB = term(A @ B, Ai @ Bi) - term(A @ B @ Ai, Bi)
    proj = lambda Z: 0.5 * (Z - matlie.dagger(Z))
    return proj(GA), proj(GB), float(np.linalg.norm(R) ** 2)


def _comm_jacobian(A, B, basis):
    """Real Jacobian of vec(A B A^-1 B^-1) w.r.t. (X, Y) coordinates in the u(n) basis."""
    Ai, Bi = matlie.dagger(A), matlie.dagger(B)
    cols = []
    for e in basis:
        d = A @ e @ B @ Ai @ Bi - A @ B @ e @ Ai @ Bi
        cols.append(np.concatenate([d.real.ravel(), d.imag.ravel()]))
    for e in basis:
        d = A @ B @ e @ Ai @ Bi - A @ B @ Ai @ e @ Bi
        cols.append(np.concatenate([d.real.ravel(), d.imag.ravel()]))
    return np.array(cols).T


def _descent(A, B, U, iters, target):
    f = None
    step = 1.0
    for _ in range(iters):
        GA, GB, f = _comm_grad(A, B, U)
        if f < target:
            break
        g2 = np.linalg.norm(GA) ** 2 + np.linalg.norm(GB) ** 2
        if g2 < 1e-30:
            break
        t = min(step * 2.0, 4.0)
        while t > 1e-12:
            An = A @ matlie.mat_exp(-t * GA)
            Bn = B @ matlie.mat_exp(-t * GB)
            fn = float(np.linalg.norm(_commutator(An, Bn) - U) ** 2)
            if fn <= f - 1e-4 * t * g2:  # Armijo
                break
            t *= 0.5
        A, B, step = An, Bn, t
    return A, B


def _polish(A, B, U, basis, iters=50, tol=1e-13):
    lam = 1e-6
    res = np.linalg.norm(_commutator(A, B) - U)
    for _ in range(iters):
        if res <= tol:
            break
        R = _commutator(A, B) - U
        r = np.concatenate([R.real.ravel(), R.imag.ravel()])
        J = _comm_jacobian(A, B, basis)
        JtJ = J.T @ J
        step = np.linalg.solve(JtJ + lam * np.eye(JtJ.shape[0]), -J.T @ r)
        k = len(basis)
        X = np.einsum("a,aij->ij", step[:k], basis)
        Y = np.einsum("a,aij->ij", step[k:], basis)
        An, Bn = A @ matlie.mat_exp(X), B @ matlie.mat_exp(Y)
        rn = np.linalg.norm(_commutator(An, Bn) - U)
        if rn < res:
            A, B, res = An, Bn, rn
            lam = max(lam * 0.1, 1e-15)
        else:
            lam *= 10.0
            if lam > 1e6:
                break
    return A, B, res


def solve_commutator(U, seed=None, tol=1e-10, max_iter=20, descent_iters=300):
    """Find unitary A, B with A B A^-1 B^-1 = U for U in SU(n).

    Riemannian gradient descent with Armijo backtracking from random Haar starts, followed by
    a damped Gauss-Newton polish; up to ``max_iter`` restarts.  Returns (A, B, residual).
    """
    U = np.asarray(U, dtype=complex)
    n = U.shape[0]
    if abs(np.linalg.det(U) - 1.0) > 1e-9:
        raise ValueError("target must have determinant 1")
    if not matlie.is_unitary(U, 1e-9):
        raise ValueError("target must be unitary")
    I = np.eye(n, dtype=complex)
    res0 = float(np.linalg.norm(I - U))
    if res0 <= tol:
        return I, I.copy(), res0
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    basis = matlie.orthonormal_basis(n)
    best = (I, I, res0)
    for _ in range(max_iter):
        A = matlie.haar_random(n, rng)
        B = matlie.haar_random(n, rng)
        A, B = _descent(A, B, U, descent_iters, 1e-6)
        A, B, res = _polish(A, B, U, basis)
        A, B = matlie.polar_unitary(A), matlie.polar_unitary(B)
        res = float(np.linalg.norm(_commutator(A, B) - U))
        if res < best[2]:
            best = (A, B, res)
        if res <= tol:
            return A, B, res
    raise NotConverged(f"best residual {best[2]:.3e}", best)


# ---------------------------------------------------------------------------
# leaf points


def d1_radius2(gamma, n, x1):
    """Forced |v_1|^2 on the leaf for d = 1: Gamma/x1 (x1 > 0) or (Gamma - 2 pi)/x1 (x1 < 0)."""
    G = float(np.mod(n * gamma, 2 * np.pi))
    return G / x1 if x1 > 0 else (G - 2 * np.pi) / x1


def build_leaf_point(spec, seed=None, tol=1e-10, max_resample=20, require_regular=True):
    """Random point of Phi^-1(e^{i gamma} 1) with the given ball parameters.

    Samples v_2..v_d, fixes |v_1|^2 from the determinant constraint, then solves the
    commutator equation for U = e^{i gamma}(E_1 ... E_d)^-1.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n, d, x = spec.n, spec.d, np.asarray(spec.x)
    for _ in range(max_resample):
        V = np.zeros((d, n), dtype=complex)
        for a in range(1, d):
            V[a] = random_ball_vector(n, x[a], rng, margin=0.05)
        rest = sum(x[a] * np.vdot(V[a], V[a]).real for a in range(1, d))
        r = float(np.mod(spec.Gamma - rest, 2 * np.pi))
        s1 = r if x[0] > 0 else r - 2 * np.pi
        if abs(s1) < 1e-6 or 2 * np.pi - abs(s1) < 1e-6:
            continue
        u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        V[0] = u / np.linalg.norm(u) * np.sqrt(s1 / x[0])
        E = np.eye(n, dtype=complex)
        for a in range(d):
            E = E @ rank1_exp(V[a], x[a])
        U = np.exp(1j * spec.gamma) * np.linalg.inv(E)
        if abs(np.linalg.det(U) - 1.0) > 1e-9:
            raise InfeasibleRescale("determinant constraint not met")
        A, B, res = solve_commutator(U, rng, tol)
        m = MPoint(A, B, V, x)
        if require_regular and matlie.min_phase_gap(np.angle(np.linalg.eigvals(B))) < 1e-3:
            continue
        return m
    raise InfeasibleRescale("could not construct a regular leaf point")


def leaf_residual(m, gamma):
    return float(np.linalg.norm(moment_map(m) - np.exp(1j * gamma) * np.eye(m.n)))


def det_constraint_residual(m, gamma):
    """| exp(i sum x_a |v_a|^2) - exp(i n gamma) |."""
    tot = float(np.sum(m.ball_args()))
    return abs(np.exp(1j * tot) - np.exp(1j * m.n * gamma))


def leaf_slice_point(spec, seed=None):
    m = build_leaf_point(spec, seed)
    s, _ = gauge_fix(m)
    return s


# ---------------------------------------------------------------------------
# spin data


@dataclass(frozen=True)
class SpinData:
    W: np.ndarray  # (d, n): row a is w_a
    F: np.ndarray
    telescoping: float
    reconstruction: float


def w_vectors(A, V, x, imag_c_arg=False):
    """w_a with w_a^+ = i x_a c(x_a |v_a|^2) v_a^+ E_{a+1} ... E_d A.

    ``imag_c_arg=True`` uses c(i x_a |v_a|^2) instead, which breaks the telescoping identity.
    """
    d, n = V.shape
    W = np.zeros((d, n), dtype=complex)
    tail = A.copy()
    for a in range(d - 1, -1, -1):
        s = x[a] * float(np.real(np.vdot(V[a], V[a])))
        c = c_fn(1j * s) if imag_c_arg else c_fn(s)
        wdag = 1j * x[a] * c * (V[a].conj() @ tail)
        W[a] = wdag.conj()
        tail = rank1_exp(V[a], x[a]) @ tail
    return W


def spin_F(V, W):
    return V.T @ W.conj()


def reconstruct_A(q, F, gamma):
    Qd = np.exp(1j * np.asarray(q))
    den = np.exp(1j * gamma) * Qd[:, None] / Qd[None, :] - 1.0
    if np.min(np.abs(den)) < POLE_TOL:
        raise matlie.NearDegenerate("e^{i gamma} Q_k / Q_l too close to 1")
    return F / den


def spin_data(s, gamma, imag_c_arg=False, check=True):
    W = w_vectors(s.A, s.V, s.x, imag_c_arg)
    F = spin_F(s.V, W)
    E = np.eye(s.n, dtype=complex)
    for a in range(s.d):
        E = E @ rank1_exp(s.V[a], s.x[a])
    tele = float(np.max(np.abs(F - (E - np.eye(s.n)) @ s.A)))
    rec = float(np.max(np.abs(reconstruct_A(s.q, F, gamma) - s.A)))
    if check and rec > 1e-7:
        raise ReconstructionFailed(f"A reconstruction residual {rec:.3e}")
    return SpinData(W, F, tele, rec)


def moment_condition_residual(s, gamma):
    """| Q A Q^-1 - e^{-i gamma}(A + F) |."""
    sd = spin_data(s, gamma, check=False)
    Q = s.Q
    return float(np.max(np.abs(Q @ s.A @ Q.conj() - np.exp(-1j * gamma) * (s.A + sd.F))))


# ---------------------------------------------------------------------------
# equations of motion


def potential(q, gamma):
    """V(q) = cot(q) - cot(q + gamma/2)."""
    q = np.asarray(q, dtype=complex)
    for arg in (q, q + gamma / 2):
        if np.any(np.abs(np.sin(arg)) < POLE_TOL):
            raise PotentialPole("potential evaluated at a pole")
    return 1.0 / np.tan(q) - 1.0 / np.tan(q + gamma / 2)


def potential_expanded(q, gamma):
    """Same function via sin(gamma/2) / (sin q sin(q + gamma/2))."""
    return np.sin(gamma / 2) / (np.sin(q) * np.sin(q + gamma / 2))


def _cot_kernel(q):
    n = len(q)
    diff = np.asarray(q)[:, None] - np.asarray(q)[None, :]
    K = np.zeros((n, n), dtype=complex)
    off = ~np.eye(n, dtype=bool)
    if np.any(np.abs(np.sin(0.5 * diff[off])) < POLE_TOL):
        raise matlie.NearDegenerate("coinciding positions")
    K[off] = 1.0 - 1j / np.tan(0.5 * diff[off])
    return K


@dataclass(frozen=True)
class SpinVelocity:
    qdot: np.ndarray
    vdot: np.ndarray  # (d, n)
    wdot: np.ndarray  # (d, n); for eom_kz this holds d/dt conj(w)

    def __sub__(self, o):
        return SpinVelocity(self.qdot - o.qdot, self.vdot - o.vdot, self.wdot - o.wdot)

    def __add__(self, o):
        return SpinVelocity(self.qdot + o.qdot, self.vdot + o.vdot, self.wdot + o.wdot)

    def __mul__(self, c):
        return SpinVelocity(c * self.qdot, c * self.vdot, c * self.wdot)

    __rmul__ = __mul__

    def conj_w(self):
        return SpinVelocity(self.qdot, self.vdot, self.wdot.conj())

    def maxabs(self):
        return float(max(np.max(np.abs(self.qdot)), np.max(np.abs(self.vdot)), np.max(np.abs(self.wdot))))


def _eom(s, gamma, which, qdot_from_F=False):
    # qdot_from_F=True reads the position velocity off F_jj and conj(F_jj) instead of A_jj
    sd = spin_data(s, gamma, check=False)
    A, F = s.A, sd.F
    K = _cot_kernel(s.q)
    e = np.exp(1j * gamma) - 1.0
    Fjj = np.diag(F)
    if which == "re":
        M = 0.25 * K * (A - A.conj().T)
        a = Fjj / e if qdot_from_F else np.diag(A)
        qdot = -0.5j * (a - np.conj(Fjj) if qdot_from_F else a - np.conj(a))
    else:
        M = -0.25j * K * (A + A.conj().T)
        a = Fjj / e if qdot_from_F else np.diag(A)
        qdot = -0.5 * (a + np.conj(Fjj) if qdot_from_F else a + np.conj(a))
    np.fill_diagonal(M, 0.0)
    return SpinVelocity(qdot, (M @ s.V.T).T, (M @ sd.W.T).T)


def eom_re(s, gamma, qdot_from_F=False):
    """Evolution under Y for h = Re tr with zeta = -1/2 (grad h)_t."""
    return _eom(s, gamma, "re", qdot_from_F)


def eom_im(s, gamma, qdot_from_F=False):
    """Evolution under Y for h = Im tr with zeta = -1/2 (grad h)_t."""
    return _eom(s, gamma, "im", qdot_from_F)


def eom_kz(s, gamma, v_arg="half"):
    """Complexified spin RS equations: q' = -2 i F_jj, v' and conj(w)' with the potential V.

    ``v_arg="half"`` evaluates V((q_j - q_k)/2); ``"full"`` evaluates V(q_j - q_k).
    """
    sd = spin_data(s, gamma, check=False)
    return _kz_rhs(s.q, s.V, sd.W.conj(), gamma, v_arg)


def _kz_rhs(q, V, Wb, gamma, v_arg="half"):
    n = len(q)
    F = V.T @ Wb  # F_jk = sum_a v_aj conj(w_ak)
    diff = np.asarray(q)[:, None] - np.asarray(q)[None, :]
    scale = 0.5 if v_arg == "half" else 1.0
    off = ~np.eye(n, dtype=bool)
    Vjk = np.zeros((n, n), dtype=complex)
    Vjk[off] = potential(scale * diff[off], gamma)
    qdot = -2j * np.diag(F)
    vdot = -1j * (((F * Vjk)) @ V.T).T  # sum_k F_jk V_jk v_k
    # conj(w)_j' = i sum_k conj(w)_k F_kj V((q_k - q_j)/2)
    wbdot = 1j * ((F * Vjk).T @ Wb.T).T
    return SpinVelocity(qdot, vdot, wbdot)


def kz_combination_residual(s, gamma, v_arg="half", qdot_from_F=False):
    """| eom_kz - 2(e^{i gamma} - 1)(eom_re + i eom_im) | with w mapped to conj(w)."""
    e = np.exp(1j * gamma) - 1.0
    re = eom_re(s, gamma, qdot_from_F)
    im = eom_im(s, gamma, qdot_from_F)
    lhs = eom_kz(s, gamma, v_arg)
    qdot = 2 * e * (re.qdot + 1j * im.qdot)
    vdot = 2 * e * (re.vdot + 1j * im.vdot)
    wbdot = 2 * e * (re.wdot.conj() + 1j * im.wdot.conj())
    return (lhs - SpinVelocity(qdot, vdot, wbdot)).maxabs()


def kernel_identity_residual(s, gamma, v_arg="half"):
    """max_{j != k} | [1 - i cot((q_j - q_k)/2)] A_jk + i (e^{i gamma} - 1)^-1 V(arg) F_jk |."""
    sd = spin_data(s, gamma, check=False)
    K = _cot_kernel(s.q)
    n = s.n
    diff = s.q[:, None] - s.q[None, :]
    scale = 0.5 if v_arg == "half" else 1.0
    off = ~np.eye(n, dtype=bool)
    e = np.exp(1j * gamma) - 1.0
    lhs = K[off] * s.A[off]
    rhs = -1j / e * potential(scale * diff[off], gamma) * sd.F[off]
    return float(np.max(np.abs(lhs - rhs))) if n > 1 else 0.0


def eom_vs_reduced_residual(s, gamma, which="re", qdot_from_F=False):
    """Compare eom_re/eom_im with dynamics.reduced_vf (h = Re tr / Im tr, zeta = -1/2 (grad h)_t)."""
    h = ClassFnSpec.re_tr(1) if which == "re" else ClassFnSpec.im_tr(1)
    W = reduced_vf(h, s, ZETA_HALF)
    e = eom_re(s, gamma, qdot_from_F) if which == "re" else eom_im(s, gamma, qdot_from_F)
    # w evolves by the same matrix as v: read it off the reduced field's action on v
    return float(max(np.max(np.abs(e.qdot - W.dq)), np.max(np.abs(e.vdot - W.dV))))


def qddot_closed(q, F, gamma):
    """q''_j = -2 sum_{k != j} F_jk F_kj [V((q_j - q_k)/2) - V((q_k - q_j)/2)]."""
    n = len(q)
    diff = np.asarray(q)[:, None] - np.asarray(q)[None, :]
    off = ~np.eye(n, dtype=bool)
    D = np.zeros((n, n), dtype=complex)
    D[off] = potential(0.5 * diff[off], gamma) - potential(-0.5 * diff[off], gamma)
    return -2.0 * np.sum(F * F.T * D, axis=1)


def _kz_step(state, dt, gamma):
    q, V, Wb = state

    def f(q, V, Wb):
        r = _kz_rhs(q, V, Wb, gamma)
        return r.qdot, r.vdot, r.wdot

    k1 = f(q, V, Wb)
    k2 = f(*(a + 0.5 * dt * b for a, b in zip(state, k1)))
    k3 = f(*(a + 0.5 * dt * b for a, b in zip(state, k2)))
    k4 = f(*(a + dt * b for a, b in zip(state, k3)))
    return tuple(a + dt / 6.0 * (b + 2 * c + 2 * d_ + e) for a, b, c, d_, e in zip(state, k1, k2, k3, k4))


def accel_residual(s, gamma, delta=1e-3, steps=4):
    """| closed-form q'' - finite difference of q' along the holomorphic flow |.

    q' is sampled at t = +-delta, +-2 delta by RK4 integrations of the complexified
    system and differentiated with the fourth-order central stencil.
    """
    sd = spin_data(s, gamma, check=False)
    state0 = (s.q.astype(complex), s.V.copy(), sd.W.conj())

    def qdot_at(t):
        st = state0
        h = t / steps
        for _ in range(steps):
            st = _kz_step(st, h, gamma)
        return _kz_rhs(*st, gamma).qdot

    fd = (-qdot_at(2 * delta) + 8 * qdot_at(delta) - 8 * qdot_at(-delta) + qdot_at(-2 * delta)) / (12 * delta)
    closed = qddot_closed(s.q, sd.F, gamma)
    return float(np.max(np.abs(fd - closed)))


# ---------------------------------------------------------------------------
# integration on the leaf


def _slice_step(h, s, dt):
    def add(s, W, c):
        return SlicePoint(s.A + c * W.dA, s.q + c * W.dq, s.V + c * W.dV, s.x)

    k1 = reduced_vf(h, s)
    k2 = reduced_vf(h, add(s, k1, 0.5 * dt))
    k3 = reduced_vf(h, add(s, k2, 0.5 * dt))
    k4 = reduced_vf(h, add(s, k3, dt))
    return SlicePoint(
        s.A + dt / 6 * (k1.dA + 2 * k2.dA + 2 * k3.dA + k4.dA),
        s.q + dt / 6 * (k1.dq + 2 * k2.dq + 2 * k3.dq + k4.dq),
        s.V + dt / 6 * (k1.dV + 2 * k2.dV + 2 * k3.dV + k4.dV),
        s.x,
    )


def integrate_rs(s0, gamma, T, dt, h=None, drift_tol=1e-5, record_every=1):
    """RK4 for the real spin RS flow (default h = Re tr) with leaf monitoring.

    Logs: leaf (||Phi - e^{i gamma} 1||), det (determinant constraint), trF, spectrum
    (drift of the eigenphases of A), ball_margin, min_gap.
    """
    h = ClassFnSpec.re_tr(1) if h is None else h
    nsteps = int(round(T / dt))
    s = s0
    spec0 = np.sort(np.angle(np.linalg.eigvals(s0.A)))
    trF0 = np.trace(spin_data(s0, gamma, check=False).F)
    tot0 = float(np.sum(s0.x * np.sum(np.abs(s0.V) ** 2, axis=1)))
    times, pts = [], []
    log = {"leaf": [], "det": [], "trF": [], "spectrum": [], "ball_margin": [], "min_gap": []}

    def record(t, s):
        m = s.to_mpoint()
        times.append(t)
        pts.append(s)
        log["leaf"].append(leaf_residual(m, gamma))
        tot = float(np.sum(s.x * np.sum(np.abs(s.V) ** 2, axis=1)))
        log["det"].append(abs(np.angle(np.exp(1j * (tot - tot0)))))
        log["trF"].append(abs(np.trace(spin_data(s, gamma, check=False).F) - trF0))
        log["spectrum"].append(float(np.max(np.abs(np.sort(np.angle(np.linalg.eigvals(s.A))) - spec0))))
        log["ball_margin"].append(m.ball_margin())
        log["min_gap"].append(s.min_gap())

    record(0.0, s)
    truncated, msg = False, ""
    for k in range(nsteps):
        try:
            s = _slice_step(h, s, dt)
            if s.min_gap() < matlie.DELTA_REG:
                raise RegularityLost("positions collided")
            if s.to_mpoint().ball_margin() < 0:
                raise BallExit("spin left its ball")
            if (k + 1) % record_every == 0 or k + 1 == nsteps:
                record((k + 1) * dt, s)
                if log["leaf"][-1] > drift_tol:
                    raise ConstraintDrift(f"leaf residual {log['leaf'][-1]:.3e}")
        except (RegularityLost, BallExit, ConstraintDrift, matlie.NearDegenerate) as exc:
            truncated, msg = True, str(exc)
            break
    return FlowResult(np.array(times), pts, {k: np.array(v) for k, v in log.items()}, truncated, msg)


# ---------------------------------------------------------------------------
# non-compact family


def noncompact_family(eps, mu, x1, x2, d=2, seed=None, tol=1e-10):
    """Points m(eps) on Phi^-1(mu) with E_1 E_2 = 1 whose v_2 approaches the ball boundary."""
    if not (0 <= eps < np.pi):
        raise ValueError("need 0 <= eps < pi")
    if d < 2:
        raise ValueError("need d >= 2")
    mu = np.asarray(mu, dtype=complex)
    n = mu.shape[0]
    s = np.sign(x1 * x2)
    V = np.zeros((d, n), dtype=complex)
    V[0, 0] = abs(x1) ** -0.5 * np.sqrt(np.pi - s * eps)
    V[1, 0] = abs(x2) ** -0.5 * np.sqrt(np.pi + eps)
    x = np.ones(d)
    x[0], x[1] = x1, x2
    A, B, _ = solve_commutator(mu, seed, tol)
    return MPoint(A, B, V, x)


def family_identity_residual(m):
    """| E_1 E_2 - 1 | for the first two balls."""
    E = rank1_exp(m.V[0], m.x[0]) @ rank1_exp(m.V[1], m.x[1])
    return float(np.max(np.abs(E - np.eye(m.n))))
