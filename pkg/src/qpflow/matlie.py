"""Dense complex matrix utilities for U(n) and its Lie algebra u(n).

Conventions used throughout the package:

* inner product on u(n): <xi, zeta> = Re tr(xi zeta^dagger) = -tr(xi zeta);
* orthonormal basis: i E_kk, (E_kl - E_lk)/sqrt(2), i (E_kl + E_lk)/sqrt(2) for k < l;
* the u(n)-valued derivative of a function f on U(n) is defined by
  <xi, grad f(g)> = d/dt f(exp(t xi) g) at t = 0.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

UNITARY_TOL = 1e-10
DELTA_REG = 1e-6


class BranchCut(ValueError):
    """An eigenphase sits on the branch cut of the principal logarithm."""


class NearDegenerate(ValueError):
    """Two diagonal phases are closer than the regularity threshold."""


class DegenerateSpectrum(ValueError):
    """A unitary matrix does not have a regular (simple) spectrum."""


# ---------------------------------------------------------------------------
# basic predicates and inner product


def dagger(M):
    return np.conj(np.swapaxes(M, -1, -2))


def unitarity_residual(U):
    U = np.asarray(U)
    return np.linalg.norm(U @ dagger(U) - np.eye(U.shape[0]))


def is_unitary(U, tol=UNITARY_TOL):
    return unitarity_residual(U) <= tol


def is_antihermitian(xi, tol=UNITARY_TOL):
    return np.linalg.norm(xi + dagger(xi)) <= tol


def inner(xi, zeta):
    """<xi, zeta> = Re tr(xi zeta^dagger)."""
    xi = np.asarray(xi)
    zeta = np.asarray(zeta)
    if xi.shape != zeta.shape:
        raise ValueError(f"dimension mismatch {xi.shape} vs {zeta.shape}")
    return float(np.real(np.sum(xi * np.conj(zeta))))


def bilinear(xi, zeta):
    """Complex-bilinear extension -tr(xi zeta) of the inner product."""
    return -np.trace(np.asarray(xi) @ np.asarray(zeta))


def orthonormal_basis(n):
    """Return the standard orthonormal basis of u(n) as an array of shape (n*n, n, n).

    Ordering: the n diagonal elements i E_kk first, then for each pair k < l
    the pair (E_kl - E_lk)/sqrt(2), i (E_kl + E_lk)/sqrt(2).
    """
    if n < 1:
        raise ValueError("n must be positive")
    basis = []
    for k in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[k, k] = 1j
        basis.append(e)
    s = 1.0 / np.sqrt(2.0)
    for k in range(n):
        for l in range(k + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[k, l] = s
            e[l, k] = -s
            basis.append(e)
            e = np.zeros((n, n), dtype=complex)
            e[k, l] = 1j * s
            e[l, k] = 1j * s
            basis.append(e)
    return np.array(basis)


def structure_constants(basis):
    """C_abc = <e_a, [e_b, e_c]> for a basis array of shape (N, n, n)."""
    comm = np.einsum("bij,cjk->bcik", basis, basis) - np.einsum("cij,bjk->bcik", basis, basis)
    # <e_a, X> = -tr(e_a X)
    return np.real(-np.einsum("aij,bcji->abc", basis, comm))


def antiherm_coords(xi, basis):
    """Components <e_a, xi> of xi in an orthonormal basis (bilinear, so complex input is allowed)."""
    return -np.einsum("aij,ji->a", basis, xi)


# ---------------------------------------------------------------------------
# exponential, logarithm, eigen-decomposition


def mat_exp(xi):
    """Exponential of an anti-Hermitian matrix via the eigendecomposition of i*xi."""
    xi = np.asarray(xi, dtype=complex)
    H = 1j * xi
    H = 0.5 * (H + dagger(H))
    lam, W = np.linalg.eigh(H)
    return (W * np.exp(-1j * lam)) @ dagger(W)


def _schur_unitary(U):
    T, Z = sla.schur(np.asarray(U, dtype=complex), output="complex")
    return np.diag(T), Z


def mat_log(U, cut_tol=1e-8):
    """Principal logarithm of a unitary matrix (eigenphases in (-pi, pi))."""
    lam, Z = _schur_unitary(U)
    phases = np.angle(lam)
    if np.any(np.pi - np.abs(phases) < cut_tol):
        raise BranchCut("eigenphase within tolerance of +-pi")
    return (Z * (1j * phases)) @ dagger(Z)


@dataclass(frozen=True)
class DiagUnitary:
    """Diagonal unitary diag(exp(i q_j))."""

    q: np.ndarray

    @property
    def n(self):
        return len(self.q)

    @property
    def diag(self):
        return np.exp(1j * np.asarray(self.q))

    def matrix(self):
        return np.diag(self.diag)

    def min_gap(self):
        return min_phase_gap(self.q)

    def is_regular(self, delta=DELTA_REG):
        return self.min_gap() > delta


def min_phase_gap(q):
    q = np.asarray(q, dtype=float)
    if len(q) < 2:
        return np.inf
    d = np.abs(q[:, None] - q[None, :])
    d = np.mod(d, 2 * np.pi)
    d = np.minimum(d, 2 * np.pi - d)
    d[np.diag_indices(len(q))] = np.inf
    return float(d.min())


def unitary_eig(U, delta=DELTA_REG):
    """Diagonalize a unitary: U = C Q C^{-1}.

    Phases are sorted ascending in (-pi, pi]; each column of C is scaled so that its
    largest-modulus entry is real and positive. Returns (Q, C, degenerate_flag).
    """
    lam, Z = _schur_unitary(U)
    q = np.angle(lam)
    q = np.where(q <= -np.pi, q + 2 * np.pi, q)
    order = np.argsort(q, kind="stable")
    q = q[order]
    C = Z[:, order]
    for j in range(C.shape[1]):
        col = C[:, j]
        piv = np.argmax(np.abs(col))
        C[:, j] = col * (np.abs(col[piv]) / col[piv])
    Q = DiagUnitary(q)
    return Q, C, not Q.is_regular(delta)


def polar_unitary(M):
    """Closest unitary matrix in Frobenius norm (unitary polar factor)."""
    W, _, Vh = np.linalg.svd(M)
    return W @ Vh


def haar_random(n, seed=None):
    """Haar-distributed unitary via QR of a complex Ginibre matrix with phase correction."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    Z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    Qm, R = np.linalg.qr(Z)
    ph = np.diag(R) / np.abs(np.diag(R))
    return Qm * ph


def random_antiherm(n, seed=None, scale=1.0):
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * 0.5 * (X - dagger(X))


# ---------------------------------------------------------------------------
# torus decomposition and r-matrix


def project_t(xi):
    return np.diag(np.diag(xi))


def project_tperp(xi):
    return xi - np.diag(np.diag(xi))


def _as_phases(Q):
    if isinstance(Q, DiagUnitary):
        return np.asarray(Q.q, dtype=float)
    Q = np.asarray(Q)
    if Q.ndim == 2:
        return np.angle(np.diag(Q))
    return np.asarray(Q, dtype=float)


def rmatrix_apply(Q, xi, delta=DELTA_REG):
    """(R(Q) xi)_jk = -(i/2) cot((q_j - q_k)/2) xi_jk off the diagonal, zero on it."""
    q = _as_phases(Q)
    if min_phase_gap(q) < delta:
        raise NearDegenerate("Q is not regular")
    diff = q[:, None] - q[None, :]
    n = len(q)
    off = ~np.eye(n, dtype=bool)
    K = np.zeros((n, n), dtype=complex)
    K[off] = -0.5j / np.tan(0.5 * diff[off])
    return K * np.asarray(xi)


def rmatrix_operator(Q, xi):
    """R(Q) xi as 1/2 ((Ad_Q - id)|perp)^{-1} (Ad_Q + id) xi_perp, solved entrywise.

    Independent evaluation used as an oracle for :func:`rmatrix_apply`.
    """
    q = _as_phases(Q)
    n = len(q)
    Qd = np.exp(1j * q)
    xp = project_tperp(np.asarray(xi))
    out = np.zeros((n, n), dtype=complex)
    for j in range(n):
        for k in range(n):
            if j == k:
                continue
            ad = Qd[j] / Qd[k]  # (Ad_Q X)_jk = Q_j X_jk / Q_k
            out[j, k] = 0.5 * (ad + 1.0) * xp[j, k] / (ad - 1.0)
    return out


# ---------------------------------------------------------------------------
# class functions


@dataclass(frozen=True)
class ClassFnSpec:
    """Linear combination h(g) = sum_i c_i * F_i(g) of trace functions.

    Each term is (coef, kind, k) with kind in {"re", "im", "tr"}:
    "re" -> Re tr g^k, "im" -> Im tr g^k, "tr" -> tr g^k (complex generator).
    Coefficients must be real for "re"/"im" terms if a real Hamiltonian is wanted.
    """

    terms: tuple = field(default_factory=tuple)

    def __post_init__(self):
        for c, kind, k in self.terms:
            if kind not in ("re", "im", "tr"):
                raise ValueError(f"unknown class-function kind {kind!r}")
            if int(k) != k or k < 1:
                raise ValueError("powers must be positive integers")

    @property
    def is_real(self):
        return all(kind != "tr" and np.isreal(c) for c, kind, _ in self.terms)

    @classmethod
    def re_tr(cls, k=1, coef=1.0):
        return cls(((coef, "re", k),))

    @classmethod
    def im_tr(cls, k=1, coef=1.0):
        return cls(((coef, "im", k),))

    @classmethod
    def h_r(cls, k):
        """(1/2k) Re tr g^k."""
        return cls(((1.0 / (2 * k), "re", k),))

    @classmethod
    def h_i(cls, k):
        """(1/2k) Im tr g^k."""
        return cls(((1.0 / (2 * k), "im", k),))

    def __add__(self, other):
        return ClassFnSpec(tuple(self.terms) + tuple(other.terms))

    def scaled(self, s):
        return ClassFnSpec(tuple((s * c, kind, k) for c, kind, k in self.terms))


_TERM_RE = re.compile(r"^\s*(?:([-+0-9.eE]+)\s*\*)?\s*(re_tr|im_tr)\s*:\s*(\d+)\s*$")


def parse_class_fn(text):
    """Parse ``c1*re_tr:k1 + c2*im_tr:k2 + ...`` into a :class:`ClassFnSpec`."""
    if not text or not text.strip():
        raise ValueError("empty Hamiltonian specification")
    pieces = re.split(r"\+(?![^()]*\))", text.replace(" ", ""))
    terms = []
    for p in pieces:
        if not p:
            continue
        m = _TERM_RE.match(p)
        if m is None:
            raise ValueError(f"cannot parse Hamiltonian term {p!r}")
        coef = float(m.group(1)) if m.group(1) is not None else 1.0
        kind = "re" if m.group(2) == "re_tr" else "im"
        terms.append((coef, kind, int(m.group(3))))
    return ClassFnSpec(tuple(terms))


def class_fn_value(spec, A):
    total = 0.0 + 0.0j
    for c, kind, k in spec.terms:
        t = np.trace(np.linalg.matrix_power(A, k))
        if kind == "re":
            total += c * t.real
        elif kind == "im":
            total += c * t.imag
        else:
            total += c * t
    return total


def grad_class_fn(spec, A):
    """u(n)-valued derivative of a class function (complexified for "tr" terms).

    grad Re tr g^k = -(k/2)(g^k - g^-k), grad Im tr g^k = (i k/2)(g^k + g^-k),
    grad tr g^k = -k g^k.
    """
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    out = np.zeros((n, n), dtype=complex)
    for c, kind, k in spec.terms:
        Ak = np.linalg.matrix_power(A, k)
        Amk = np.linalg.matrix_power(dagger(A), k)
        if kind == "re":
            out += c * (-0.5 * k) * (Ak - Amk)
        elif kind == "im":
            out += c * (0.5j * k) * (Ak + Amk)
        else:
            out += c * (-k) * Ak
    return out
