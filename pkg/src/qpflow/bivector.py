"""Chart bivector engine for the pencil of quasi-Poisson structures.

Chart
-----
The complex slots are c = (A_ij, B_ij, (v_alpha)_i) in this order (row-major, ball-major),
K = 2 n^2 + n d of them.  The real chart stacks (Re c, Im c), dimension 2K.

The fundamental tables give S_ab = {c_a, c_b} and T_ab = {c_a, conj(c_b)}.  On the
coordinates w = (c, conj c) the bracket matrix is

    M = [[S, T], [-T^t, conj S]],

and the real bivector is P = L M L^t with r = L w.  Brackets with conj(A) and conj(B)
are obtained from conj(A)_kl = (A^-1)_lk and the derivation rule, which gives a smooth
(holomorphic in A, B) extension of P off the group; only tangential derivatives of P are
ever used, so the extension does not affect any bracket.

Observables carry Wirtinger derivatives (d/dc, d/dconj c); their real-chart gradient is
(d_c + d_cbar, i (d_c - d_cbar)) and {f, g} = grad f^t P grad g.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matlie
from .phasespace import (
    MPoint,
    PencilParams,
    TangentVec,
    moment_map,
    psi_map,
    tilde_moment_map,
    xi_action,
)
from .scalars import b_fn, c_fn, db_fn, dc_fn

STANDARD = "standard"
DEGENERATE = "degenerate"
FD_STEP = 1e-3  # step of the fourth-order stencil used for derivatives of P


@dataclass(frozen=True)
class BivectorKind:
    """Which bivector of the pencil: standard P_z or degenerate P_{z,c}."""

    tag: str = STANDARD
    z: PencilParams | None = None

    def __post_init__(self):
        if self.tag not in (STANDARD, DEGENERATE):
            raise ValueError(f"unknown bivector kind {self.tag!r}")

    def zstar(self, d):
        if self.z is None:
            return np.zeros((d, d))
        if self.z.d != d:
            raise ValueError("pencil parameters do not match d")
        return self.z.zstar()

    @classmethod
    def standard(cls, z=None):
        return cls(STANDARD, z)

    @classmethod
    def degenerate(cls, z=None):
        return cls(DEGENERATE, z)


# ---------------------------------------------------------------------------
# chart bookkeeping


@dataclass(frozen=True)
class ChartIndex:
    """Bijection between complex slots / real chart indices."""

    n: int
    d: int

    @property
    def K(self):
        return 2 * self.n**2 + self.n * self.d

    @property
    def dim(self):
        return 2 * self.K

    def slot(self, block, *idx):
        """Complex slot index of A[i,j], B[i,j] or v[alpha, i]."""
        n = self.n
        if block == "A":
            i, j = idx
            return i * n + j
        if block == "B":
            i, j = idx
            return n * n + i * n + j
        if block == "v":
            a, i = idx
            return 2 * n * n + a * n + i
        raise ValueError(block)

    def index(self, block, *idx, part="re"):
        s = self.slot(block, *idx)
        return s if part == "re" else s + self.K

    def describe(self, k):
        """Inverse of :meth:`index`: (block, idx, part)."""
        part = "re" if k < self.K else "im"
        s = k % self.K
        n = self.n
        if s < n * n:
            return ("A", divmod(s, n), part)
        if s < 2 * n * n:
            return ("B", divmod(s - n * n, n), part)
        return ("v", divmod(s - 2 * n * n, n), part)

    def point_vector(self, m):
        c = np.concatenate([m.A.ravel(), m.B.ravel(), m.V.ravel()])
        return np.concatenate([c.real, c.imag])

    def split(self, c):
        n, d = self.n, self.d
        A = c[: n * n].reshape(n, n)
        B = c[n * n : 2 * n * n].reshape(n, n)
        V = c[2 * n * n :].reshape(d, n)
        return A, B, V

    def complex_of(self, r):
        return r[: self.K] + 1j * r[self.K :]

    def shifted(self, m, r):
        """Point m displaced by the real chart vector r (may leave the manifold)."""
        dA, dB, dV = self.split(self.complex_of(r))
        return MPoint(m.A + dA, m.B + dB, m.V + dV, m.x)

    def vector_of(self, X):
        """Real chart vector of a TangentVec (also accepts complex-linear combinations)."""
        c = np.concatenate([np.ravel(X.dA), np.ravel(X.dB), np.ravel(X.dV)])
        return np.concatenate([c.real, c.imag])

    def tangent_of(self, r):
        """TangentVec whose chart vector is the real vector r."""
        dA, dB, dV = self.split(self.complex_of(np.asarray(r)))
        return TangentVec(dA, dB, dV)

    def basis_tangent(self, k):
        e = np.zeros(self.dim)
        e[k] = 1.0
        return self.tangent_of(e)


def chart_of(m):
    return ChartIndex(m.n, m.d)


# ---------------------------------------------------------------------------
# fundamental tables


def _sgn_matrix(d):
    idx = np.arange(d)
    return np.sign(idx[None, :] - idx[:, None]).astype(float)  # sgn(beta - alpha) at [alpha, beta]


def bracket_tables(A, B, V, x, kind=BivectorKind()):
    """Return the complex matrices (S, T) of brackets on the complex slots.

    S[a, b] = {c_a, c_b},  T[a, b] = {c_a, conj(c_b)}.
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    V = np.asarray(V, dtype=complex)
    n = A.shape[0]
    d = V.shape[0]
    K = 2 * n * n + n * d
    I = np.eye(n)
    A2, B2 = A @ A, B @ B
    AB, BA = A @ B, B @ A
    sAB = 1.0 if kind.tag == STANDARD else -1.0

    # {A_ij, A_kl} etc. as tensors [i, j, k, l]
    AA = -0.5 * np.einsum("kj,il->ijkl", A2, I) + 0.5 * np.einsum("kj,il->ijkl", I, A2)
    BB = 0.5 * np.einsum("kj,il->ijkl", B2, I) - 0.5 * np.einsum("kj,il->ijkl", I, B2)
    AB_ = -0.5 * (
        np.einsum("kj,il->ijkl", I, AB)
        + np.einsum("kj,il->ijkl", BA, I)
        + sAB * np.einsum("kj,il->ijkl", B, A)
        - np.einsum("kj,il->ijkl", A, B)
    )
    # {A_ij, (v_a)_k} -> [i, j, a, k]
    AV = 0.5 * np.einsum("kj,ai->ijak", A, V) - 0.5 * np.einsum("kj,ai->ijak", I, V @ A.T)
    BV = 0.5 * np.einsum("kj,ai->ijak", B, V) - 0.5 * np.einsum("kj,ai->ijak", I, V @ B.T)

    sg = _sgn_matrix(d)
    zs = kind.zstar(d)
    # {(v_a)_i, (v_b)_k} -> [a, i, b, k]
    VV = 0.5 * np.einsum("ab,ak,bi->aibk", sg, V, V) - np.einsum("ab,ai,bk->aibk", zs, V, V)

    nn = n * n
    S = np.zeros((K, K), dtype=complex)
    sA, sB, sV = slice(0, nn), slice(nn, 2 * nn), slice(2 * nn, K)
    S[sA, sA] = AA.reshape(nn, nn)
    S[sB, sB] = BB.reshape(nn, nn)
    S[sA, sB] = AB_.reshape(nn, nn)
    S[sB, sA] = -AB_.reshape(nn, nn).T
    S[sA, sV] = AV.reshape(nn, n * d)
    S[sV, sA] = -AV.reshape(nn, n * d).T
    S[sB, sV] = BV.reshape(nn, n * d)
    S[sV, sB] = -BV.reshape(nn, n * d).T
    S[sV, sV] = VV.reshape(n * d, n * d)

    T = np.zeros((K, K), dtype=complex)
    # columns conj(A_kl) = (A^-1)_lk : {f, (A^-1)_lk} = -(A^-1 {f, A} A^-1)_lk
    Ai, Bi = np.linalg.inv(A), np.linalg.inv(B)
    G = S[:, sA].reshape(K, n, n)
    T[:, sA] = -np.transpose(Ai[None] @ G @ Ai[None], (0, 2, 1)).reshape(K, nn)
    G = S[:, sB].reshape(K, n, n)
    T[:, sB] = -np.transpose(Bi[None] @ G @ Bi[None], (0, 2, 1)).reshape(K, nn)
    # columns conj(v_b)_l
    Vc = V.conj()
    ABV = 0.5 * np.einsum("il,bj->ijbl", A, Vc) - 0.5 * np.einsum("il,bj->ijbl", I, Vc @ A)
    BBV = 0.5 * np.einsum("il,bj->ijbl", B, Vc) - 0.5 * np.einsum("il,bj->ijbl", I, Vc @ B)
    T[sA, sV] = ABV.reshape(nn, n * d)
    T[sB, sV] = BBV.reshape(nn, n * d)
    r2 = np.real(np.sum(V * Vc, axis=1))
    bb = b_fn(np.asarray(x) * r2)
    gram = Vc @ V.T  # gram[b, a] = v_b^dagger v_a
    VVb = np.zeros((d, n, d, n), dtype=complex)
    for a in range(d):
        VVb[a, :, a, :] += (1j / x[a]) * I + 0.5j * bb[a] * (r2[a] * I - np.outer(V[a], Vc[a]))
    VVb -= 0.5 * np.einsum("ab,il,ba->aibl", sg, I, gram)
    VVb += np.einsum("ab,ai,bl->aibl", zs, V, Vc)
    T[sV, sV] = VVb.reshape(n * d, n * d)
    return S, T


def complex_bracket_matrix(m, kind=BivectorKind(), symmetrize=True):
    """The bracket matrix M on w = (c, conj c)."""
    S, T = bracket_tables(m.A, m.B, m.V, m.x, kind)
    if symmetrize:
        T = 0.5 * (T - T.conj().T)
    return np.block([[S, T], [-T.T, S.conj()]])


def tables_consistency(m, kind=BivectorKind()):
    """Anti-Hermiticity defect of T before symmetrisation (zero on the manifold)."""
    _, T = bracket_tables(m.A, m.B, m.V, m.x, kind)
    return float(np.max(np.abs(T + T.conj().T)))


def _L(K):
    I = np.eye(K)
    return np.block([[0.5 * I, 0.5 * I], [-0.5j * I, 0.5j * I]])


_L_CACHE = {}


def assemble_P(m, kind=BivectorKind()):
    """Real antisymmetric bivector matrix on the real chart."""
    M = complex_bracket_matrix(m, kind)
    K = M.shape[0] // 2
    L = _L_CACHE.get(K)
    if L is None:
        L = _L_CACHE.setdefault(K, _L(K))
    P = L @ M @ L.T
    return np.real(P)


def fundamental_bracket(slot1, slot2, m, kind=BivectorKind()):
    """Bracket of two coordinate functions.

    Slots are tuples (block, i, j[, conj]) with block in {"A", "B"} or
    ("v", alpha, i[, conj]); ``conj=True`` selects the complex conjugate function.
    """
    ch = chart_of(m)
    M = complex_bracket_matrix(m, kind)

    def widx(s):
        block = s[0]
        conj = bool(s[3]) if len(s) > 3 else False
        k = ch.slot(block, s[1], s[2])
        return k + (ch.K if conj else 0)

    return M[widx(slot1), widx(slot2)]


# ---------------------------------------------------------------------------
# observables


class Observable:
    """Scalar function with Wirtinger derivatives on the complex slots.

    ``fn(m)`` returns (value, dz, dzbar), arrays of length K.
    """

    def __init__(self, fn, name="f"):
        self.fn = fn
        self.name = name

    def __repr__(self):
        return f"Observable({self.name})"

    def wirtinger(self, m):
        return self.fn(m)

    def value(self, m):
        return self.fn(m)[0]

    def evaluate(self, m):
        """(value, real-chart gradient)."""
        v, dz, dzb = self.fn(m)
        return v, np.concatenate([dz + dzb, 1j * (dz - dzb)])

    def gradient(self, m):
        return self.evaluate(m)[1]

    # algebra -----------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, Observable):
            other = constant(other)

        def fn(m):
            a, b = self.fn(m), other.fn(m)
            return a[0] + b[0], a[1] + b[1], a[2] + b[2]

        return Observable(fn, f"({self.name}+{other.name})")

    __radd__ = __add__

    def __neg__(self):
        return self * (-1.0)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Observable) else -other)

    def __mul__(self, other):
        if not isinstance(other, Observable):
            s = other

            def fn(m):
                a = self.fn(m)
                return s * a[0], s * a[1], s * a[2]

            return Observable(fn, f"{s}*{self.name}")

        def fn(m):
            a, b = self.fn(m), other.fn(m)
            return a[0] * b[0], a[1] * b[0] + a[0] * b[1], a[2] * b[0] + a[0] * b[2]

        return Observable(fn, f"{self.name}*{other.name}")

    __rmul__ = __mul__

    def conj(self):
        def fn(m):
            v, dz, dzb = self.fn(m)
            return np.conj(v), np.conj(dzb), np.conj(dz)

        return Observable(fn, f"conj({self.name})")

    def real(self):
        return (self + self.conj()) * 0.5

    def imag(self):
        return (self - self.conj()) * (-0.5j)

    def compose(self, f, df, name=None):
        """f(self) for a scalar function f with derivative df (real-analytic use)."""

        def fn(m):
            v, dz, dzb = self.fn(m)
            return f(v), df(v) * dz, df(v) * dzb

        return Observable(fn, name or f"F({self.name})")


def constant(c):
    def fn(m):
        K = chart_of(m).K
        return c, np.zeros(K, complex), np.zeros(K, complex)

    return Observable(fn, repr(c))


def entry(block, i, j=None, conj=False):
    """Coordinate function A_ij, B_ij or (v_i)_j (i = ball index for "v"), optionally conjugated."""

    def fn(m):
        ch = chart_of(m)
        k = ch.slot(block, i, j)
        dz = np.zeros(ch.K, complex)
        dzb = np.zeros(ch.K, complex)
        if block == "A":
            val = m.A[i, j]
        elif block == "B":
            val = m.B[i, j]
        else:
            val = m.V[i, j]
        if conj:
            dzb[k] = 1.0
            return np.conj(val), dz, dzb
        dz[k] = 1.0
        return val, dz, dzb

    tag = f"{'conj ' if conj else ''}{block}[{i},{j}]"
    return Observable(fn, tag)


def generator_catalog(n, d):
    """All complex coordinate functions and their conjugates."""
    gens = []
    for blk in ("A", "B"):
        for i in range(n):
            for j in range(n):
                gens.append(entry(blk, i, j))
                gens.append(entry(blk, i, j, conj=True))
    for a in range(d):
        for i in range(n):
            gens.append(entry("v", a, i))
            gens.append(entry("v", a, i, conj=True))
    return gens


# -- trace words ----------------------------------------------------------


def _letter_matrix(m, L):
    if isinstance(L, tuple):
        tag = L[0]
        if tag == "vv":
            return np.outer(m.V[L[1]], m.V[L[2]].conj())
        if tag == "E":
            a = L[1]
            v = m.V[a]
            x = m.x[a]
            s = x * float(np.real(np.vdot(v, v)))
            return np.eye(m.n) + 1j * x * c_fn(s) * np.outer(v, v.conj())
        raise ValueError(L)
    if L == "A":
        return m.A
    if L == "Ai":
        return np.linalg.inv(m.A)
    if L == "B":
        return m.B
    if L == "Bi":
        return np.linalg.inv(m.B)
    if L == "Bt":
        return m.B @ m.A @ np.linalg.inv(m.B)
    if L == "Bti":
        return m.B @ np.linalg.inv(m.A) @ np.linalg.inv(m.B)
    raise ValueError(f"unknown letter {L!r}")


def _accumulate(m, L, R, GA, GB, DV, DVb):
    """Add the derivative of tr(R W_L) with respect to the slots."""
    if isinstance(L, tuple):
        if L[0] == "vv":
            a, b = L[1], L[2]
            DV[a] += m.V[b].conj() @ R
            DVb[b] += R @ m.V[a]
            return
        if L[0] == "E":
            a = L[1]
            v = m.V[a]
            x = m.x[a]
            s = x * float(np.real(np.vdot(v, v)))
            cc, dcc = c_fn(s), dc_fn(s)
            q = v.conj() @ R @ v
            DV[a] += 1j * x * (x * dcc * q * v.conj() + cc * (v.conj() @ R))
            DVb[a] += 1j * x * (x * dcc * q * v + cc * (R @ v))
            return
    if L == "A":
        GA += R
    elif L == "Ai":
        Ai = np.linalg.inv(m.A)
        GA -= Ai @ R @ Ai
    elif L == "B":
        GB += R
    elif L == "Bi":
        Bi = np.linalg.inv(m.B)
        GB -= Bi @ R @ Bi
    elif L == "Bt":
        Bi = np.linalg.inv(m.B)
        Bt = m.B @ m.A @ Bi
        GA += Bi @ R @ m.B
        GB += m.A @ Bi @ R - Bi @ R @ Bt
    elif L == "Bti":
        Bti = m.B @ np.linalg.inv(m.A) @ np.linalg.inv(m.B)
        _accumulate(m, "Bt", -Bti @ R @ Bti, GA, GB, DV, DVb)
    else:
        raise ValueError(L)


def _pack(m, GA, GB, DV, DVb):
    dz = np.concatenate([GA.T.ravel(), GB.T.ravel(), DV.ravel()])
    dzb = np.concatenate([np.zeros(2 * m.n * m.n, complex), DVb.ravel()])
    return dz, dzb


def word_wirtinger(m, letters, R0=None):
    """Value and Wirtinger derivatives of tr(R0 W_1 ... W_k)."""
    n = m.n
    mats = [_letter_matrix(m, L) for L in letters]
    R0 = np.eye(n, dtype=complex) if R0 is None else R0
    k = len(mats)
    prefix = [np.eye(n, dtype=complex)]
    for W in mats:
        prefix.append(prefix[-1] @ W)
    suffix = [np.eye(n, dtype=complex)]
    for W in reversed(mats):
        suffix.append(W @ suffix[-1])
    suffix = suffix[::-1]  # suffix[i] = W_i ... W_k (0-based from i)
    val = np.trace(R0 @ prefix[-1])
    GA = np.zeros((n, n), complex)
    GB = np.zeros((n, n), complex)
    DV = np.zeros((m.d, n), complex)
    DVb = np.zeros((m.d, n), complex)
    for i, L in enumerate(letters):
        R = suffix[i + 1] @ R0 @ prefix[i]
        _accumulate(m, L, R, GA, GB, DV, DVb)
    dz, dzb = _pack(m, GA, GB, DV, DVb)
    return val, dz, dzb


def trace_word(letters, name=None):
    """tr(W_1 ... W_k) with letters from {"A","Ai","B","Bi","Bt","Bti",("vv",a,b),("E",a)}."""
    letters = list(letters)
    return Observable(lambda m: word_wirtinger(m, letters), name or f"tr{letters}")


def matrix_entry_word(letters, i, j, name=None):
    """(W_1 ... W_k)_ij."""
    letters = list(letters)

    def fn(m):
        R0 = np.zeros((m.n, m.n), complex)
        R0[j, i] = 1.0
        return word_wirtinger(m, letters, R0)

    return Observable(fn, name or f"{letters}[{i},{j}]")


def I_obs(k, a, b):
    """I^k_ab = v_a^dagger A^k v_b = tr(v_b v_a^dagger A^k)."""
    return trace_word([("vv", b, a)] + ["A"] * k, name=f"I^{k}_{a}{b}")


def tr_power(k, letter="A"):
    if k == 0:
        return constant(float(1))
    return trace_word([letter] * k, name=f"tr {letter}^{k}")


def radial(a):
    return I_obs(0, a, a).real()


def class_pullback(spec, slot="A"):
    """h o E_1 (slot "A"), h o E_2 (slot "B") or h o (B A B^-1) (slot "Bt")."""
    total = constant(0.0)
    for c, kind, k in spec.terms:
        t = trace_word([slot] * k)
        if kind == "re":
            total = total + t.real() * c
        elif kind == "im":
            total = total + t.imag() * c
        else:
            total = total + t * c
    return total


def moment_entry(i, j, tilde=False):
    """Phi_ij (or the degenerate moment map entry when ``tilde``)."""

    def fn(m):
        letters = ["A", "Bi"] if tilde else ["A", "B", "Ai", "Bi"]
        letters += [("E", a) for a in range(m.d)]
        R0 = np.zeros((m.n, m.n), complex)
        R0[j, i] = 1.0
        return word_wirtinger(m, letters, R0)

    return Observable(fn, f"Phi[{i},{j}]")


def psi_pullback(obs):
    """f o Psi with Psi(A, B, v) = (A, B A B^-1, v); chain rule on the Wirtinger derivatives."""

    def fn(m):
        pm = psi_map(m)
        v, dz, dzb = obs.fn(pm)
        n = m.n
        nn = n * n

        def pull(d, A, B):
            GA = d[:nn].reshape(n, n).T
            GB = d[nn : 2 * nn].reshape(n, n).T
            Bi = np.linalg.inv(B)
            Bt = B @ A @ Bi
            GA2 = GA + Bi @ GB @ B
            GB2 = A @ Bi @ GB - Bi @ GB @ Bt
            out = d.copy()
            out[:nn] = GA2.T.ravel()
            out[nn : 2 * nn] = GB2.T.ravel()
            return out

        dz2 = pull(dz, m.A, m.B)
        dzb2 = pull(dzb, m.A.conj(), m.B.conj())
        return v, dz2, dzb2

    return Observable(fn, f"{obs.name}oPsi")


def fd_gradient_check(obs, m, h=1e-6):
    """Max deviation between the analytic chart gradient and central differences."""
    ch = chart_of(m)
    _, g = obs.evaluate(m)
    err = 0.0
    for k in range(ch.dim):
        e = np.zeros(ch.dim)
        e[k] = h
        fp = obs.value(ch.shifted(m, e))
        fm = obs.value(ch.shifted(m, -e))
        err = max(err, abs((fp - fm) / (2 * h) - g[k]))
    return err


# ---------------------------------------------------------------------------
# brackets and vector fields


def bracket(f, g, m, kind=BivectorKind(), P=None):
    P = assemble_P(m, kind) if P is None else P
    return f.gradient(m) @ P @ g.gradient(m)


def hamiltonian_vf(H, m, kind=BivectorKind(), P=None):
    """X_H with X_H(F) = {F, H}; returned as a TangentVec."""
    P = assemble_P(m, kind) if P is None else P
    X = P @ H.gradient(m)
    ch = chart_of(m)
    if np.max(np.abs(np.imag(X))) > 1e-9 * max(1.0, np.max(np.abs(X))):
        # complex Hamiltonian: keep complex-linear combination of the real fields
        Xr = ch.tangent_of(np.real(X))
        Xi = ch.tangent_of(np.imag(X))
        return Xr + Xi * 1j
    return ch.tangent_of(np.real(X))


def fundamental_field_vector(m, xi):
    """Real chart vector of xi_M."""
    return chart_of(m).vector_of(xi_action(m, xi))


def action_vectors(m, basis=None):
    """Chart vectors of (e_a)_M for an orthonormal basis (rows)."""
    basis = matlie.orthonormal_basis(m.n) if basis is None else basis
    return np.array([fundamental_field_vector(m, e) for e in basis])


def cartan_trivector(f1, f2, f3, m):
    """phi_M(f1, f2, f3) = (1/12) sum C_abc (e_a ^ e_b ^ e_c)(df1, df2, df3)."""
    basis = matlie.orthonormal_basis(m.n)
    C = matlie.structure_constants(basis)
    X = action_vectors(m, basis)
    g = [X @ f.gradient(m) for f in (f1, f2, f3)]  # g[i][a] = (e_a)_M f_i
    total = 0.0
    perms = [((0, 1, 2), 1), ((1, 2, 0), 1), ((2, 0, 1), 1), ((1, 0, 2), -1), ((0, 2, 1), -1), ((2, 1, 0), -1)]
    for (p, q, r), s in perms:
        total = total + s * np.einsum("abc,a,b,c->", C, g[p], g[q], g[r])
    return total / 12.0


def directional_dP(m, u, kind=BivectorKind(), h=FD_STEP):
    """Fourth-order central-difference derivative of P along a (possibly complex) chart vector u."""
    ch = chart_of(m)
    out = 0.0
    for part, w in ((np.real(u), 1.0), (np.imag(u), 1j)):
        nu = np.linalg.norm(part)
        if nu == 0:
            continue
        e = part / nu

        def P_at(t):
            return assemble_P(ch.shifted(m, t * e), kind)

        dP = (8 * (P_at(h) - P_at(-h)) - (P_at(2 * h) - P_at(-2 * h))) / (12 * h)
        out = out + w * nu * dP
    return out


def jacobiator_terms(f1, f2, f3, m, kind=BivectorKind(), h=FD_STEP):
    """The three cyclic terms gb . dP(P^t ga) . gc whose sum is the jacobiator."""
    P = assemble_P(m, kind)
    grads = [f.gradient(m) for f in (f1, f2, f3)]
    out = []
    for i in range(3):
        ga, gb, gc = grads[i], grads[(i + 1) % 3], grads[(i + 2) % 3]
        out.append(gb @ directional_dP(m, P.T @ ga, kind, h) @ gc)
    return np.array(out)


def jacobiator(f1, f2, f3, m, kind=BivectorKind(), h=FD_STEP):
    """Cyclic sum {f1,{f2,f3}} + {f2,{f3,f1}} + {f3,{f1,f2}} from the derivative of P."""
    return jacobiator_terms(f1, f2, f3, m, kind, h).sum()


def quasi_jacobi_residual(f1, f2, f3, m, kind=BivectorKind(), h=FD_STEP, relative=False):
    """|jacobiator - 1/2 phi_M|; with ``relative`` divided by max(1, largest cyclic term).

    The relative form is the meaningful one near the ball boundary, where the individual
    terms grow like the poles of the ball scalars and cancel to finite-difference accuracy.
    """
    terms = jacobiator_terms(f1, f2, f3, m, kind, h)
    res = abs(terms.sum() - 0.5 * cartan_trivector(f1, f2, f3, m))
    return res / max(1.0, float(np.max(np.abs(terms)))) if relative else res


def moment_jacobian(m, tilde=False):
    """dPhi_ij / dr_k for every real chart coordinate, shape (n, n, 2K)."""
    ch = chart_of(m)
    cols = []
    for i in range(m.n):
        for j in range(m.n):
            cols.append(moment_entry(i, j, tilde).gradient(m))
    return np.array(cols).reshape(m.n, m.n, ch.dim)


def momentmap_residual(m, kind=BivectorKind()):
    """max over (i, j, k) of | {Phi_ij, r_k} - 1/2 sum_a (Phi e_a + e_a Phi)_ij (e_a)_M(r_k) |."""
    tilde = kind.tag == DEGENERATE
    Phi = tilde_moment_map(m) if tilde else moment_map(m)
    P = assemble_P(m, kind)
    J = moment_jacobian(m, tilde)
    lhs = np.einsum("ijk,kl->ijl", J, P)
    basis = matlie.orthonormal_basis(m.n)
    X = action_vectors(m, basis)
    W = np.einsum("ij,ajk->aik", Phi, basis) + np.einsum("aij,jk->aik", basis, Phi)
    rhs = 0.5 * np.einsum("aij,al->ijl", W, X)
    return float(np.max(np.abs(lhs - rhs)))


def psi_morphism_residual(f, g, m, z=None):
    """| {f o Psi, g o Psi}_z (m) - {f, g}_{z,c} (Psi(m)) |."""
    lhs = bracket(psi_pullback(f), psi_pullback(g), m, BivectorKind.standard(z))
    rhs = bracket(f, g, psi_map(m), BivectorKind.degenerate(z))
    return abs(lhs - rhs)


def pencil_affinity_residual(m, z1, z2):
    """Superposition defect P(z1 + z2) - P(z1) - P(z2) + P(0)."""
    P0 = assemble_P(m, BivectorKind.standard(None))
    P1 = assemble_P(m, BivectorKind.standard(z1))
    P2 = assemble_P(m, BivectorKind.standard(z2))
    P12 = assemble_P(m, BivectorKind.standard(z1 + z2))
    return float(np.max(np.abs(P12 - P1 - P2 + P0)))
