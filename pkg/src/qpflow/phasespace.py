"""Points of the master phase space (A, B, v_1, ..., v_d) and the structural maps on it.

Ball indices are 0-based in the Python API (ball ``alpha`` is ``m.V[alpha]``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import matlie
from .scalars import c_fn

BALL_MARGIN = 1e-9


class BallExit(ValueError):
    """A spin vector left its quasi-Poisson ball."""


@dataclass(frozen=True)
class MPoint:
    """A point of the master phase space with its real ball parameters x_alpha.

    A, B: (n, n) complex; V: (d, n) complex, row alpha is v_alpha; x: (d,) nonzero reals.
    The constructor does not validate, so slightly off-manifold points can be built
    for finite differences; use :meth:`check` for the invariants.
    """

    A: np.ndarray
    B: np.ndarray
    V: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", np.asarray(self.A, dtype=complex))
        object.__setattr__(self, "B", np.asarray(self.B, dtype=complex))
        V = np.asarray(self.V, dtype=complex)
        if V.ndim == 1:
            V = V[None, :]
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
        if self.V.shape[0] != len(self.x):
            raise ValueError("number of spin vectors must match number of x parameters")
        if self.A.shape != self.B.shape or self.A.shape[0] != self.V.shape[1]:
            raise ValueError("inconsistent dimensions")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def d(self):
        return self.V.shape[0]

    def radii2(self):
        """|v_alpha|^2 for every ball."""
        return np.real(np.sum(np.abs(self.V) ** 2, axis=1))

    def ball_args(self):
        """x_alpha |v_alpha|^2."""
        return self.x * self.radii2()

    def ball_margin(self):
        """Distance of x|v|^2 to the ball boundary 2 pi, minimised over balls."""
        return float(np.min(2 * np.pi - np.abs(self.ball_args())))

    def check(self, tol=matlie.UNITARY_TOL, margin=BALL_MARGIN):
        if np.any(self.x == 0):
            raise ValueError("ball parameters must be nonzero")
        if not matlie.is_unitary(self.A, tol) or not matlie.is_unitary(self.B, tol):
            raise ValueError("A and B must be unitary")
        if self.ball_margin() < margin:
            raise BallExit("spin vector outside its ball")
        return self

    def replace(self, **kw):
        fields = dict(A=self.A, B=self.B, V=self.V, x=self.x)
        fields.update(kw)
        return MPoint(**fields)

    # -- serialisation -------------------------------------------------
    def to_dict(self):
        def cm(M):
            return [[[float(z.real), float(z.imag)] for z in row] for row in M]

        return {
            "n": self.n,
            "d": self.d,
            "x": [float(t) for t in self.x],
            "A": cm(self.A),
            "B": cm(self.B),
            "v": cm(self.V),
        }

    @classmethod
    def from_dict(cls, data):
        def mc(L):
            arr = np.asarray(L, dtype=float)
            return arr[..., 0] + 1j * arr[..., 1]

        return cls(mc(data["A"]), mc(data["B"]), mc(data["v"]), data["x"])

    def to_json(self, **extra):
        d = self.to_dict()
        d.update(extra)
        return json.dumps(d, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# moment maps


def rank1_exp(v, x):
    """exp(i x v v^dagger) = 1 + i x c(x |v|^2) v v^dagger."""
    v = np.asarray(v, dtype=complex)
    s = x * float(np.real(np.vdot(v, v)))
    return np.eye(len(v)) + 1j * x * c_fn(s) * np.outer(v, v.conj())


def ball_factors(m):
    return [rank1_exp(m.V[a], m.x[a]) for a in range(m.d)]


def _product(mats, n):
    out = np.eye(n, dtype=complex)
    for M in mats:
        out = out @ M
    return out


def commutator_part(A, B):
    return A @ B @ np.linalg.inv(A) @ np.linalg.inv(B)


def partial_moment_map(m, k):
    """[A, B] E_1 ... E_k (k = 0 gives the double alone)."""
    return commutator_part(m.A, m.B) @ _product(ball_factors(m)[:k], m.n)


def moment_map(m):
    """Phi = A B A^-1 B^-1 exp(i x_1 v_1 v_1^+) ... exp(i x_d v_d v_d^+)."""
    return partial_moment_map(m, m.d)


def tilde_moment_map(m):
    """Moment map of the degenerate twin, reading the second slot as B~: A B~^-1 E_1...E_d."""
    return m.A @ np.linalg.inv(m.B) @ _product(ball_factors(m), m.n)


def psi_map(m):
    """(A, B, v) -> (A, B A B^-1, v)."""
    return m.replace(B=m.B @ m.A @ np.linalg.inv(m.B))


def act(g, m):
    gi = matlie.dagger(g)
    return m.replace(A=g @ m.A @ gi, B=g @ m.B @ gi, V=(g @ m.V.T).T)


def u1_act(beta, lam, m):
    """Scale v_beta by lam^{-1} (0-based beta)."""
    V = m.V.copy()
    V[beta] = V[beta] / lam
    return m.replace(V=V)


def rescale_iso(m):
    """(A, B, v_alpha; x_alpha) -> (A, B, v_alpha sqrt|x_alpha|; sgn x_alpha)."""
    s = np.sqrt(np.abs(m.x))
    return m.replace(V=m.V * s[:, None], x=np.sign(m.x))


def random_ball_vector(n, x, rng, margin=1e-3):
    R2 = (2 * np.pi / abs(x)) * (1 - margin)
    z = rng.standard_normal(2 * n)
    z /= np.linalg.norm(z)
    r = np.sqrt(R2) * rng.uniform() ** (1.0 / (2 * n))
    return r * (z[:n] + 1j * z[n:])


def random_point(n, d, x=None, seed=None, margin=1e-3):
    """Haar A, B and v_alpha uniform in the ball of squared radius (2 pi/|x_alpha|)(1 - margin)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x = np.ones(d) if x is None else np.asarray(x, dtype=float)
    if len(x) != d or np.any(x == 0):
        raise ValueError("need d nonzero ball parameters")
    A = matlie.haar_random(n, rng)
    B = matlie.haar_random(n, rng)
    V = np.array([random_ball_vector(n, x[a], rng, margin) for a in range(d)])
    return MPoint(A, B, V, x)


def infinitesimal_action_matrix(m, include_B=True):
    """Real matrix of xi -> ([xi, A], [xi, B], xi v_1, ..., xi v_d) on the basis of u(n)."""
    basis = matlie.orthonormal_basis(m.n)
    cols = []
    for e in basis:
        parts = [e @ m.A - m.A @ e]
        if include_B:
            parts.append(e @ m.B - m.B @ e)
        parts.append((e @ m.V.T).T)
        z = np.concatenate([p.ravel() for p in parts])
        cols.append(np.concatenate([z.real, z.imag]))
    return np.array(cols).T


def freeness_margin(m, include_B=True):
    """Smallest singular value of the infinitesimal action (0 means a nontrivial stabilizer)."""
    M = infinitesimal_action_matrix(m, include_B)
    return float(np.linalg.svd(M, compute_uv=False).min())


# ---------------------------------------------------------------------------
# pencil parameters and tangent vectors


@dataclass(frozen=True)
class PencilParams:
    """Pencil parameters z_{alpha beta}, alpha < beta, stored in lexicographic order."""

    d: int
    values: tuple = ()

    def __post_init__(self):
        vals = tuple(float(t) for t in np.ravel(self.values)) if len(np.ravel(self.values)) else ()
        if not vals:
            vals = (0.0,) * (self.d * (self.d - 1) // 2)
        if len(vals) != self.d * (self.d - 1) // 2:
            raise ValueError(f"need {self.d * (self.d - 1) // 2} pencil parameters for d={self.d}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def zero(cls, d):
        return cls(d)

    @classmethod
    def random(cls, d, seed=None, scale=1.0):
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        return cls(d, tuple(scale * rng.standard_normal(d * (d - 1) // 2)))

    def pairs(self):
        return [(a, b) for a in range(self.d) for b in range(a + 1, self.d)]

    def zstar(self):
        """Antisymmetric extension: z*_ab = z_ab (a < b), z*_ba = -z_ab, z*_aa = 0."""
        Z = np.zeros((self.d, self.d))
        for (a, b), val in zip(self.pairs(), self.values):
            Z[a, b] = val
            Z[b, a] = -val
        return Z

    def __add__(self, other):
        return PencilParams(self.d, tuple(np.add(self.values, other.values)))

    def scaled(self, s):
        return PencilParams(self.d, tuple(s * np.asarray(self.values)))


@dataclass(frozen=True)
class TangentVec:
    """Ambient components (dA, dB, dv_1..dv_d) of a tangent vector."""

    dA: np.ndarray
    dB: np.ndarray
    dV: np.ndarray

    def __add__(self, other):
        return TangentVec(self.dA + other.dA, self.dB + other.dB, self.dV + other.dV)

    def __sub__(self, other):
        return TangentVec(self.dA - other.dA, self.dB - other.dB, self.dV - other.dV)

    def __mul__(self, s):
        return TangentVec(s * self.dA, s * self.dB, s * self.dV)

    __rmul__ = __mul__

    def norm(self):
        return float(np.sqrt(sum(np.linalg.norm(p) ** 2 for p in (self.dA, self.dB, self.dV))))

    def tangency_residual(self, m):
        """How far A^-1 dA and B^-1 dB are from anti-Hermitian."""
        a = np.linalg.inv(m.A) @ self.dA
        b = np.linalg.inv(m.B) @ self.dB
        return float(max(np.linalg.norm(a + a.conj().T), np.linalg.norm(b + b.conj().T)))

    @classmethod
    def zeros(cls, n, d):
        return cls(np.zeros((n, n), complex), np.zeros((n, n), complex), np.zeros((d, n), complex))


def xi_action(m, xi):
    """Fundamental vector field xi_M(m) = (A xi - xi A, B xi - xi B, -xi v_alpha).

    Convention: xi_M f(m) = d/dt f(exp(-t xi) . m) at t = 0.
    """
    return TangentVec(m.A @ xi - xi @ m.A, m.B @ xi - xi @ m.B, -(xi @ m.V.T).T)
