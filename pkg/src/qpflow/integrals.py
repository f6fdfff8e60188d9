"""First integrals I^k_ab = v_a^+ A^k v_b and their closed bracket formula.

The closed formula is evaluated term by term (see :data:`TERMS`) so that a single term can be
sign-flipped; the chart bivector in :mod:`qpflow.bivector` serves as an independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bivector as bv
from .scalars import b_fn

TERMS = (
    "first_line",
    "sgn_ga",
    "z_ag",
    "sgn_eb",
    "z_be",
    "sgn_ea",
    "z_ae",
    "sgn_gb",
    "z_bg",
    "delta_bg",
    "b_bg",
    "delta_ae",
    "b_ae",
)


@dataclass(frozen=True)
class IFn:
    """I^k_{ab} with 0-based ball indices a, b."""

    k: int
    a: int
    b: int

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be nonnegative")

    def observable(self):
        return bv.I_obs(self.k, self.a, self.b)


def I_table(m, kmax):
    """T[k, a, b] = v_a^+ A^k v_b for 0 <= k <= kmax."""
    out = np.zeros((kmax + 1, m.d, m.d), dtype=complex)
    Ak = np.eye(m.n, dtype=complex)
    for k in range(kmax + 1):
        out[k] = m.V.conj() @ Ak @ m.V.T
        Ak = Ak @ m.A
    return out


def eval_I(spec, m):
    Ak = np.linalg.matrix_power(m.A, spec.k)
    return complex(np.vdot(m.V[spec.a], Ak @ m.V[spec.b]))


def _sgn(t):
    return float(np.sign(t))


def closed_bracket(s1, s2, m, z=None, flip=None, variant="sum"):
    """Closed-form {I^k_ab, I^l_ge}_z; ``flip`` names a term of :data:`TERMS` to negate.

    The first line's inner sum is (sum_{r=1}^{k-1} + sum_{r=1}^{l-1}) for ``variant="sum"``;
    ``variant="difference"`` uses (sum_{r=1}^{k} - sum_{r=1}^{l}), which agrees only when
    min(k, l) <= 1 and is kept as a negative control.
    """
    if variant not in ("sum", "difference"):
        raise ValueError(f"unknown variant {variant!r}")
    if flip is not None and flip not in TERMS:
        raise ValueError(f"unknown term {flip!r}")
    k, al, be = s1.k, s1.a, s1.b
    l, ga, ep = s2.k, s2.a, s2.b
    T = I_table(m, k + l)
    zs = np.zeros((m.d, m.d)) if z is None else z.zstar()
    r2 = m.radii2()
    x = m.x
    IabIge = T[k, al, be] * T[l, ga, ep]
    terms = {}

    if k == 0 or l == 0:
        terms["first_line"] = 0.0
    else:
        fl = 0.5 * T[0, ga, be] * T[k + l, al, ep] - 0.5 * T[k + l, ga, be] * T[0, al, ep]
        def pair(r):
            return T[r, ga, be] * T[k + l - r, al, ep] - T[k + l - r, ga, be] * T[r, al, ep]

        if variant == "sum":
            acc = sum(pair(r) for r in range(1, k)) + sum(pair(r) for r in range(1, l))
        else:
            acc = sum(pair(r) for r in range(1, k + 1)) - sum(pair(r) for r in range(1, l + 1))
        terms["first_line"] = fl + 0.5 * acc

    terms["sgn_ga"] = 0.5 * _sgn(ga - al) * T[k, ga, be] * T[l, al, ep]
    terms["z_ag"] = -zs[al, ga] * IabIge
    terms["sgn_eb"] = 0.5 * _sgn(ep - be) * T[l, ga, be] * T[k, al, ep]
    terms["z_be"] = -zs[be, ep] * IabIge
    terms["sgn_ea"] = -0.5 * _sgn(ep - al) * T[k + l, ga, be] * T[0, al, ep]
    terms["z_ae"] = zs[al, ep] * IabIge
    terms["sgn_gb"] = -0.5 * _sgn(ga - be) * T[0, ga, be] * T[k + l, al, ep]
    terms["z_bg"] = zs[be, ga] * IabIge

    if be == ga:
        bb = b_fn(x[be] * r2[be])
        terms["delta_bg"] = (1j / x[be]) * T[k + l, al, ep]
        terms["b_bg"] = 0.5j * bb * (r2[be] * T[k + l, al, ep] - IabIge)
    else:
        terms["delta_bg"] = terms["b_bg"] = 0.0
    if al == ep:
        ba = b_fn(x[al] * r2[al])
        terms["delta_ae"] = -(1j / x[al]) * T[k + l, ga, be]
        terms["b_ae"] = -0.5j * ba * (r2[al] * T[k + l, ga, be] - IabIge)
    else:
        terms["delta_ae"] = terms["b_ae"] = 0.0

    if flip is not None:
        terms[flip] = -terms[flip]
    return complex(sum(terms.values()))


def engine_bracket(s1, s2, m, z=None, P=None):
    return complex(bv.bracket(s1.observable(), s2.observable(), m, bv.BivectorKind.standard(z), P))


def index_sweep(d, kmax):
    """All pairs (IFn, IFn) with k, l <= kmax and ball indices < d."""
    specs = [IFn(k, a, b) for k in range(kmax + 1) for a in range(d) for b in range(d)]
    return [(s1, s2) for s1 in specs for s2 in specs]


def sweep_residual(m, z=None, kmax=3, variant="sum"):
    """max |closed - engine| over the full index sweep at one point."""
    P = bv.assemble_P(m, bv.BivectorKind.standard(z))
    specs = [IFn(k, a, b) for k in range(kmax + 1) for a in range(m.d) for b in range(m.d)]
    grads = {s: s.observable().gradient(m) for s in specs}
    worst = 0.0
    for s1 in specs:
        g1P = grads[s1] @ P
        for s2 in specs:
            eng = g1P @ grads[s2]
            worst = max(worst, abs(closed_bracket(s1, s2, m, z, variant=variant) - eng))
    return worst


def mutation_sensitivity(m, z, term, kmax=2):
    """max over the sweep of |closed(flipped term) - engine| (large when the flip is detected)."""
    P = bv.assemble_P(m, bv.BivectorKind.standard(z))
    specs = [IFn(k, a, b) for k in range(kmax + 1) for a in range(m.d) for b in range(m.d)]
    grads = {s: s.observable().gradient(m) for s in specs}
    worst = 0.0
    for s1 in specs:
        g1P = grads[s1] @ P
        for s2 in specs:
            eng = g1P @ grads[s2]
            worst = max(worst, abs(closed_bracket(s1, s2, m, z, flip=term) - eng))
    return worst


def antisymmetry_residual(m, z=None, kmax=3, variant="sum"):
    """max |closed(s1, s2) + closed(s2, s1)| over the index sweep (no engine involved)."""
    return max(
        abs(closed_bracket(s1, s2, m, z, variant=variant) + closed_bracket(s2, s1, m, z, variant=variant))
        for s1, s2 in index_sweep(m.d, kmax)
    )


def radial_bracket(a, spec, m):
    """Closed form {|v_a|^2, I^l_ge} = (i/x_a)(delta_ag - delta_ae) I^l_ge."""
    return (1j / m.x[a]) * ((a == spec.a) - (a == spec.b)) * eval_I(spec, m)


def casimir_check(k, f, m, z=None):
    """|{tr A^k, f}_z| evaluated with the engine."""
    return abs(bv.bracket(bv.tr_power(k), f, m, bv.BivectorKind.standard(z)))
