"""Quasi-Jacobi residual against the distance of the sample point from the ball boundary.

Prints, per (n, d), the worst absolute residual of jacobiator - phi/2 for random generator
triples, and for invariant triples the absolute and relative (to the largest cyclic term)
Jacobi residual binned by the smallest distance 2 pi - |x||v|^2.
"""

import argparse

import numpy as np

from qpflow import bivector as bv
from qpflow import phasespace as ps


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cases", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    bins = [0.0, 0.1, 0.5, 2.0, 2 * np.pi]
    print("n d  max|jac - phi/2|  (generator triples)")
    rows = []
    for n in (2, 3):
        for d in (1, 2, 3):
            x = np.linspace(1.0, -1.5, d)
            gens = bv.generator_catalog(n, d)
            pool = [bv.tr_power(1), bv.tr_power(2)] + [bv.I_obs(k, a, b) for k in range(3) for a in range(d) for b in range(d)]
            worst = 0.0
            for i in range(args.cases):
                rng = np.random.default_rng([args.seed, n, d, i])
                m = ps.random_point(n, d, x, rng)
                kind = bv.BivectorKind.standard(ps.PencilParams.random(d, rng))
                f = [gens[j] for j in rng.choice(len(gens), 3, replace=False)]
                worst = max(worst, bv.quasi_jacobi_residual(*f, m, kind))
                g = [pool[j] for j in rng.choice(len(pool), 3, replace=False)]
                terms = bv.jacobiator_terms(*g, m, kind)
                dist = float(np.min(2 * np.pi - np.abs(m.ball_args())))
                rows.append((dist, abs(terms.sum()), abs(terms.sum()) / max(1.0, np.max(np.abs(terms)))))
            print(f"{n} {d}  {worst:.3e}")
    rows = np.array(rows)
    print("\ninvariant triples: distance to pole   count   max abs   max rel")
    for lo, hi in zip(bins, bins[1:]):
        sel = rows[(rows[:, 0] >= lo) & (rows[:, 0] < hi)]
        if len(sel):
            print(f"  [{lo:4.2f}, {hi:4.2f})  {len(sel):6d}   {sel[:, 1].max():.2e}  {sel[:, 2].max():.2e}")


if __name__ == "__main__":
    main()
