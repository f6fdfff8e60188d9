"""Bracket algebra of the integrals I^k_ab = v_a^+ A^k v_b.

Compares the closed formula with the bivector engine over the full index sweep k, l <= kmax,
with the sum and the difference-of-sums forms of the first line, and prints the sensitivity of the
comparison to a sign flip of each individual term.
"""

import argparse

import numpy as np

from qpflow import integrals as fi
from qpflow import phasespace as ps


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=5)
    ap.add_argument("--kmax", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print("n d   sum        difference   antisym(sum)   antisym(difference)")
    for n in (2, 3):
        for d in (2, 3):
            x = np.linspace(1.0, -1.5, d)
            vals = np.zeros(4)
            for i in range(args.points):
                rng = np.random.default_rng([args.seed, n, d, i])
                m = ps.random_point(n, d, x, rng)
                z = ps.PencilParams.random(d, rng)
                vals = np.maximum(vals, [
                    fi.sweep_residual(m, z, args.kmax),
                    fi.sweep_residual(m, z, args.kmax, variant="difference"),
                    fi.antisymmetry_residual(m, z, args.kmax),
                    fi.antisymmetry_residual(m, z, args.kmax, variant="difference"),
                ])
            print(f"{n} {d}   " + "   ".join(f"{v:.2e}" for v in vals))
    m = ps.random_point(2, 3, np.linspace(1.0, -1.5, 3), args.seed)
    z = ps.PencilParams.random(3, args.seed)
    print("\nsign-flip sensitivity (n=2, d=3):")
    for term in fi.TERMS:
        print(f"  {term:12s} {fi.mutation_sensitivity(m, z, term, kmax=2):.2e}")


if __name__ == "__main__":
    main()
