"""Numerical toolkit for the quasi-Poisson master phase space of d quasi-Poisson balls
fused with the internally fused double of U(n).

Submodules
----------
matlie      unitary-group utilities (basis, exp/log, eigen-gauge, r-matrix, class functions)
scalars     structure functions b, a, c, phi and their defining relations
phasespace  points of the master phase space, actions, moment maps
bivector    chart bivector engine, observables, quasi-Jacobi and moment-map checks
forms       quasi-Hamiltonian 2-forms and the bivector/2-form compatibility
dynamics    exact master flows, reduced vector fields, quadrature integration
spinrs      constraint-surface construction and spin Ruijsenaars-Schneider equations
integrals   Poisson algebra of the invariant first integrals I^k_ab
cli         command-line entry point ``qpflow``
"""

__version__ = "0.1.0"
