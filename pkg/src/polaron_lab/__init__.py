"""Numerical laboratory for the one-dimensional polaron at strong coupling.

Modules: grid (mesh and quadrature), pekar (constrained energy
minimization), branch (solution curve of the Euler-Lagrange equation),
perturb (test-measure perturbations and derivative brackets), froehlich
(truncated electron-phonon Hamiltonian), budget (exact error-order
bookkeeping), cli (configuration-driven runs).
"""

__version__ = "0.1.0"
