"""Nonlocal vector calculus toolkit.

Weighted and unweighted nonlocal operators built from two-point interaction
kernels, closed-form scaling constants with Monte Carlo / spectral oracles,
equivalence kernels for the composed operators, Green-type identity checks,
and a volume-constrained Galerkin solver, all on a shared deterministic
quadrature engine.
"""

__version__ = "0.1.0"

from .quadrature import QuadratureConfig, QuadratureError, pv_integrate, \
    sphere_integrate, mc_integrate
