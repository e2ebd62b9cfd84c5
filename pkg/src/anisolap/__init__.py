"""anisolap: solve and verify anisotropic Orlicz-Laplacian boundary-value
problems on 2-D domains.

Subpackages:
    young         Young functions, growth indices, conjugates, regularization
    norm_field    anisotropic norms and the monotone vector fields they induce
    rearrangement rearrangements and Lorentz/Orlicz norms on finite measure spaces
    geometry      2-D domains, boundary curvature functionals, triangulation
    solver        P1 finite-element minimization, gradient-bound diagnostics
    harness       config-driven experiment runner and property suite
"""

from . import geometry, harness, norm_field, rearrangement, solver, young

__all__ = ["young", "norm_field", "rearrangement", "geometry", "solver", "harness"]
__version__ = "0.1.0"
