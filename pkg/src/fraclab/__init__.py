"""Numerical laboratory for the restricted fractional Laplacian.

Closed-form constants, lattice discretization with exterior-zero data,
constrained energy minimization and blow-up diagnostics for
(-Delta)^s u = u^p - eps u^q on bounded domains.
"""

from .special import Exponents, ProfileConstants, closed_form_constants

__all__ = ["Exponents", "ProfileConstants", "closed_form_constants"]
__version__ = "0.1.0"
