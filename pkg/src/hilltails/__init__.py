"""Numerical library for the right and left tails of the ground-state density
of Hill's operator with white-noise potential.

Modules
-------
elliptic      Jacobi elliptic functions and the modulus of the extremal path.
ratefn        The variational rate function and its minimizers.
lame          Closed-form and numerical simple spectrum of the two-gap Lame operator.
discriminant  Hill's discriminant by monodromy integration and by Hochstadt's formula.
asymptotics   Factors of the assembled right-tail law and the closed-form tails.
sampling      Monte Carlo oracles and identity checks.
cli           Command-line front end (``hilltails``).
"""
from .elliptic import EllipticContext, modulus_for_mu, sn_cn_dn
from .grid import GridPath

__version__ = "0.1.0"

__all__ = ["EllipticContext", "GridPath", "modulus_for_mu", "sn_cn_dn", "__version__"]
