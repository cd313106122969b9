"""Numerical laboratory for twisted Laplacians and dynamics on principal bundles.

Structure groups are products U(1)^a x SU(2)^b. Modules:

* ``lie_core``: weights, Casimir eigenvalues, Weyl dimensions.
* ``harmonic``: Haar quadrature and the Peter-Weyl Fourier transform.
* ``spectra``: spectra of the model bundles and the lambda_1 growth classifier.
* ``curvature``: the curvature invariant F_min and non-degeneracy tests.
* ``diophantine``: word balls, covering radii, density exponents.
* ``dynamics``: skew products over toral automorphisms.
* ``weyl_qe``: Weyl counts, the eigendata set Omega, QE variances, twisted flows.
"""

from ._validation import GuardError, ValidationError
from .lie_core import GroupSpec, Weight

__all__ = ["GroupSpec", "Weight", "ValidationError", "GuardError"]
__version__ = "0.1.0"
