"""Numerical toolkit for Schroedinger operators with inverse-square many-body potentials.

Angular spectra on the sphere, radial Fourier modes, Almgren frequency
traces, blow-up profiles, stereographic reduction, Hardy and Pohozaev
checks, and weighted pointwise bounds near collision sets.
"""

__version__ = "0.1.0"

from .errors import CollisionAsymptoticsError, ComputationFailed, ConfigInvalid
from .potential import AngularCoefficient, CylTerm, PairTerm

__all__ = ["AngularCoefficient", "CylTerm", "PairTerm", "CollisionAsymptoticsError",
           "ComputationFailed", "ConfigInvalid", "__version__"]
