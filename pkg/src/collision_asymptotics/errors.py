"""Error hierarchy shared by every module.

Input problems derive from ConfigInvalid, numerical failures from
ComputationFailed; the CLI maps them to exit codes 2 and 1.
"""

class CollisionAsymptoticsError(Exception):
    """Base class for all library errors."""


class ConfigInvalid(CollisionAsymptoticsError, ValueError):
    """Malformed or inconsistent input."""


class ComputationFailed(CollisionAsymptoticsError, RuntimeError):
    """A numerical stage failed."""


class SingularPoint(ConfigInvalid):
    """Evaluation point lies on the singular set."""


class NotUnitVector(ConfigInvalid):
    """Angular argument is not a unit vector."""


class SupercriticalAlpha(ConfigInvalid):
    """Coefficient at or above the critical Hardy threshold."""


class DimensionTooSmall(ConfigInvalid):
    """Dimension too small for the requested configuration."""


class BelowSpectralFloor(ConfigInvalid):
    """Eigenvalue below -((N-2)/2)^2."""


class NorthPole(ConfigInvalid):
    """Stereographic projection undefined at the north pole."""


class KEqualsN(ConfigInvalid):
    """Projection requires k < N."""


class DepthExceeded(ConfigInvalid):
    """Requested reduction depth exceeds N-k."""


class UnknownConstant(ConfigInvalid):
    """A required constant has not been estimated yet."""


class NonConvergence(ComputationFailed):
    """Iterative solve did not converge."""


class IndefiniteOperator(ComputationFailed):
    """Angular operator is not bounded below by the spectral floor."""


class TruncationInsufficient(ComputationFailed):
    """Sector sweep cannot certify the requested eigenvalues."""


class QuadratureFailure(ComputationFailed):
    """Quadrature error estimate exceeds tolerance."""


class StiffFailure(ComputationFailed):
    """Radial ODE step control failed."""


class IrregularBranch(ComputationFailed):
    """Radial solution drifted toward the irregular exponent."""


class DivergentIntegrand(ComputationFailed):
    """Fitted growth makes a radial integral divergent."""


class NearSingularGradient(ComputationFailed):
    """Finite-difference stencil straddles the singular set."""


class ZeroBoundaryNorm(ComputationFailed):
    """Boundary mass H(r) vanishes."""


class NoConvergenceDetected(ComputationFailed):
    """Frequency trace shows no convergence."""


class NoAdmissibleRadius(ComputationFailed):
    """No radius satisfies the smallness condition."""


class EigenspaceUnresolved(ComputationFailed):
    """Eigenvalue cluster around the matched exponent is ambiguous."""


class DegenerateDenominator(ComputationFailed):
    """2*gamma + N - 2 is numerically zero."""


class InterpolationGap(ComputationFailed):
    """Sphere samples too sparse near the south pole."""


class NotASolution(ComputationFailed):
    """Field does not solve the equation to tolerance."""


class IndefiniteForm(ComputationFailed):
    """Quadratic form is not positive definite."""
