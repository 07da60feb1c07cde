"""Structured exceptions raised across the toolkit.

Every error derives from :class:`SaddleNodeError`.  Errors that signal bad
user input (as opposed to a failed computation) additionally derive from
:class:`ValidationError`; the CLI maps those to exit code 2.
"""


class SaddleNodeError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(SaddleNodeError):
    """The input violates a documented precondition."""


class NonzeroConstantTerm(ValidationError):
    """A substituted series has a nonzero constant term."""


class SingularLinearPart(ValidationError):
    """The y-linear part of a fibered map is not invertible."""


class NotDiagonalizable(ValidationError):
    """The y-linear part at the origin cannot be brought to diag(-lam, lam)."""


class ResonanceViolation(ValidationError):
    """The y-linear eigenvalues are not opposite nonzero numbers."""


class DegenerateQuadraticPart(ValidationError):
    """The Hessian of a Hamiltonian at the origin is singular."""


class SmallDivisor(SaddleNodeError):
    """A homological equation hit a vanishing divisor."""


class NonDegenerateViolation(ValidationError):
    """The residue lies in the non-positive rationals (excluded case)."""


class NotDivIntegrable(SaddleNodeError):
    """The restriction to x=0 has no formal first integral of Morse type."""


class VariantMismatch(ValidationError):
    """Borel series of different variants were combined."""


class DivergentIntegrand(SaddleNodeError):
    """A Laplace integral violates its exponential growth bound."""


class ZeroEigenvalue(ValidationError):
    """The irregular model equation has k = 0."""


class NonpositiveRealPart(ValidationError):
    """The regular model equation requires Re(k) > 0."""


class ContinuationFailure(SaddleNodeError):
    """Pade continuation has a pole on (or too close to) the sampled set."""


class DomainExit(SaddleNodeError):
    """A trajectory left the stable domain it was supposed to stay in."""


class StepSizeUnderflow(SaddleNodeError):
    """The ODE integrator failed to make progress."""


class BranchViolation(ValidationError):
    """A point lies outside the sector of the chosen logarithm branch."""


class OutOfDomain(ValidationError):
    """A point lies outside the convergence domain of a chart."""


class ContourResolutionInsufficient(SaddleNodeError):
    """Contour quadrature did not converge under refinement."""


class HypersurfaceNotAnalytic(SaddleNodeError):
    """The invariant hypersurface required by the operation is divergent."""
