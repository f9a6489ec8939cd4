"""Exception hierarchy for the g2lab workbench."""


class G2LabError(Exception):
    """Base class for all g2lab errors."""


class DegreeOverflow(G2LabError):
    """Wedge product would exceed the ambient dimension."""


class DegreeUnderflow(G2LabError):
    """Interior product of a 0-form."""


class DegreeMismatch(G2LabError):
    """Operands must have equal degree."""


class DimensionMismatch(G2LabError):
    """Operands live on spaces of different dimension."""


class UnsupportedDegree(G2LabError):
    """Operation defined only for specific form degrees."""


class NotPositiveDefinite(G2LabError):
    """A metric argument failed its positive-definiteness check."""


class NotPositive(G2LabError):
    """A 3-form is not in the positive cone (no induced metric)."""


class NearDegenerate(NotPositive):
    """The defining determinant is below the degeneracy threshold."""


class HasSevenComponent(G2LabError):
    """Argument has a nonzero 7-type component where none is allowed."""


class StepLeavesPositiveCone(G2LabError):
    """A finite-difference step exits the positive cone."""


class DegenerateHessian(G2LabError):
    """Hessian has an eigenvalue below tolerance."""


class NonIntegralCurvature(G2LabError):
    """Curvature periods are not integral where integrality is required."""


class NewtonDiverged(G2LabError):
    """Newton iteration failed to converge within the iteration budget."""


class SingularLinearization(G2LabError):
    """Newton linearization is rank-deficient at the current iterate."""


class FamilyLeavesModuli(G2LabError):
    """A test family drifted out of the critical moduli beyond tolerance."""
