"""Exception types shared across the package."""


class LatcovError(Exception):
    """Base class for all package errors."""


class DimMismatch(LatcovError):
    """Operands have incompatible dimensions."""


class SingularMatrix(LatcovError):
    """Matrix inversion or solving hit a singular matrix."""


class DegenerateSimplex(LatcovError):
    """Simplex vertices are affinely dependent."""


class InvalidTriangulation(LatcovError):
    """Simplex classes do not tile space face-to-face under translation."""


class ConeMembershipViolated(LatcovError):
    """A form lies outside the closed secondary cone it was paired with."""


class WalkStalled(LatcovError):
    """Segment walk could not resolve degenerate wall crossings."""


class NotAFacet(LatcovError):
    """Requested flip normal is not a wall of the triangulation's cone."""


class FlipProducedInvalid(LatcovError):
    """Bistellar flip result failed triangulation validation."""


class EmptyCone(LatcovError):
    """Secondary cone has no interior point."""


class NoStrictlyFeasibleStart(LatcovError):
    """Could not construct a strictly feasible starting point."""


class NumericalFailure(LatcovError):
    """Float optimization failed to converge."""


class RoundingInfeasible(LatcovError):
    """Rationalized solution violates exact feasibility."""


class RepairSingular(LatcovError):
    """Exact repair system for the dual equalities is singular."""


class MuNotOne(LatcovError):
    """Local optimality tests require the form scaled to inhomogeneous minimum one."""


class NonPositiveMu(LatcovError):
    """Inhomogeneous minimum must be positive."""


class UnboundedProgram(LatcovError):
    """Linear program is unbounded where an optimum was required."""


class LimitReached(LatcovError):
    """Enumeration stopped at the configured node limit."""
