"""Exception taxonomy shared across the package.

Errors that certify a partial result (best iterate so far) carry it in
``.best`` so callers can still emit a report.
"""


class ConvexkitError(Exception):
    """Base class for all library errors."""


# -- combination construction -------------------------------------------------

class LengthMismatch(ConvexkitError):
    pass


class NegativeWeight(ConvexkitError):
    pass


class WeightSumOutOfTolerance(ConvexkitError):
    pass


class EmptySet(ConvexkitError):
    pass


# -- spaces and structures ----------------------------------------------------

class DisconnectedTree(ConvexkitError):
    pass


class NotAdmissible(ConvexkitError):
    pass


class NotInDomain(ConvexkitError):
    """A combination falls outside the structure's combination domain."""


class NotFlaggedStrong(ConvexkitError):
    pass


class StrongAxiomsFailing(ConvexkitError):
    pass


class MichaelConditionViolation(ConvexkitError):
    """Supplied combination maps fail their contract on sampled inputs."""


# -- multifunctions -----------------------------------------------------------

class MalformedSpec(ConvexkitError):
    pass


class DomainMismatch(ConvexkitError):
    pass


# -- selection engine ---------------------------------------------------------

class CoverageFailure(ConvexkitError):
    """Some audited domain point meets no fiber of the cover."""


class DivisionByZeroCover(ConvexkitError):
    pass


class ScheduleNotHalving(ConvexkitError):
    pass


class EmptyIntersection(ConvexkitError):
    pass


# -- solvers ------------------------------------------------------------------

class _BestCarrying(ConvexkitError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class MaxIterExceeded(_BestCarrying):
    pass


class MaxDepthExceeded(_BestCarrying):
    pass


class LabelingFailure(ConvexkitError):
    pass


class ResidualAboveTolerance(_BestCarrying):
    pass


class ContainmentViolated(ConvexkitError):
    pass


class NoClusterPoint(ConvexkitError):
    pass
