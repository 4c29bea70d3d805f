"""Exception and warning types shared across the package."""


class HypfillError(Exception):
    """Base class for all errors raised by hypfill."""


class MetricViolation(HypfillError):
    def __init__(self, message, triple=None):
        super().__init__(message)
        self.triple = triple


class DiameterOutOfRange(HypfillError):
    pass


class DegenerateSpace(HypfillError):
    pass


class SizeLimit(HypfillError):
    pass


class EmptyLevel(HypfillError):
    pass


class DepthExceeded(HypfillError):
    pass


class UnknownFormat(HypfillError):
    pass


class ZeroMass(HypfillError):
    pass


class MissingVertex(HypfillError):
    pass


class NonPositiveWeight(HypfillError):
    pass


class NotAnEdge(HypfillError):
    pass


class EtaPlusNotBelowOne(HypfillError):
    pass


class SchemaMismatch(HypfillError):
    pass


class ResolutionExceeded(UserWarning):
    """Requested depth goes below the resolution of the sample."""


class RegimeWarning(UserWarning):
    """Filling parameters fall outside the regime the theory assumes."""
