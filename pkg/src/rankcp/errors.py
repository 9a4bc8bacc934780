"""Exception types shared across the package."""


class RankCPError(Exception):
    """Base class for all library errors."""


class InvalidInput(RankCPError, ValueError):
    """An argument violates a documented contract (usage/type error)."""


class InvalidDelta(InvalidInput):
    """Confidence parameter outside its admissible interval."""


class InvalidData(RankCPError, ValueError):
    """A data file is malformed or internally inconsistent."""


class TiesDetected(RankCPError, ValueError):
    """Exact duplicate values where a strict total order is required."""


class RankOutOfRange(RankCPError, IndexError):
    """A rank index lies outside [1, size]."""


class InsufficientSample(RankCPError, ValueError):
    """Monte-Carlo sample too small for the requested confidence."""


class DimensionMismatch(RankCPError, ValueError):
    """Array sizes or identifiers do not line up."""


class InfeasibleLevel(RankCPError, ValueError):
    """(alpha, delta, n) admit no calibration index k <= n."""


class MissingTruth(RankCPError, ValueError):
    """Operation requires ground-truth values that were not provided."""


class EmptyPredictionSet(RankCPError, ValueError):
    """No rank satisfies the score threshold; integer intervals cannot be empty."""
