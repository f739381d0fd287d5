"""Exception and warning types raised across footkit."""


class FootkitError(Exception):
    """Base class for all footkit errors."""


class SchemaError(FootkitError):
    """A required field is missing or has the wrong type."""


class InvariantError(FootkitError):
    """A value violates a domain invariant."""


class SizeMismatch(InvariantError):
    """RLE counts do not sum to width * height."""


class ShapeMismatch(InvariantError):
    """Two grids that must share a shape do not."""


class EmptyMask(FootkitError):
    pass


class EmptyRoof(EmptyMask):
    pass


class EmptyBuilding(EmptyMask):
    pass


class ZeroOffset(FootkitError):
    pass


class NoOverlap(FootkitError):
    """The roof and building masks share no pixel."""


class NonMonotoneOverlap(FootkitError):
    """The overlap curve does not have the plateau/decay shape the bisection needs."""


class EmptyKeys(FootkitError):
    pass


class EmptyCalibration(FootkitError):
    pass


class EmptyInput(FootkitError):
    pass


class TooFewVertices(FootkitError):
    pass


class PlacementFailure(FootkitError):
    """Synthetic buildings could not be placed within the retry budget."""


class UsageError(FootkitError):
    """Bad command-line flags or configuration."""


class UnknownSubcommand(UsageError):
    pass


class DegenerateResult(UserWarning):
    """A geometric derivation produced an empty or ambiguous result."""


class DegenerateDirection(UserWarning):
    """Weighted unit vectors cancelled; the input offset is kept."""


class DegenerateRing(UserWarning):
    """Simplification left fewer than three vertices."""
