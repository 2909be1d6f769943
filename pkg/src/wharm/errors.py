"""Exception types shared across the toolkit."""


class WharmError(Exception):
    """Base class for all toolkit errors."""


class DomainError(WharmError):
    """Operation applied to a grid function living on the wrong domain."""


class GridAlignmentError(WharmError):
    """Dyadic structure does not align with the grid cells."""


class WeightError(WharmError):
    """Weight is not strictly positive (or otherwise invalid)."""


class ParameterError(WharmError):
    """Scalar parameter outside its admissible range."""


class RangeError(WharmError):
    """Numeric overflow / underflow in a pointwise transform."""


class SingularityError(WharmError):
    """Kernel evaluated on its diagonal singularity."""


class BackendError(WharmError):
    """Operator backend incompatible with the requested domain/kind."""


class SizeError(WharmError):
    """Problem size exceeds the dense-matrix cap."""


class SparsityError(WharmError):
    """A children rule violated the mass bound needed for sparseness."""


class DecompositionError(WharmError):
    """Atomic decomposition cannot proceed (input below resolution)."""
