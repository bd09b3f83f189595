"""Exception hierarchy shared across the toolkit."""


class GrasspackError(Exception):
    """Base class for all toolkit errors."""


class RankDeficient(GrasspackError):
    """Input matrix does not have full column rank."""


class DimensionMismatch(GrasspackError):
    """Operands live on different Grassmannians."""


class InvalidProblem(GrasspackError):
    """Packing problem parameters violate their preconditions."""


class ImproperRandomState(GrasspackError):
    """Random generator kept producing rank-deficient draws."""


class IoFailure(GrasspackError):
    """Underlying file operation failed."""


class MalformedFile(GrasspackError):
    """File does not conform to the codebook or kernel layout."""


class CorruptBasis(GrasspackError):
    """Stored basis fails the orthonormality check on load."""


class ShapeMismatch(GrasspackError):
    """Requested tensor geometry is inconsistent with the codebook."""


class EmptyTensor(GrasspackError):
    """Kernel tensor contains no kernels."""
