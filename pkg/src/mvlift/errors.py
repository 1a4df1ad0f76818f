"""Exception types shared across the toolkit."""


class InvalidParameterError(ValueError):
    """A constructor or operation parameter is outside its admissible range."""


class InvalidInputError(ValueError):
    """Input data violates a structural invariant (shapes, stochastic rows, ...)."""


class CapacityError(RuntimeError):
    """A solve would exceed its declared size budget."""


class StructureError(ValueError):
    """The induced edge graph does not have the topology a solver requires."""


class NumericalError(RuntimeError):
    """An iterative numerical routine failed to converge; carries diagnostics."""


class UnsupportedError(NotImplementedError):
    """The requested operation is outside the supported configuration."""
