"""Exception hierarchy shared by all evigraph modules."""


class EvigraphError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(EvigraphError):
    """Tensor or graph dimensions do not line up."""


class DomainError(EvigraphError):
    """Argument outside the mathematical domain of a function."""


class ContractError(EvigraphError):
    """An API precondition was violated by the caller."""


class ValidationError(EvigraphError):
    """A configuration object failed validation."""


class ParseError(EvigraphError):
    """A dataset line could not be parsed."""


class SchemaError(EvigraphError):
    """A parsed dataset record violates the dataset schema."""


class ConflictError(EvigraphError):
    """Belief fusion hit total conflict between opinions."""


class SaturationError(EvigraphError):
    """A combined opinion is near-dogmatic (uncertainty at the floor)."""


class DivergenceError(EvigraphError):
    """Training produced a non-finite loss or parameter value."""
