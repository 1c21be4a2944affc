"""Exception types shared across the library."""


class ScreplayError(Exception):
    """Base class for all library errors."""


class ShapeError(ScreplayError):
    """Operand shapes are incompatible with the requested operation."""


class DtypeError(ScreplayError):
    """Operands mix precision modes within one computation."""


class NumericError(ScreplayError):
    """A computation produced a non-finite value."""


class DegenerateInputError(ScreplayError):
    """Input is outside the numerically safe domain (e.g. near-zero row norm)."""


class StateError(ScreplayError):
    """Object is in the wrong state for the requested operation."""


class ContractError(ScreplayError):
    """Caller violated a documented precondition."""


class ConfigError(ScreplayError):
    """Configuration values are inconsistent or unknown."""


class StalePrototypesError(StateError):
    """Prototype set was built from an older model state."""


class NoPrototypesError(StateError):
    """No prototypes are available for classification."""


class NoClassesError(StateError):
    """The classification head holds no classes."""
