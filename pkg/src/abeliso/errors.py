"""Exception types shared across the package."""


class AbelisoError(Exception):
    """Base class for all package errors."""


class InvalidGroup(AbelisoError, ValueError):
    pass


class ShapeError(AbelisoError, ValueError):
    """Element or function does not match the group it is used with."""


class PartitionError(AbelisoError, ValueError):
    pass


class NotASubgroup(AbelisoError, ValueError):
    pass


class SearchCapExceeded(AbelisoError, RuntimeError):
    """Exhaustive search would exceed the configured work cap."""


class GroupTooLarge(AbelisoError, RuntimeError):
    """Group or its automorphism group is beyond the enumeration caps."""


class ConfigError(AbelisoError, ValueError):
    pass


class Indeterminate(AbelisoError, ArithmeticError):
    """A value is too close to zero to carry a phase."""
