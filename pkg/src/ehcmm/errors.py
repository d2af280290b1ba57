"""Exception types shared across the package."""


class EhcError(Exception):
    """Base class for all errors raised by ehcmm."""


class InvalidInputError(EhcError, ValueError):
    """An argument violates an operation's precondition."""


class SchemaError(EhcError):
    """A configuration / scene / model document does not match its schema."""


class UnusableMapError(EhcError):
    """The reachability map has no voxel above the boundary score."""
