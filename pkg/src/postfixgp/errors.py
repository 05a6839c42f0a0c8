"""Exception hierarchy shared by every module."""


class PostfixGPError(Exception):
    """Base class for all package errors."""


class ParameterError(PostfixGPError, ValueError):
    """A parameter is outside its documented domain."""


class InvalidTokenError(PostfixGPError, ValueError):
    """A token id does not map to any primitive."""


class InvalidGenomeError(PostfixGPError, ValueError):
    """A genome does not hold a complete postfix expression."""


class InfeasiblePrimitiveSetError(PostfixGPError, ValueError):
    """The primitive set cannot build a genome of the requested length."""


class StateError(PostfixGPError, RuntimeError):
    """An operation was called on an object in the wrong state."""


class DataFormatError(PostfixGPError, ValueError):
    """An input file does not follow its expected format."""


class CorruptFileError(PostfixGPError, ValueError):
    """A snapshot file failed version or invariant validation."""
