"""Exception types raised across the package."""


class PerlinInitError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(PerlinInitError, ValueError):
    pass


class InvalidGridError(InvalidParameterError):
    pass


class OutOfDomainError(PerlinInitError, ValueError):
    pass


class InvalidConfigError(PerlinInitError, ValueError):
    pass


class NumericError(PerlinInitError, ArithmeticError):
    """Non-finite values appeared during a forward pass."""

    def __init__(self, message: str, layer_index: int | None = None):
        super().__init__(message)
        self.layer_index = layer_index


class ContractError(PerlinInitError, RuntimeError):
    """A cache or state object was used against the wrong owner."""


class TransferError(PerlinInitError, ValueError):
    pass


class InvalidRequestError(PerlinInitError, ValueError):
    pass


class FormatError(PerlinInitError, ValueError):
    """Malformed file contents; ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class VersionError(FormatError):
    pass


class UnsupportedDtypeError(FormatError):
    pass


class InvalidInputError(PerlinInitError, ValueError):
    pass
