"""Exception hierarchy shared across the node components."""


class ProtocolError(Exception):
    """Base class for all errors raised by this package."""


class ScalarRangeError(ProtocolError, ValueError):
    """Scalar argument outside [0, q)."""


class GroupMismatchError(ProtocolError, ValueError):
    """Operands belong to different group parameter sets."""


class SignatureDecodeError(ProtocolError, ValueError):
    """Signature bytes are structurally malformed (distinct from a failed verification)."""


class ValidationError(ProtocolError, ValueError):
    """Input rejected by a precondition check."""


class NotFoundError(ProtocolError, LookupError):
    """Referenced entity does not exist."""


class AuthorizationError(ProtocolError, PermissionError):
    """Caller's role or status does not permit the operation."""


class ConflictError(ProtocolError):
    """Operation conflicts with existing registered state."""


class InvalidOpeningError(ProtocolError):
    """A revealed (value, randomness) pair does not match its commitment."""


class LedgerError(ProtocolError):
    """Block construction or verification failure on append."""
