"""Exception types shared by the library and mapped to CLI exit codes."""


class ExtkError(Exception):
    exit_code = 1
    kind = "error"

    def __init__(self, message, **payload):
        super().__init__(message)
        self.payload = payload

    def to_dict(self):
        return {"error": self.kind, "message": str(self), **self.payload}


class ValidationError(ExtkError, ValueError):
    """Malformed input or violated precondition."""

    exit_code = 2
    kind = "validation"


class ResourceError(ExtkError):
    """Request exceeds a configured enumeration or memory cap."""

    exit_code = 3
    kind = "resource"


class VerificationError(ExtkError):
    """An exhaustive check found a counterexample."""

    exit_code = 4
    kind = "verification"
