"""Random k-extendibility: exact moment combinatorics, random matrix sampling and detection experiments."""

__version__ = "0.1.0"

from .errors import ExtkError, ResourceError, ValidationError, VerificationError

__all__ = ["ExtkError", "ResourceError", "ValidationError", "VerificationError", "__version__"]
