"""
Domain errors.

Every failure the library raises carries a stable ``error_code`` so the CLI
can report it as a machine-readable ``ErrorResponse``.
"""

from typing import Any, Dict, Optional


class HoopError(Exception):
    """Base class for all domain failures."""

    error_code = "domain_error"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": type(self).__name__,
            "error_code": self.error_code,
            "message": self.message,
            "details": self.details,
        }


# Exact arithmetic

class DimensionError(HoopError):
    error_code = "dimension_mismatch"


class SingularMatrix(HoopError):
    error_code = "singular_matrix"


class NotIntegral(HoopError):
    error_code = "not_integral"


class NotUnimodular(HoopError):
    error_code = "not_unimodular"


class InvalidInput(HoopError):
    error_code = "invalid_input"


# Geometry

class OutOfDomain(HoopError):
    error_code = "out_of_domain"


class OutOfCone(HoopError):
    error_code = "out_of_cone"


class Unsupported(HoopError):
    error_code = "unsupported"


class InvalidComplex(HoopError):
    error_code = "invalid_complex"


class InvalidIsomorphism(HoopError):
    error_code = "invalid_isomorphism"


# Functions and maps

class InvalidFunction(HoopError):
    error_code = "invalid_function"


class TrivialEndomorphism(HoopError):
    error_code = "trivial_endomorphism"


class NonPositiveDenominator(HoopError):
    error_code = "non_positive_denominator"


class NotAutomorphism(HoopError):
    error_code = "not_automorphism"


class MixedOrientation(HoopError):
    error_code = "mixed_orientation"


class OnBoundary(HoopError):
    error_code = "on_boundary"


class EquivalenceViolation(HoopError):
    error_code = "equivalence_violation"


# Dynamics

class C1Violation(HoopError):
    error_code = "c1_violation"


class DriftError(HoopError):
    error_code = "float_drift"
