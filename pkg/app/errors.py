"""
Error types shared by the verification toolkit.

Every failure carries a stable ``code`` so that reports, the CLI and the
service can surface it without parsing messages.
"""

from typing import Any, Dict, Optional


ERROR_CODES = frozenset(
    {
        "REGION_NOT_NESTED",
        "BAD_AXIS",
        "DIM_MISMATCH",
        "NOT_COMMUTING",
        "NOT_PROJECTION",
        "BAD_GROUP",
        "BUDGET_EXCEEDED",
        "BAD_INTERVAL",
        "NOT_SYMMETRIC",
        "INVALID_FUSION_DATA",
        "NON_CONVERGED",
        "NOT_A_STATE",
        "NOT_CYCLIC",
        "NOT_SEPARATING",
        "NOT_FAITHFUL",
        "NOT_SUBALGEBRA",
        "NOT_MODULAR_INVARIANT",
        "NO_SURROUNDING_REGION",
        "NO_ENLARGEMENTS",
        "NOT_SEPARATED",
        "NEEDS_EXACT_BACKEND",
        "CONFIG_INVALID",
        "UNKNOWN_CHECK",
    }
)


class LtoError(Exception):
    """Base error with a machine readable code."""

    def __init__(self, code: str, message: str = "", detail: Optional[Dict[str, Any]] = None):
        if code not in ERROR_CODES:
            raise ValueError(f"Unknown error code: {code}")
        self.code = code
        self.message = message or code
        self.detail = detail or {}
        super().__init__(f"{code}: {self.message}")

    def to_dict(self) -> Dict[str, Any]:
        return {"code": self.code, "message": self.message, "detail": self.detail}


class RegionError(LtoError):
    pass


class OperatorError(LtoError):
    pass


class ModelError(LtoError):
    pass


class FusionError(LtoError):
    pass


class AlgebraError(LtoError):
    pass


class CheckError(LtoError):
    pass


class ConfigError(LtoError):
    """Invalid run configuration; ``field`` is the dotted path of the offending value."""

    def __init__(self, message: str, field: str = "", detail: Optional[Dict[str, Any]] = None):
        detail = dict(detail or {})
        detail["field"] = field
        super().__init__("CONFIG_INVALID", message, detail)
        self.field = field
