"""
Check reports.

A ``CheckReport`` is what every check returns: the inputs that reproduce the
measurement (model descriptor, parameters, regions, tolerances), the
measured dimensions and residuals, and the verdict.
"""

import json
import math
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from app.errors import LtoError


def plain(value: Any) -> Any:
    """Convert numpy scalars/arrays and tuples into JSON-friendly values."""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        if math.isnan(v) or math.isinf(v):
            return str(v)
        return v
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(value.real), "im": float(value.imag)}
    return value


@dataclass
class CheckReport:
    check: str
    model: Dict[str, Any] = field(default_factory=dict)
    params: Dict[str, Any] = field(default_factory=dict)
    regions: Dict[str, Any] = field(default_factory=dict)
    dims: Dict[str, Any] = field(default_factory=dict)
    residuals: Dict[str, Any] = field(default_factory=dict)
    tolerances: Dict[str, Any] = field(default_factory=dict)
    details: Dict[str, Any] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)
    passed: bool = False
    seconds: float = 0.0
    error: Optional[Dict[str, Any]] = None
    _started: float = field(default=0.0, repr=False)

    @classmethod
    def start(cls, check: str, model: Optional[Dict] = None, params: Optional[Dict] = None) -> "CheckReport":
        return cls(check=check, model=dict(model or {}), params=dict(params or {}), _started=time.perf_counter())

    def note(self, text: str) -> None:
        if text not in self.notes:
            self.notes.append(text)

    def finish(self, passed: bool, note: Optional[str] = None) -> "CheckReport":
        self.passed = bool(passed)
        if note:
            self.note(note)
        self.seconds = time.perf_counter() - self._started if self._started else 0.0
        return self

    def fail_with(self, error: LtoError) -> "CheckReport":
        self.error = error.to_dict()
        return self.finish(False)

    def to_json(self, timing: bool = True) -> Dict[str, Any]:
        return plain(
            {
                "check": self.check,
                "model": self.model,
                "params": self.params,
                "regions": self.regions,
                "dims": self.dims,
                "residuals": self.residuals,
                "tolerances": self.tolerances,
                "details": self.details,
                "notes": self.notes,
                "pass": self.passed,
                "seconds": round(self.seconds, 6) if timing else 0.0,
                "error": self.error,
            }
        )

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "CheckReport":
        return cls(
            check=data["check"],
            model=data.get("model", {}),
            params=data.get("params", {}),
            regions=data.get("regions", {}),
            dims=data.get("dims", {}),
            residuals=data.get("residuals", {}),
            tolerances=data.get("tolerances", {}),
            details=data.get("details", {}),
            notes=list(data.get("notes", [])),
            passed=bool(data.get("pass", False)),
            seconds=float(data.get("seconds", 0.0)),
            error=data.get("error"),
        )

    def dumps(self, timing: bool = True) -> str:
        return json.dumps(self.to_json(timing), sort_keys=True, indent=2)
