"""
Tabular views of check reports.
"""

import json
import math
from typing import Any, Dict, List

import pandas as pd

from app.utils.file_utils import report_list

COLUMNS = ["check", "model", "pass", "max_residual", "dims", "error", "seconds"]


def canonical_dumps(data: Dict[str, Any]) -> str:
    """Sorted-key JSON with a fixed layout; identical inputs give identical bytes."""
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False)


def _model_label(model: Dict[str, Any]) -> str:
    if not model:
        return ""
    if "category" in model:
        return str(model["category"])
    kind = model.get("kind", "?")
    patch = "x".join(str(v) for v in model.get("patch", []))
    extra = f" {model['group']}" if kind == "qd" and isinstance(model.get("group"), str) else ""
    return f"{kind}{extra} {patch}".strip()


def _max_residual(residuals: Dict[str, Any]) -> float:
    values = [float(v) for v in residuals.values() if isinstance(v, (int, float)) and not isinstance(v, bool)]
    values = [v for v in values if not math.isnan(v)]
    return max(values) if values else 0.0


def report_frame(data: Dict[str, Any]) -> pd.DataFrame:
    """
    One row per check report.

    Args:
        data: A merged run document or a single report

    Returns:
        DataFrame with the columns of COLUMNS
    """
    rows: List[Dict[str, Any]] = []
    for report in report_list(data):
        error = report.get("error") or {}
        rows.append(
            {
                "check": report.get("check", ""),
                "model": _model_label(report.get("model", {})),
                "pass": bool(report.get("pass", False)),
                "max_residual": _max_residual(report.get("residuals", {})),
                "dims": ", ".join(f"{k}={v}" for k, v in sorted(report.get("dims", {}).items()) if not isinstance(v, dict)),
                "error": error.get("code", ""),
                "seconds": float(report.get("seconds", 0.0) or 0.0),
            }
        )
    return pd.DataFrame(rows, columns=COLUMNS)


def summary(frame: pd.DataFrame) -> Dict[str, Any]:
    """Pass counts per check."""
    if frame.empty:
        return {"total": 0, "passed": 0, "by_check": {}}
    grouped = frame.groupby("check")["pass"].agg(["count", "sum"])
    return {
        "total": int(len(frame)),
        "passed": int(frame["pass"].sum()),
        "by_check": {check: {"count": int(row["count"]), "passed": int(row["sum"])} for check, row in grouped.iterrows()},
    }


def render_table(frame: pd.DataFrame) -> str:
    if frame.empty:
        return "(no reports)"
    shown = frame.copy()
    shown["pass"] = shown["pass"].map({True: "PASS", False: "FAIL"})
    shown["max_residual"] = shown["max_residual"].map(lambda v: f"{v:.2e}")
    return shown.to_string(index=False)
