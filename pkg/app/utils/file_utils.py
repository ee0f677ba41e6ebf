"""
Report file utilities.
"""

import json
import logging
import os
from typing import Any, Dict, List

import aiofiles

from app.errors import ConfigError

logger = logging.getLogger(__name__)

# Wall-clock fields differ between runs
VOLATILE_KEYS = ("seconds",)


async def write_report(path: str, text: str) -> str:
    """
    Write a serialized report, creating parent directories.

    Args:
        path: Destination file
        text: Report text (already canonical JSON)

    Returns:
        The path written
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    async with aiofiles.open(path, "w", encoding="utf-8") as f:
        await f.write(text)
        if not text.endswith("\n"):
            await f.write("\n")
    logger.info("Wrote report to %s", path)
    return path


async def read_report(path: str) -> Dict[str, Any]:
    """Read a merged or single-check report from disk."""
    try:
        async with aiofiles.open(path, "r", encoding="utf-8") as f:
            text = await f.read()
    except OSError as err:
        raise ConfigError(f"Cannot read report: {err}", "report", {"path": path})
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"Report is not JSON: {err}", "report", {"path": path})


def report_list(data: Dict[str, Any]) -> List[Dict[str, Any]]:
    """The check reports inside a merged document, or the document itself when it is a single report."""
    if "reports" in data:
        return list(data["reports"])
    if "check" in data:
        return [data]
    raise ConfigError("Document holds no check reports", "report")


def _strip(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _strip(v) for k, v in value.items() if k not in VOLATILE_KEYS}
    if isinstance(value, list):
        return [_strip(v) for v in value]
    return value


def compare_golden(current: Dict[str, Any], golden: Dict[str, Any], tol: float = 1e-9) -> List[str]:
    """
    Differences between a report and its stored golden copy.

    Verdicts, dimensions and regions must match exactly; residuals may drift
    by ``tol``. Timings are ignored.

    Returns:
        Human readable paths of the differences, empty when they agree
    """
    return _diff(_strip(current), _strip(golden), "", tol)


def _diff(a: Any, b: Any, path: str, tol: float) -> List[str]:
    if isinstance(a, dict) and isinstance(b, dict):
        out = []
        for key in sorted(set(a) | set(b)):
            if key not in a or key not in b:
                out.append(f"{path}.{key}: missing on one side")
            else:
                out.extend(_diff(a[key], b[key], f"{path}.{key}", tol))
        return out
    if isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            return [f"{path}: length {len(a)} != {len(b)}"]
        out = []
        for i, (x, y) in enumerate(zip(a, b)):
            out.extend(_diff(x, y, f"{path}[{i}]", tol))
        return out
    if isinstance(a, float) or isinstance(b, float):
        if isinstance(a, (int, float)) and isinstance(b, (int, float)) and not isinstance(a, bool) and abs(a - b) <= tol:
            return []
        return [f"{path}: {a!r} != {b!r}"]
    return [] if a == b else [f"{path}: {a!r} != {b!r}"]

