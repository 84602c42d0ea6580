"""Check records and machine-readable run reports."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

import numpy as np

SCHEMA_VERSION = 1


@dataclass
class Check:
    """One named comparison: ``value`` against ``threshold``."""

    name: str
    value: Optional[float]
    threshold: Optional[float]
    passed: bool
    note: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "threshold": self.threshold,
                "passed": bool(self.passed), "note": self.note}


def check_le(name: str, value: float, threshold: float, note: str = "") -> Check:
    return Check(name, float(value), float(threshold), bool(value <= threshold), note)


@dataclass
class CheckList:
    """An ordered collection of checks; passes iff every check passes."""

    title: str
    checks: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, check: Check) -> Check:
        self.checks.append(check)
        return check

    def extend(self, checks: Iterable[Check]):
        self.checks.extend(checks)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def names(self) -> list[str]:
        return [c.name for c in self.checks]


@dataclass
class Report:
    command: str
    config: dict
    checks: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    wall_time: float = 0.0
    version: str = ""

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def config_hash(self) -> str:
        blob = json.dumps(_normalize(self.config), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def as_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config": self.config,
            "config_hash": self.config_hash,
            "passed": self.passed,
            "checks": [c.as_dict() for c in self.checks],
            "results": self.results,
            "version": self.version,
            "wall_time": self.wall_time,
        }


def _normalize(obj: Any) -> Any:
    """JSON-ready copy with floats rounded to 17 significant digits."""
    if isinstance(obj, dict):
        return {str(k): _normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_normalize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _normalize(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return repr(x)
        return float(f"{x:.17g}")
    if isinstance(obj, complex):
        return [_normalize(obj.real), _normalize(obj.imag)]
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "as_dict"):
        return _normalize(obj.as_dict())
    return str(obj)


def to_json(report: Report) -> str:
    return json.dumps(_normalize(report.as_dict()), indent=2, sort_keys=False) + "\n"


def to_text(report: Report) -> str:
    lines = [f"{report.command}: {'PASS' if report.passed else 'FAIL'}"]
    for c in report.checks:
        val = "" if c.value is None else f" value={c.value:.6g}"
        thr = "" if c.threshold is None else f" threshold={c.threshold:.3g}"
        note = f" ({c.note})" if c.note else ""
        lines.append(f"  [{'PASS' if c.passed else 'FAIL'}] {c.name}{val}{thr}{note}")
    return "\n".join(lines) + "\n"


def to_csv(report: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "value", "threshold", "passed", "note"])
    for c in report.checks:
        w.writerow([c.name, _fmt(c.value), _fmt(c.threshold), int(c.passed), c.note])
    return buf.getvalue()


def _fmt(x) -> str:
    return "" if x is None else f"{float(x):.17g}"


def write_atomic(path: str, text: str) -> int:
    """Write via a temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    data = text.encode("utf-8")
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".addkit-", suffix=".tmp")
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return len(data)


def emit_report(report: Report, fmt: str = "json", path: Optional[str] = None, stream=None) -> int:
    """Serialize ``report`` and write it to ``path`` (atomically) or ``stream``."""
    text = {"json": to_json, "csv": to_csv, "text": to_text}[fmt](report)
    if path:
        return write_atomic(path, text)
    if stream is not None:
        stream.write(text)
    return len(text.encode("utf-8"))
