"""Deterministic report emission: canonical JSON, CSV series, TOML echo.

Reports must be byte-identical across runs with the same config and seed, so
everything here avoids timestamps, dict-order dependence, and locale-touched
formatting. Numeric leaves carry a provenance tag (analytic, quadrature,
eigensolve, probe-estimate, symbolic-tail) as required of every reported
value.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, is_dataclass, asdict
from typing import List

import numpy as np


def pv(value, provenance: str) -> dict:
    """A provenance-tagged numeric value."""
    return {"value": _plain(value), "provenance": provenance}


def _plain(obj):
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, np.ndarray):
        return [_plain(x) for x in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [_plain(x) for x in obj]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if is_dataclass(obj) and not isinstance(obj, type):
        return _plain(asdict(obj))
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    return repr(obj)


def canonical_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2,
                      separators=(",", ": "), allow_nan=False) + "\n"


def run_id(config_text: str, seed: int) -> str:
    digest = hashlib.sha256(f"{config_text}\x00seed={seed}".encode())
    return digest.hexdigest()[:16]


@dataclass
class Check:
    """One pass/fail item with a machine-readable reason code."""

    name: str
    task: str
    passed: bool
    reason_code: str          # "OK" on pass, a stable code on failure
    value: dict = field(default_factory=dict)

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.task}/{self.name} ({self.reason_code})"


@dataclass
class ReportBundle:
    run: str
    config: dict
    seed: int
    checks: List[Check] = field(default_factory=list)
    payloads: dict = field(default_factory=dict)

    def add(self, check: Check):
        self.checks.append(check)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def to_json(self) -> str:
        doc = {
            "run_id": self.run,
            "seed": self.seed,
            "config": self.config,
            "pass": self.passed,
            "checks": [_plain(c) for c in self.checks],
            "tasks": self.payloads,
        }
        return canonical_json(doc)


def write_spectra_csv(path: str, rows) -> None:
    """rows: iterable of (R, degree, index, eigenvalue)."""
    with open(path, "w") as fh:
        fh.write("R,degree,index,eigenvalue\n")
        for R, deg, idx, lam in rows:
            fh.write(f"{R:.17g},{deg},{idx},{lam:.17g}\n")


def write_waveop_csv(path: str, diag) -> None:
    """Time series of the wave-operator diagnostics."""
    with open(path, "w") as fh:
        fh.write("T,cauchy,isometry,intertwining\n")
        for i, t in enumerate(diag.schedule):
            cauchy = diag.cauchy[i - 1] if i > 0 else math.nan
            cstr = f"{cauchy:.17g}" if not math.isnan(cauchy) else ""
            fh.write(f"{t:.17g},{cstr},{diag.isometry_series[i]:.17g},"
                     f"{diag.intertwining_series[i]:.17g}\n")


def write_orders_csv(path: str, label: str, drs, values, orders) -> None:
    with open(path, "w") as fh:
        fh.write(f"level,dr,{label},order\n")
        for i, (dr, v) in enumerate(zip(drs, values)):
            o = f"{orders[i-1]:.17g}" if i > 0 else ""
            fh.write(f"{i},{dr:.17g},{v:.17g},{o}\n")


# ---------------------------------------------------------------------------
# TOML emission for the restricted RunConfig schema (tables of scalars,
# strings, and flat lists; nested tables one level deep)
# ---------------------------------------------------------------------------

def _toml_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int,)):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(x) for x in v) + "]"
    raise TypeError(f"unsupported TOML value {v!r}")


def emit_toml(doc: dict) -> str:
    lines: List[str] = []

    def emit_table(prefix: str, table: dict):
        scalars = {k: v for k, v in table.items() if not isinstance(v, dict)}
        subs = {k: v for k, v in table.items() if isinstance(v, dict)}
        if prefix:
            lines.append(f"[{prefix}]")
        for k in sorted(scalars):
            lines.append(f"{k} = {_toml_scalar(scalars[k])}")
        for k in sorted(subs):
            if lines and lines[-1] != "":
                lines.append("")
            emit_table(f"{prefix}.{k}" if prefix else k, subs[k])

    top_scalars = {k: v for k, v in doc.items() if not isinstance(v, dict)}
    for k in sorted(top_scalars):
        lines.append(f"{k} = {_toml_scalar(top_scalars[k])}")
    for k in sorted(k for k, v in doc.items() if isinstance(v, dict)):
        if lines and lines[-1] != "":
            lines.append("")
        emit_table(k, doc[k])
    return "\n".join(lines) + "\n"
