"""Report records and their byte-stable CSV/JSON serialisation.

Floats are always written with 17 significant digits (``%.17g``), ``.`` as
the decimal separator and ``\\n`` line endings; non-finite floats become
``nan``/``inf`` in CSV and ``null`` in JSON.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CONVERGENCE_COLUMNS = ("n", "vn_over_n", "jst", "relent", "alpha_gap")


def fmt_float(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return "null"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_float(v) if math.isfinite(v) else "null"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, dict):
        items = sorted(v.items())
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json_value(x)}"
                               for k, x in items) + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialise {type(v).__name__}")


def dumps_json(obj):
    """Deterministic JSON text: sorted keys, ``%.17g`` floats, trailing newline."""
    return _json_value(obj) + "\n"


def digest(*parts):
    """Short SHA-256 digest over arrays, numbers and strings."""
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, np.ndarray):
            h.update(np.ascontiguousarray(p, dtype=float).tobytes())
        else:
            h.update(repr(p).encode())
        h.update(b"|")
    return h.hexdigest()[:16]


def scalar_digest(X):
    return digest("scalar", X.atoms, X.weights, X.tau)


def pair_digest(P):
    return digest("pair", P.atoms, P.weights, P.tau, P.tau_y)


@dataclass(frozen=True)
class InequalityReport:
    check_name: str
    inputs_digest: str
    value: float
    bound: float
    slack: float
    tolerance: float
    passed: bool
    label: str = ""

    @classmethod
    def upper(cls, name, inputs_digest, value, bound, tolerance, label=""):
        """Report for ``value <= bound``."""
        slack = float(bound) - float(value)
        ok = bool(math.isfinite(slack) and slack >= -tolerance)
        return cls(name, inputs_digest, float(value), float(bound), slack,
                   float(tolerance), ok, label)

    @classmethod
    def lower(cls, name, inputs_digest, value, bound, tolerance, label=""):
        """Report for ``value >= bound``."""
        slack = float(value) - float(bound)
        ok = bool(math.isfinite(slack) and slack >= -tolerance)
        return cls(name, inputs_digest, float(value), float(bound), slack,
                   float(tolerance), ok, label)

    def to_dict(self):
        return {"check_name": self.check_name, "inputs_digest": self.inputs_digest,
                "value": self.value, "bound": self.bound, "slack": self.slack,
                "tolerance": self.tolerance, "pass": self.passed}


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    vn_over_n: float
    jst: float
    relent: float
    alpha_gap: float
    relent_debruijn: float = float("nan")
    error: str = ""

    @property
    def failed(self):
        return bool(self.error)


@dataclass
class ConvergenceReport:
    rows: list
    summary: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def to_dict(self):
        return {
            "meta": self.meta,
            "summary": self.summary,
            "rows": [{"n": r.n, "vn_over_n": r.vn_over_n, "jst": r.jst,
                      "relent": r.relent, "alpha_gap": r.alpha_gap,
                      "relent_debruijn": r.relent_debruijn, "error": r.error}
                     for r in self.rows],
        }


def convergence_csv(report):
    lines = [",".join(CONVERGENCE_COLUMNS)]
    for r in report.rows:
        lines.append(",".join([str(r.n)] + [fmt_float(getattr(r, c))
                                             for c in CONVERGENCE_COLUMNS[1:]]))
    return "\n".join(lines) + "\n"


def emit_report(report, path, format=None):
    """Write a convergence report (csv/json) or a list of inequality reports (json)."""
    path = Path(path)
    if format is None:
        format = path.suffix.lstrip(".").lower()
    if format not in ("csv", "json"):
        raise ValueError(f"unsupported report format {format!r}")
    if isinstance(report, ConvergenceReport):
        text = convergence_csv(report) if format == "csv" else dumps_json(report.to_dict())
    else:
        if format != "json":
            raise ValueError("inequality reports serialise to json only")
        text = dumps_json([r.to_dict() for r in report])
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


def load_report(path):
    path = Path(path)
    if path.suffix == ".csv":
        import csv
        with open(path, newline="") as fh:
            return list(csv.DictReader(fh))
    with open(path) as fh:
        return json.load(fh)
