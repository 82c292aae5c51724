"""Run reports (JSON) and iteration traces (CSV)."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import SpecError

REPORT_VERSION = "retractor.run_report/1"
TRACE_COLUMNS = ("stage", "iteration", "step_norm", "residual")


def _plain(obj):
    """Recursively convert numpy values to JSON-friendly Python values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return repr(x)
        return x
    return obj


@dataclass
class RunReport:
    problem: dict
    digest: str
    seed: int
    certificates: dict = field(default_factory=dict)
    stages: list = field(default_factory=list)
    evaluation: dict = field(default_factory=dict)
    audits: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    status: str = "ok"

    @property
    def failures(self):
        return [a for a in self.audits if a["status"] in ("fail", "error")]

    @property
    def passed(self):
        return not self.failures and self.status == "ok"

    def to_dict(self, timings=True):
        d = {
            "version": REPORT_VERSION,
            "status": self.status,
            "seed": self.seed,
            "problem": {"digest": self.digest, "spec": self.problem},
            "certificates": self.certificates,
            "stages": self.stages,
            "evaluation": self.evaluation,
            "audits": self.audits,
            "summary": {
                "passed": sum(a["status"] == "pass" for a in self.audits),
                "failed": [a["id"] for a in self.failures],
                "skipped": sum(a["status"] == "skipped" for a in self.audits),
            },
        }
        if timings:
            d["timings"] = self.timings
        return _plain(d)

    def to_json(self, timings=True):
        return json.dumps(self.to_dict(timings), sort_keys=True, indent=2) + "\n"

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())


def write_trace(path, rows):
    """Write ``(stage, iteration, step_norm, residual)`` rows as CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for stage, it, step, res in rows:
            w.writerow([int(stage), int(it), repr(float(step)), repr(float(res))])


def read_trace(path):
    """Parse a trace CSV; raises SpecError if it is missing or malformed."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise SpecError(f"cannot read trace {path}: {exc}") from exc
    if not rows or tuple(rows[0]) != TRACE_COLUMNS:
        raise SpecError(f"{path} is not a trace file (expected header {','.join(TRACE_COLUMNS)})")
    out = []
    for k, r in enumerate(rows[1:], start=2):
        if not r:
            continue
        try:
            out.append((int(r[0]), int(r[1]), float(r[2]), float(r[3])))
        except (ValueError, IndexError) as exc:
            raise SpecError(f"{path}:{k}: bad trace row {r}") from exc
    return out


def trace_series(rows):
    """Group trace rows by stage: ``{stage: {"iteration": [...], "step_norm": [...], ...}}``."""
    series = {}
    for stage, it, step, res in rows:
        s = series.setdefault(stage, {"iteration": [], "step_norm": [], "residual": []})
        s["iteration"].append(it)
        s["step_norm"].append(step)
        s["residual"].append(res)
    return dict(sorted(series.items()))
