"""Structured verdicts and deterministic rendering.

A report is a flat list of named checks, each carrying a verdict, numeric
residuals, named values, and an optional witness point.  Rendering is
byte-stable for a fixed (config, seed, version) triple: field order is
fixed, floats use repr, and nothing time- or environment-dependent is
embedded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

__all__ = ["CheckResult", "Report", "render_report"]

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class CheckResult:
    name: str
    verdict: str
    residuals: dict[str, float] = field(default_factory=dict)
    values: dict[str, float] = field(default_factory=dict)
    witness: Optional[dict[str, float]] = None
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "verdict": self.verdict,
            "residuals": dict(self.residuals),
            "values": dict(self.values),
            "witness": dict(self.witness) if self.witness is not None else None,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class Report:
    job: dict
    seed: int
    version: str
    checks: tuple[CheckResult, ...]

    @property
    def n_fail(self) -> int:
        return sum(1 for c in self.checks if c.verdict == FAIL)

    @property
    def n_inconclusive(self) -> int:
        return sum(1 for c in self.checks if c.verdict == INCONCLUSIVE)

    def exit_code(self) -> int:
        if self.n_fail:
            return 1
        if self.n_inconclusive:
            return 3
        return 0

    def as_dict(self) -> dict:
        return {
            "tool": "paracr",
            "version": self.version,
            "seed": self.seed,
            "job": dict(self.job),
            "checks": [c.as_dict() for c in self.checks],
            "summary": {
                "total": len(self.checks),
                "pass": sum(1 for c in self.checks if c.verdict == PASS),
                "fail": self.n_fail,
                "inconclusive": self.n_inconclusive,
            },
        }


def render_report(report: Report, fmt: str = "json") -> bytes:
    if fmt == "json":
        return (json.dumps(report.as_dict(), indent=2, allow_nan=True)
                + "\n").encode()
    if fmt == "text":
        lines = [f"paracr {report.version}  seed={report.seed}  "
                 f"kind={report.job.get('kind', '?')}"]
        width = max((len(c.name) for c in report.checks), default=0)
        for c in report.checks:
            parts = [f"[{c.verdict.upper():>12}] {c.name:<{width}}"]
            if c.residuals:
                parts.append(" ".join(f"{k}={v:.3e}"
                                      for k, v in c.residuals.items()))
            if c.values:
                parts.append(" ".join(f"{k}={v:.6g}"
                                      for k, v in c.values.items()))
            if c.detail:
                parts.append(c.detail)
            lines.append("  ".join(parts))
        s = report.as_dict()["summary"]
        lines.append(f"summary: {s['pass']}/{s['total']} pass, "
                     f"{s['fail']} fail, {s['inconclusive']} inconclusive")
        return ("\n".join(lines) + "\n").encode()
    raise ValueError(f"unknown format {fmt!r}")
