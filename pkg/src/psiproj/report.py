"""Verification reports: rows of sampled residuals, JSON and markdown output."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

from . import __version__


@dataclass(frozen=True)
class CheckRow:
    check: str
    index: str = ""
    order: int | None = None
    residual: float | None = None
    tolerance: float = 0.0
    passed: bool | None = None  # None marks a not-applicable row
    samples: int = 0
    skipped: int = 0

    @classmethod
    def measured(cls, check, index, order, res, tol) -> "CheckRow":
        value = float(res.value)
        ok = math.isfinite(value) and value <= tol and res.samples > 0
        return cls(check, str(index), order, value, float(tol), ok, res.samples, res.skipped)

    @classmethod
    def not_applicable(cls, check, index="", order=None) -> "CheckRow":
        return cls(check, str(index), order, None, 0.0, None, 0, 0)

    @property
    def status(self) -> str:
        return "n/a" if self.passed is None else ("pass" if self.passed else "fail")

    def sort_key(self):
        return (self.check, self.index, -1 if self.order is None else self.order)


@dataclass
class VerificationReport:
    rows: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    version: str = __version__
    error: str | None = None

    def extend(self, rows):
        self.rows.extend(rows)

    def sorted_rows(self) -> list:
        return sorted(self.rows, key=CheckRow.sort_key)

    @property
    def summary(self) -> dict:
        st = [r.status for r in self.rows]
        return {"total": len(st), "passed": st.count("pass"), "failed": st.count("fail"),
                "not_applicable": st.count("n/a")}

    @property
    def ok(self) -> bool:
        return self.error is None and all(r.passed is not False for r in self.rows)

    def failures(self) -> list:
        return [r for r in self.rows if r.passed is False]

    def to_dict(self) -> dict:
        return {"version": self.version, "config": self.config, "error": self.error,
                "summary": self.summary, "rows": [asdict(r) for r in self.sorted_rows()]}

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "VerificationReport":
        rows = [CheckRow(**{k: (_unjson(v) if k == "residual" else v) for k, v in r.items()}) for r in data["rows"]]
        return cls(rows=rows, config=data.get("config", {}), version=data.get("version", __version__),
                   error=data.get("error"))

    @classmethod
    def from_json(cls, text: str) -> "VerificationReport":
        return cls.from_dict(json.loads(text))

    def markdown(self) -> str:
        s = self.summary
        lines = [f"# Verification report ({self.config.get('model', '?')})", "",
                 f"{s['passed']} passed, {s['failed']} failed, {s['not_applicable']} not applicable.", ""]
        if self.error:
            lines += [f"**error:** {self.error}", ""]
        lines += ["| check | index | order | residual | tol | status | samples | skipped |",
                  "|---|---|---|---|---|---|---|---|"]
        for r in self.sorted_rows():
            res = "" if r.residual is None else f"{r.residual:.3e}"
            order = "" if r.order is None else str(r.order)
            lines.append(f"| {r.check} | {r.index} | {order} | {res} | {r.tolerance:.0e} | {r.status} "
                         f"| {r.samples} | {r.skipped} |")
        return "\n".join(lines) + "\n"


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_jsonable(x) for x in v]
    return v


def _unjson(v):
    return float(v) if isinstance(v, str) else v
