"""Gap reports and their JSON / CSV writers."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import orjson

RELAXATION_ORDER = ("soc", "qc", "cp", "sdp")
NOT_APPLICABLE = "n.a."
INFEASIBLE_NOTE = "AC-OPF infeasible (certified)"
# status of a bound supplied from outside (external SDP solve)
EXTERNAL = "external"


@dataclass
class RelaxationResult:
    name: str
    status: str
    bound: Optional[float] = None
    gap: Optional[float] = None
    runtime: float = 0.0
    iterations: int = 0
    ac_feasible: bool = False
    numeric_warning: bool = False

    @property
    def flags(self) -> str:
        out = []
        if self.ac_feasible:
            out.append("ac_feasible")
        if self.numeric_warning:
            out.append("numeric_warning")
        return ";".join(out)

    def as_dict(self) -> Dict[str, object]:
        return {
            "bound": _finite(self.bound),
            "gap": _finite(self.gap),
            "runtime": self.runtime,
            "status": self.status,
            "iterations": self.iterations,
            "ac_feasible": self.ac_feasible,
            "numeric_warning": self.numeric_warning,
        }


@dataclass
class GapReport:
    """One case: the AC heuristic value and every relaxation bound measured against it."""

    case: str
    ac_value: Optional[float] = None
    ac_status: str = "not-run"
    ac_runtime: float = 0.0
    relaxations: Dict[str, RelaxationResult] = field(default_factory=dict)
    # None means the copper plate was not applicable to this case
    copper_plate: Optional[RelaxationResult] = None
    notes: List[str] = field(default_factory=list)

    def add(self, result: RelaxationResult) -> None:
        if result.name == "cp":
            self.copper_plate = result
        else:
            self.relaxations[result.name] = result

    def result(self, name: str) -> Optional[RelaxationResult]:
        return self.copper_plate if name == "cp" else self.relaxations.get(name)

    def gap(self, name: str) -> Optional[float]:
        res = self.result(name)
        return None if res is None else res.gap

    @property
    def all_optimal(self) -> bool:
        results = [r for r in self.relaxations.values() if r.status != EXTERNAL]
        if self.copper_plate is not None:
            results.append(self.copper_plate)
        return self.ac_status == "optimal" and all(r.status == "optimal" for r in results)

    def as_dict(self) -> Dict[str, object]:
        return {
            "case": self.case,
            "ac": {"value": _finite(self.ac_value), "runtime": self.ac_runtime, "status": self.ac_status},
            "relaxations": {name: res.as_dict() for name, res in self.relaxations.items()},
            "copper_plate": self.copper_plate.as_dict() if self.copper_plate is not None else NOT_APPLICABLE,
            "notes": list(self.notes),
        }


Reports = Union[GapReport, Sequence[GapReport]]


def _finite(value: Optional[float]) -> Optional[float]:
    if value is None or not math.isfinite(value):
        return None
    return float(value)


def _as_list(report: Reports) -> List[GapReport]:
    return [report] if isinstance(report, GapReport) else list(report)


def report_to_json(report: Reports) -> str:
    payload = {"cases": [r.as_dict() for r in _as_list(report)]}
    return orjson.dumps(payload, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS).decode() + "\n"


def _relaxation_columns(reports: List[GapReport]) -> List[str]:
    seen = set()
    for r in reports:
        seen.update(r.relaxations)
        if r.copper_plate is not None:
            seen.add("cp")
    ordered = [name for name in RELAXATION_ORDER if name in seen]
    return ordered + sorted(seen - set(ordered))


def _cell(value: Optional[float]) -> str:
    value = _finite(value)
    return "" if value is None else repr(value)


def report_to_csv(report: Reports, relaxations: Sequence[str] | None = None) -> str:
    """One row per case; relaxations that were not run (or are n.a.) leave blank cells."""
    reports = _as_list(report)
    names = list(relaxations) if relaxations is not None else _relaxation_columns(reports)
    header = ["case", "ac_value", "ac_status", "ac_runtime"]
    for name in names:
        header += [f"{name}_bound", f"{name}_gap", f"{name}_runtime", f"{name}_status", f"{name}_flags"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in reports:
        row = [r.case, _cell(r.ac_value), r.ac_status, repr(r.ac_runtime)]
        for name in names:
            res = r.result(name)
            if res is None:
                status = NOT_APPLICABLE if name == "cp" else ""
                row += ["", "", "", status, ""]
            else:
                row += [_cell(res.bound), _cell(res.gap), repr(res.runtime), res.status, res.flags]
        writer.writerow(row)
    return buf.getvalue()


def parse_report_json(text: str) -> List[Dict[str, object]]:
    return list(orjson.loads(text)["cases"])
