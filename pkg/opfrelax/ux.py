"""
Console rendering of gap reports, check results and export summaries.

Colour is decided on every call: only on a TTY, and only while NO_COLOR is
unset (so a NO_COLOR coming from `.env` is honoured).
"""

from __future__ import annotations

import sys
from typing import List, Mapping, Optional

from .config import get_settings
from .report import GapReport, RelaxationResult

FIELD_WIDTH = 10
MISSING = "---"


class SGR:
    RESET = "\x1b[0m"
    BOLD = "\x1b[1m"
    RED = "\x1b[31m"
    GREEN = "\x1b[32m"
    YELLOW = "\x1b[33m"
    CYAN = "\x1b[36m"
    GRAY = "\x1b[90m"


def color_enabled(stream=None) -> bool:
    if not get_settings().color:
        return False
    stream = sys.stdout if stream is None else stream
    try:
        return bool(stream.isatty())
    except (AttributeError, ValueError):
        return False


def style(text: str, *codes: str) -> str:
    if not text or not color_enabled():
        return text
    return "".join(codes) + text + SGR.RESET


def success(text: str) -> str:
    return style(text, SGR.GREEN)


def warn(text: str) -> str:
    return style(text, SGR.YELLOW)


def error(text: str) -> str:
    return style(text, SGR.RED)


def error_tag() -> str:
    return style("[ERROR]", SGR.BOLD, SGR.RED)


def number(value: Optional[float], fmt: str = "{:.2f}") -> str:
    return MISSING if value is None else fmt.format(value)


def status_text(status: str) -> str:
    if status == "optimal":
        return success(status)
    if status in ("numeric-warning", "iteration-limit", "n.a.", "external"):
        return warn(status)
    return error(status)


def verdict(passed: bool) -> str:
    return success("ok") if passed else error("FAIL")


def case_header(case: str) -> str:
    return style(f"== {case} ==", SGR.BOLD, SGR.CYAN)


def field_line(name: str, text: str) -> str:
    return f"  {style(f'{name:<{FIELD_WIDTH}}', SGR.GRAY)} {text}"


def relaxation_line(result: RelaxationResult) -> str:
    """`SOC  bound 5735.90  gap 1.32%  optimal  ac_feasible`"""
    text = f"bound {number(result.bound)}  gap {number(result.gap, '{:.2f}%')}  {status_text(result.status)}"
    if result.flags:
        text += "  " + (success(result.flags) if result.ac_feasible else warn(result.flags))
    return field_line(result.name.upper(), text)


def report_lines(report: GapReport, unit: str) -> List[str]:
    lines = [
        case_header(report.case),
        field_line("AC", f"{number(report.ac_value)} {unit}  {status_text(report.ac_status)}"),
    ]
    results = list(report.relaxations.values())
    if report.copper_plate is not None:
        results.append(report.copper_plate)
    lines.extend(relaxation_line(res) for res in results)
    lines.extend(field_line("note", warn(note)) for note in report.notes)
    return lines


def export_lines(name: str, summary: Mapping[str, object], path: str) -> List[str]:
    blocks = summary["psd_blocks"]
    return [
        case_header(name),
        field_line("variables", str(summary["variables"])),
        field_line("psd", " ".join(f"{s}x{s}" for s in blocks)),  # type: ignore[union-attr]
        field_line("lp rows", str(summary["lp_rows"])),
        field_line("file", path),
    ]
