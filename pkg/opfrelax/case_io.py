"""
Matpower case files (the format NESTA ships in) to and from `Network`.

Only the subset needed by NESTA cases is accepted: `baseMVA`, `bus`, `gen`,
`branch` and polynomial `gencost` up to degree 2. Anything else is rejected
with an explicit error rather than skipped.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

from .errors import CaseParseError, UnknownCaseError, UnsupportedCaseError
from .network import DEFAULT_ANGLE_MAX, Branch, Bus, Generator, Network, require_valid

logger = logging.getLogger(__name__)

REQUIRED_SECTIONS = ("bus", "gen", "branch", "gencost")
MIN_COLUMNS = {"bus": 13, "gen": 10, "branch": 11, "gencost": 4}
SCALAR_SECTIONS = ("baseMVA", "version")

_ASSIGN = re.compile(r"^mpc\.(\w+)\s*=\s*(.*)$")
_FUNCTION = re.compile(r"^function\s+(?:\w+\s*=\s*)?(\w+)")


@dataclass
class CaseFile:
    text: str
    name: str = "case"
    base_mva: float | None = None
    sections: Dict[str, List[Tuple[int, List[float]]]] = field(default_factory=dict)


def _strip_comment(line: str) -> str:
    pos = line.find("%")
    return line if pos < 0 else line[:pos]


def _number(token: str, line_no: int) -> float:
    low = token.lower()
    if low in ("inf", "+inf"):
        return math.inf
    if low == "-inf":
        return -math.inf
    try:
        return float(token)
    except ValueError:
        raise CaseParseError(f"invalid number {token!r}", line_no) from None


def _rows(chunk: str, line_no: int) -> List[Tuple[int, List[float]]]:
    rows = []
    for segment in chunk.split(";"):
        tokens = [t for t in re.split(r"[\s,]+", segment.strip()) if t]
        if tokens:
            rows.append((line_no, [_number(t, line_no) for t in tokens]))
    return rows


def read_case_file(text: str) -> CaseFile:
    case = CaseFile(text=text)
    current: str | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue

        if current is not None:
            end = line.find("]")
            body = line if end < 0 else line[:end]
            case.sections[current].extend(_rows(body, line_no))
            if end >= 0:
                current = None
            continue

        m = _FUNCTION.match(line)
        if m:
            case.name = m.group(1)
            continue

        m = _ASSIGN.match(line)
        if not m:
            raise CaseParseError(f"unexpected statement {line!r}", line_no)
        key, rhs = m.group(1), m.group(2).strip()

        if key in SCALAR_SECTIONS:
            value = rhs.rstrip(";").strip().strip("'\"")
            if key == "baseMVA":
                case.base_mva = _number(value, line_no)
            elif value != "2":
                raise UnsupportedCaseError(f"unsupported case format version {value!r}", line_no)
            continue

        if key not in REQUIRED_SECTIONS:
            raise UnsupportedCaseError(f"unsupported section 'mpc.{key}'", line_no)
        if not rhs.startswith("["):
            raise CaseParseError(f"expected a matrix for 'mpc.{key}'", line_no)

        case.sections[key] = []
        body = rhs[1:]
        end = body.find("]")
        if end >= 0:
            case.sections[key].extend(_rows(body[:end], line_no))
        else:
            case.sections[key].extend(_rows(body, line_no))
            current = key

    if current is not None:
        raise CaseParseError(f"unterminated matrix 'mpc.{current}'")
    if case.base_mva is None:
        raise CaseParseError("missing 'mpc.baseMVA'")
    for key in REQUIRED_SECTIONS:
        if key not in case.sections:
            raise CaseParseError(f"missing section 'mpc.{key}'")
    if not case.sections["bus"]:
        raise CaseParseError("empty bus section")
    for key, rows in case.sections.items():
        for line_no, row in rows:
            if len(row) < MIN_COLUMNS[key]:
                raise CaseParseError(
                    f"'mpc.{key}' row has {len(row)} columns, expected at least {MIN_COLUMNS[key]}",
                    line_no,
                )
    return case


def _angle_bound(angmin: float, angmax: float, line_no: int) -> float:
    """Symmetric PAD bound (radians) from Matpower angmin/angmax (degrees)."""
    lower = math.inf if angmin == 0.0 or angmin <= -360.0 else -angmin
    upper = math.inf if angmax == 0.0 or angmax >= 360.0 else angmax
    if lower <= 0.0 or upper <= 0.0:
        raise UnsupportedCaseError("angle difference domain must contain 0", line_no)
    bound = math.radians(min(lower, upper))
    if bound > math.pi / 2.0:
        return DEFAULT_ANGLE_MAX
    return bound


def _bound(value: float, base: float) -> float:
    return value if math.isinf(value) else value / base


def network_from_case(case: CaseFile) -> Network:
    base = float(case.base_mva)

    buses: List[Bus] = []
    isolated: set[int] = set()
    reference = None
    for line_no, row in case.sections["bus"]:
        bus_id, bus_type = int(row[0]), int(row[1])
        if bus_type == 4:
            isolated.add(bus_id)
            continue
        if bus_type == 3 and reference is None:
            reference = bus_id
        buses.append(
            Bus(
                id=bus_id,
                v_min=row[12],
                v_max=row[11],
                p_load=row[2] / base,
                q_load=row[3] / base,
                shunt_g=row[4] / base,
                shunt_b=row[5] / base,
            )
        )
    if isolated:
        logger.warning("%s: dropping %d isolated buses", case.name, len(isolated))

    gencost = case.sections["gencost"]
    gen_rows = case.sections["gen"]
    if len(gencost) < len(gen_rows):
        raise CaseParseError(f"{len(gen_rows)} generators but {len(gencost)} gencost rows")
    if len(gencost) > len(gen_rows):
        raise UnsupportedCaseError("reactive power cost rows are not supported", gencost[len(gen_rows)][0])

    generators: List[Generator] = []
    for (line_no, row), (cost_line, cost) in zip(gen_rows, gencost):
        if int(row[7]) <= 0 or int(row[0]) in isolated:
            continue
        model, n = int(cost[0]), int(cost[3])
        if model != 2:
            raise UnsupportedCaseError("piecewise-linear generator costs are not supported", cost_line)
        if n > 3 or len(cost) < 4 + n:
            raise UnsupportedCaseError("only polynomial costs up to degree 2 are supported", cost_line)
        coeffs = [0.0, 0.0, 0.0]
        for k in range(n):
            coeffs[3 - n + k] = cost[4 + k]
        generators.append(
            Generator(
                bus=int(row[0]),
                p_min=_bound(row[9], base),
                p_max=_bound(row[8], base),
                q_min=_bound(row[4], base),
                q_max=_bound(row[3], base),
                c2=coeffs[0],
                c1=coeffs[1],
                c0=coeffs[2],
            )
        )

    branches: List[Branch] = []
    for line_no, row in case.sections["branch"]:
        if int(row[10]) <= 0 or int(row[0]) in isolated or int(row[1]) in isolated:
            continue
        rate = row[5]
        angle_max = DEFAULT_ANGLE_MAX
        if len(row) >= 13:
            angle_max = _angle_bound(row[11], row[12], line_no)
        branches.append(
            Branch(
                from_bus=int(row[0]),
                to_bus=int(row[1]),
                r=row[2],
                x=row[3],
                b_charge=row[4],
                tap_mag=row[8] if row[8] != 0.0 else 1.0,
                tap_shift=math.radians(row[9]),
                s_max=math.inf if rate == 0.0 else rate / base,
                angle_max=angle_max,
            )
        )

    if reference is None:
        with_gen = [g.bus for g in generators]
        if not with_gen:
            raise CaseParseError("case has neither a reference bus nor a generator")
        reference = with_gen[0]

    return Network(
        base_mva=base,
        buses=tuple(buses),
        generators=tuple(generators),
        branches=tuple(branches),
        reference_bus=reference,
        name=case.name,
    )


def parse_case(text: str) -> Network:
    """Parse Matpower case text into a validated `Network`."""
    net = network_from_case(read_case_file(text))
    return require_valid(net)


def _fmt(value: float) -> str:
    if math.isinf(value):
        return "Inf" if value > 0 else "-Inf"
    return repr(float(value))


def write_case(net: Network) -> str:
    """Matpower text for `net`; `parse_case(write_case(net))` reproduces it."""
    base = net.base_mva
    out = [f"function mpc = {net.name}", "mpc.version = '2';", f"mpc.baseMVA = {_fmt(base)};", ""]

    out.append("%% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin")
    out.append("mpc.bus = [")
    for bus in net.buses:
        kind = 3 if bus.id == net.reference_bus else (2 if net.generators_at(bus.id) else 1)
        cols = [bus.id, kind, bus.p_load * base, bus.q_load * base, bus.shunt_g * base,
                bus.shunt_b * base, 1, 1.0, 0.0, 0.0, 1, bus.v_max, bus.v_min]
        out.append("\t" + "\t".join(_fmt(c) if isinstance(c, float) else str(c) for c in cols) + ";")
    out.append("];")
    out.append("")

    def scaled(value: float) -> float:
        return value if math.isinf(value) else value * base

    out.append("%% bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin")
    out.append("mpc.gen = [")
    for gen in net.generators:
        cols = [gen.bus, 0.0, 0.0, scaled(gen.q_max), scaled(gen.q_min), 1.0, base, 1,
                scaled(gen.p_max), scaled(gen.p_min)]
        out.append("\t" + "\t".join(_fmt(c) if isinstance(c, float) else str(c) for c in cols) + ";")
    out.append("];")
    out.append("")

    out.append("%% fbus tbus r x b rateA rateB rateC ratio angle status angmin angmax")
    out.append("mpc.branch = [")
    for br in net.branches:
        rate = 0.0 if math.isinf(br.s_max) else br.s_max * base
        if br.angle_max == DEFAULT_ANGLE_MAX:
            angmin = angmax = 0.0
        else:
            angmax = math.degrees(br.angle_max)
            angmin = -angmax
        cols = [br.from_bus, br.to_bus, br.r, br.x, br.b_charge, rate, rate, rate, br.tap_mag,
                math.degrees(br.tap_shift), 1, angmin, angmax]
        out.append("\t" + "\t".join(_fmt(c) if isinstance(c, float) else str(c) for c in cols) + ";")
    out.append("];")
    out.append("")

    out.append("%% 2 startup shutdown n c2 c1 c0")
    out.append("mpc.gencost = [")
    for gen in net.generators:
        cols = [2, 0.0, 0.0, 3, gen.c2, gen.c1, gen.c0]
        out.append("\t" + "\t".join(_fmt(c) if isinstance(c, float) else str(c) for c in cols) + ";")
    out.append("];")
    return "\n".join(out) + "\n"


CASE3_TEMPLATE = """\
function mpc = {name}
% 3-bus network used to illustrate power flow relaxations (100 MVA base).
mpc.version = '2';
mpc.baseMVA = 100.0;

%% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin
mpc.bus = [
\t1\t3\t110.0\t40.0\t0.0\t0.0\t1\t1.0\t0.0\t240.0\t1\t1.1\t0.9;
\t2\t2\t110.0\t40.0\t0.0\t0.0\t1\t1.0\t0.0\t240.0\t1\t1.1\t0.9;
\t3\t2\t95.0\t50.0\t0.0\t0.0\t1\t1.0\t0.0\t240.0\t1\t1.1\t0.9;
];

%% bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin
mpc.gen = [
\t1\t148.0\t54.0\tInf\t-Inf\t1.0\t100.0\t1\tInf\t0.0;
\t2\t170.0\t-8.0\tInf\t-Inf\t1.0\t100.0\t1\tInf\t0.0;
\t3\t0.0\t-4.0\tInf\t-Inf\t1.0\t100.0\t1\t0.0\t0.0;
];

%% fbus tbus r x b rateA rateB rateC ratio angle status angmin angmax
mpc.branch = [
\t1\t3\t0.065\t0.62\t0.45\t0.0\t0.0\t0.0\t0.0\t0.0\t1\t-{pad}\t{pad};
\t3\t2\t0.025\t0.75\t0.7\t50.0\t50.0\t50.0\t0.0\t0.0\t1\t-{pad}\t{pad};
\t1\t2\t0.042\t0.9\t0.3\t0.0\t0.0\t0.0\t0.0\t0.0\t1\t-{pad}\t{pad};
];

%% 2 startup shutdown n c2 c1 c0
mpc.gencost = [
\t2\t0.0\t0.0\t3\t0.11\t5.0\t0.0;
\t2\t0.0\t0.0\t3\t0.085\t1.2\t0.0;
\t2\t0.0\t0.0\t3\t0.0\t0.0\t0.0;
];
"""

BUILTIN_PREFIX = "builtin:"

BUILTIN_CASES = {
    "case3_base": ("nesta_case3_lmbd", 30.0),
    "case3_sad18": ("nesta_case3_lmbd__sad", 18.0),
}


def builtin_case_text(name: str) -> str:
    try:
        case_name, pad = BUILTIN_CASES[name]
    except KeyError:
        raise UnknownCaseError(f"unknown builtin case {name!r}; choose from {sorted(BUILTIN_CASES)}") from None
    return CASE3_TEMPLATE.format(name=case_name, pad=repr(pad))


def builtin_case(name: str) -> Network:
    return parse_case(builtin_case_text(name))


def load_case(spec: str) -> Tuple[str, Network]:
    """Resolve `builtin:<name>` or a path to a `.m` file."""
    if spec.startswith(BUILTIN_PREFIX):
        name = spec.split(":", 1)[1]
        return name, builtin_case(name)
    path = Path(spec)
    if not path.is_file():
        raise FileNotFoundError(f"case file not found: {path}")
    return path.stem, parse_case(path.read_text())


def write_report(report, fmt: str = "json") -> str:
    """Serialize a `GapReport` (or a list of them) as JSON or CSV text."""
    from .report import report_to_csv, report_to_json

    if fmt == "json":
        return report_to_json(report)
    if fmt == "csv":
        return report_to_csv(report)
    raise ValueError(f"unknown report format {fmt!r}")
