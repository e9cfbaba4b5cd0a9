"""
Executable checks of the relaxation theory, and the case-level gap pipeline.

The pipeline helpers at the bottom (`run_ac`, `run_relaxation`,
`assemble_report`) are shared by `solve_case` and the graph nodes, so the
library and the command line produce identical reports.
"""

from __future__ import annotations

import cmath
import csv
import io
import logging
import math
import statistics
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .certify import ResidualReport, ac_point, certify_solution
from .config import SolverConfig
from .conic_solver import solve_conic
from .errors import EnvelopeDomainError, InfeasiblePointError, NonHermitianError, NotApplicableError
from .formulations import (
    ac_point_to_w,
    build_ac,
    build_copper_plate,
    build_qc,
    build_soc,
    current_squared_expr,
    w_flow_exprs,
)
from .network import Branch, Bus, Network
from .nlp_solver import solve_local_ac
from .program import ConicProgram, NlpProgram, Solution, SolveStatus
from .report import EXTERNAL, INFEASIBLE_NOTE, GapReport, RelaxationResult

logger = logging.getLogger(__name__)

RELAXATIONS = ("soc", "qc", "cp")
RANK_TOL = 1e-6
AC_FEASIBLE_TOL = 1e-5
ANGLE_TOL = 1e-6


def optimality_gap(heuristic: float, bound: float) -> float:
    """Percent gap 100 * (heuristic - bound) / heuristic."""
    if not (math.isfinite(heuristic) and heuristic > 0.0):
        raise ValueError(f"heuristic value must be positive, got {heuristic!r}")
    return 100.0 * (heuristic - bound) / heuristic


# ---------------------------------------------------------------------------
# branch identities


@dataclass(frozen=True)
class IdentitySample:
    """One branch with raw complex voltages at both ends."""

    vi: complex
    vj: complex
    y: complex
    tap_mag: float = 1.0
    tap_shift: float = 0.0
    b_charge: float = 0.0

    def __post_init__(self) -> None:
        if self.y == 0:
            raise ValueError("series admittance must be nonzero")
        if not self.tap_mag > 0.0:
            raise ValueError("tap magnitude must be positive")

    @property
    def z(self) -> complex:
        return 1.0 / self.y

    @property
    def tap(self) -> complex:
        return self.tap_mag * cmath.exp(1j * self.tap_shift)

    def plain(self) -> "IdentitySample":
        return IdentitySample(self.vi, self.vj, self.y)

    @property
    def w_ii(self) -> float:
        return abs(self.vi) ** 2

    @property
    def w_jj(self) -> float:
        return abs(self.vj) ** 2

    @property
    def w_ij(self) -> complex:
        return self.vi * self.vj.conjugate()

    @property
    def current(self) -> complex:
        """Current behind the tap: (Y + i bc/2) V_i / T - Y V_j."""
        return (self.y + 0.5j * self.b_charge) * self.vi / self.tap - self.y * self.vj

    @property
    def power(self) -> complex:
        """From-side power; the ideal transformer is lossless, so S = (V_i / T) conj(I)."""
        return self.vi / self.tap * self.current.conjugate()

    @property
    def l(self) -> float:
        return abs(self.current) ** 2


def identity_sides(sample: IdentitySample, extended: bool = False) -> List[Tuple[float, float]]:
    """(direct value, W-space value) for the power, voltage-product, current and voltage-drop identities."""
    s = sample if extended else sample.plain()
    y, z, S, l = s.y, s.z, s.power, s.l
    wii, wjj, wij = s.w_ii, s.w_jj, s.w_ij
    y2, z2 = abs(y) ** 2, abs(z) ** 2
    if not extended:
        drop = 2.0 * (z.conjugate() * S).real
        return [
            (abs(S) ** 2, y2 * (wii * wii - 2.0 * wii * wij.real + abs(wij) ** 2)),
            (abs(wij) ** 2, wii * wii - wii * drop + z2 * abs(S) ** 2),
            (l, y2 * (wii + wjj - 2.0 * wij.real)),
            (wjj, wii - drop + z2 * l),
        ]
    t2 = s.tap_mag**2
    bc = s.b_charge
    half2 = (bc / 2.0) ** 2
    wt = wii / t2
    wx = wij / s.tap
    drop = 2.0 * (z.conjugate() * S).real
    shrink = 1.0 - bc * z.imag
    return [
        (
            abs(S) ** 2,
            y2 * (wt * wt - 2.0 * wt * wx.real + abs(wij) ** 2 / t2) - half2 * wt * wt - bc * wt * S.imag,
        ),
        (
            abs(wij) ** 2,
            shrink * wii * wii / t2 - wii * drop + z2 * (t2 * abs(S) ** 2 + half2 * wii * wii / t2 + wii * bc * S.imag),
        ),
        (l, y2 * (wt - 2.0 * wx.real + wjj) - half2 * wt - bc * S.imag),
        (wjj, shrink * wt - drop + z2 * (l + half2 * wt + bc * S.imag)),
    ]


def check_identities(sample: IdentitySample, extended: bool = False, perturb: float = 0.0) -> float:
    """Largest relative mismatch over the four branch identities.

    `perturb` is added to the W-space side of the voltage-drop identity.
    """
    sides = identity_sides(sample, extended)
    lhs, rhs = sides[-1]
    sides[-1] = (lhs, rhs + perturb)
    return max(abs(a - b) / max(1.0, abs(a)) for a, b in sides)


def random_sample(rng: np.random.Generator, extended: bool = False) -> IdentitySample:
    mags = rng.uniform(0.9, 1.1, size=2)
    angles = rng.uniform(-math.pi / 3.0, math.pi / 3.0, size=2)
    r, x = rng.uniform(0.001, 0.1), rng.uniform(0.01, 1.0)
    vi, vj = (cmath.rect(m, a) for m, a in zip(mags, angles))
    if not extended:
        return IdentitySample(vi, vj, 1.0 / complex(r, x))
    return IdentitySample(
        vi,
        vj,
        1.0 / complex(r, x),
        tap_mag=float(rng.uniform(0.9, 1.1)),
        tap_shift=math.radians(float(rng.uniform(-5.0, 5.0))),
        b_charge=float(rng.uniform(0.0, 0.7)),
    )


def identity_suite(samples: int, seed: int = 42, extended: bool = False, perturb: float = 0.0) -> float:
    """Max identity error over `samples` random branches (0.0 for no samples)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        worst = max(worst, check_identities(random_sample(rng, extended), extended, perturb))
    return worst


def perturbed_network(net: Network, rng: np.random.Generator, name: str | None = None) -> Network:
    """Copy of `net` with random taps, phase shifts, line charging and nonzero bus shunts."""
    branches = tuple(
        Branch(
            from_bus=br.from_bus,
            to_bus=br.to_bus,
            r=br.r,
            x=br.x,
            b_charge=float(rng.uniform(0.0, 0.7)),
            tap_mag=float(rng.uniform(0.9, 1.1)),
            tap_shift=math.radians(float(rng.uniform(-5.0, 5.0))),
            s_max=br.s_max,
            angle_max=br.angle_max,
        )
        for br in net.branches
    )
    buses = tuple(
        Bus(
            id=bus.id,
            v_min=bus.v_min,
            v_max=bus.v_max,
            p_load=bus.p_load,
            q_load=bus.q_load,
            shunt_g=float(rng.uniform(0.001, 0.02)),
            shunt_b=float(rng.uniform(-0.1, 0.1)) or 0.05,
        )
        for bus in net.buses
    )
    return Network(
        base_mva=net.base_mva,
        buses=buses,
        generators=net.generators,
        branches=branches,
        reference_bus=net.reference_bus,
        name=name or f"{net.name}__ext",
        meta=dict(net.meta),
    )


# ---------------------------------------------------------------------------
# W <-> C mappings


@dataclass
class MappedPoint:
    program: ConicProgram
    x: np.ndarray
    report: ResidualReport

    @property
    def objective(self) -> float:
        return self.program.objective(self.x)


def _builder(prog: ConicProgram):
    kind = prog.meta.get("kind")
    if kind == "soc":
        return build_soc
    if kind == "qc":
        return build_qc
    raise ValueError(f"mapping needs an SOC or QC program, got kind {kind!r}")


def _transfer(source: ConicProgram, x: np.ndarray, target: ConicProgram) -> np.ndarray:
    out = np.zeros(target.n_vars)
    for k, name in enumerate(target.names):
        if source.has_var(name):
            out[k] = x[source.var(name)]
    return out


def _checked_point(prog: ConicProgram, sol: Solution | np.ndarray, want: str, tol: float) -> np.ndarray:
    if prog.meta.get("variant") != want:
        raise ValueError(f"{prog.name} is not a {want}-variant program")
    report = certify_solution(prog, sol, tol)
    if not report.passed:
        group, value = report.worst
        raise InfeasiblePointError(f"{prog.name}: input violates {group} by {value:.3e}")
    return sol.x if isinstance(sol, Solution) else np.asarray(sol, dtype=float)


def map_w_to_c(prog: ConicProgram, sol: Solution | np.ndarray, net: Network, tol: float = 1e-6) -> MappedPoint:
    """Lift a W-variant point into the C variant by assigning l its current-squared value."""
    x = _checked_point(prog, sol, "W", tol)
    target = _builder(prog)(net, "C", prog.meta.get("objective", "cost"))
    out = _transfer(prog, x, target)
    values = prog.values(x, "w")
    for k in range(net.n_branch):
        out[target.var(f"l[{k}]")] = max(current_squared_expr(net, k, values), 0.0)
    return MappedPoint(target, out, certify_solution(target, out, tol))


def map_c_to_w(prog: ConicProgram, sol: Solution | np.ndarray, net: Network, tol: float = 1e-6) -> MappedPoint:
    """Project a C-variant point onto the W variant (drop l) and certify the W cones."""
    x = _checked_point(prog, sol, "C", tol)
    target = _builder(prog)(net, "W", prog.meta.get("objective", "cost"))
    out = _transfer(prog, x, target)
    return MappedPoint(target, out, certify_solution(target, out, tol))


def relaxation_point(
    prog: ConicProgram, net: Network, vm: np.ndarray, va: np.ndarray, pg: np.ndarray, qg: np.ndarray
) -> np.ndarray:
    """Lift a polar operating point into the variables of an SOC or QC program."""
    _builder(prog)
    idx = net.bus_index
    values: Dict[str, float] = dict(ac_point_to_w(net, vm, va))
    for g in range(net.n_gen):
        values[f"pg[{g}]"] = float(pg[g])
        values[f"qg[{g}]"] = float(qg[g])
    for k, br in enumerate(net.branches):
        values[f"l[{k}]"] = current_squared_expr(net, k, values)
        i, j = idx[br.from_bus], idx[br.to_bus]
        vv = float(vm[i] * vm[j])
        delta = float(va[i] - va[j]) - br.tap_shift
        values.update({f"vv[{k}]": vv, f"cs[{k}]": math.cos(delta), f"sn[{k}]": math.sin(delta)})
        values.update({f"wc[{k}]": vv * math.cos(delta), f"ws[{k}]": vv * math.sin(delta)})
    for bus in net.buses:
        values[f"v[{bus.id}]"] = float(vm[idx[bus.id]])
        values[f"va[{bus.id}]"] = float(va[idx[bus.id]])

    x = np.zeros(prog.n_vars)
    for k, name in enumerate(prog.names):
        x[k] = values.get(name, 0.0)
    # arc flows are linear in W
    for k in range(net.n_branch):
        for key, expr in w_flow_exprs(prog, net, k).items():
            kind, side = key.split(",")
            x[prog.var(f"{kind}[{k},{side}]")] = expr.value(x)
    return x


# ---------------------------------------------------------------------------
# rank-1 recovery


@dataclass
class Rank1Result:
    rank_one: bool
    ratio: float
    voltages: Optional[np.ndarray] = None
    # max |V V* - W| of the recovered voltages
    residual: float = math.inf


def rank1_recover(W: np.ndarray, tol: float = RANK_TOL, reference: int = 0) -> Rank1Result:
    """Voltages V with V V* = W (angle 0 at `reference`) when W is PSD and numerically rank one."""
    W = np.asarray(W, dtype=complex)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise NonHermitianError(f"expected a square matrix, got shape {W.shape}")
    scale = max(1.0, float(np.abs(W).max(initial=0.0)))
    if float(np.abs(W - W.conj().T).max(initial=0.0)) > 1e-9 * scale:
        raise NonHermitianError("matrix is not Hermitian")
    if W.shape[0] == 0:
        return Rank1Result(False, 1.0)
    values, vectors = np.linalg.eigh(W)
    top = float(values[-1])
    if top <= 0.0:
        return Rank1Result(False, 1.0)
    second = float(values[-2]) if len(values) > 1 else 0.0
    ratio = max(abs(second), abs(float(values[0]))) / top if len(values) > 1 else 0.0
    if float(values[0]) < -tol * top or ratio > tol:
        return Rank1Result(False, ratio)
    v = math.sqrt(top) * vectors[:, -1]
    if abs(v[reference]) > 0.0:
        v = v * np.exp(-1j * np.angle(v[reference]))
    residual = float(np.abs(np.outer(v, v.conj()) - W).max())
    return Rank1Result(True, ratio, v, residual)


@dataclass
class VoltageRecovery:
    vm: np.ndarray
    va: np.ndarray
    # W_ii W_jj - |W_ij|^2 relative to W_ii W_jj, per branch
    minors: Dict[int, float]
    cycles_consistent: bool
    tol: float = RANK_TOL

    @property
    def rank_one(self) -> bool:
        return self.cycles_consistent and all(m <= self.tol for m in self.minors.values())


def edge_minors(net: Network, values: Mapping[str, float]) -> Dict[int, float]:
    out: Dict[int, float] = {}
    for k, br in enumerate(net.branches):
        prod = values[f"w[{br.from_bus}]"] * values[f"w[{br.to_bus}]"]
        cross = values[f"wr[{k}]"] ** 2 + values[f"wi[{k}]"] ** 2
        out[k] = (prod - cross) / max(prod, 1e-300)
    return out


def _wrap(angle: float) -> float:
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


def recover_voltages(net: Network, values: Mapping[str, float], tol: float = RANK_TOL) -> VoltageRecovery:
    """Magnitudes from W_ii and angles along a spanning tree rooted at the reference bus."""
    idx = net.bus_index
    vm = np.array([math.sqrt(max(values[f"w[{bus.id}]"], 0.0)) for bus in net.buses])
    va = np.zeros(net.n_bus)
    angle = [math.atan2(values[f"wi[{k}]"], values[f"wr[{k}]"]) for k in range(net.n_branch)]
    adjacency: Dict[int, List[Tuple[int, float]]] = {k: [] for k in range(net.n_bus)}
    for k, br in enumerate(net.branches):
        i, j = idx[br.from_bus], idx[br.to_bus]
        # W_ij = V_i conj(V_j) has phase theta_i - theta_j
        adjacency[i].append((j, -angle[k]))
        adjacency[j].append((i, angle[k]))
    root = idx[net.reference_bus]
    seen = {root}
    queue = deque([root])
    while queue:
        a = queue.popleft()
        for b, step in adjacency[a]:
            if b not in seen:
                va[b] = va[a] + step
                seen.add(b)
                queue.append(b)
    consistent = all(
        abs(_wrap(va[idx[br.from_bus]] - va[idx[br.to_bus]] - angle[k])) <= ANGLE_TOL
        for k, br in enumerate(net.branches)
    )
    return VoltageRecovery(vm, va, edge_minors(net, values), consistent, tol)


@dataclass
class AcRecovery:
    voltages: VoltageRecovery
    x: np.ndarray
    report: ResidualReport

    @property
    def ac_feasible(self) -> bool:
        return self.voltages.rank_one and self.report.passed


def ac_point_from_relaxation(
    net: Network,
    prog: ConicProgram,
    sol: Solution,
    tol: float = AC_FEASIBLE_TOL,
    ac_prog: NlpProgram | None = None,
) -> AcRecovery:
    """Map a relaxation solution to an AC point and certify it against the AC equations."""
    if not prog.has_var(f"w[{net.buses[0].id}]"):
        raise NotApplicableError(f"{prog.name} carries no voltage variables")
    values = prog.values(sol.x, "")
    voltages = recover_voltages(net, values)
    ac_prog = ac_prog or build_ac(net, prog.meta.get("objective", "cost"))  # type: ignore[arg-type]
    pg = np.array([values[f"pg[{g}]"] for g in range(net.n_gen)])
    qg = np.array([values[f"qg[{g}]"] for g in range(net.n_gen)])
    x = ac_point(ac_prog, voltages.vm, voltages.va, pg, qg)
    return AcRecovery(voltages, x, certify_solution(ac_prog, x, tol))


# ---------------------------------------------------------------------------
# dominance


@dataclass
class DominanceReport:
    case: str
    bounds: Dict[str, Optional[float]] = field(default_factory=dict)
    statuses: Dict[str, str] = field(default_factory=dict)
    # None when one side of the comparison is missing
    checks: Dict[str, Optional[bool]] = field(default_factory=dict)
    sdp_position: Optional[str] = None

    @property
    def holds(self) -> bool:
        return all(v is not False for v in self.checks.values())


def _eps(value: float) -> float:
    return 1e-6 * max(1.0, abs(value))


def _leq(a: Optional[float], b: Optional[float]) -> Optional[bool]:
    if a is None or b is None:
        return None
    return a <= b + _eps(b)


def dominance_suite(
    net: Network, sdp_bound: float | None = None, cfg: SolverConfig | None = None, objective: str = "cost"
) -> DominanceReport:
    """Solve CP, SOC, QC and the AC heuristic and check bound(CP) <= bound(SOC) <= bound(QC) <= AC."""
    cfg = cfg or SolverConfig()
    report = DominanceReport(case=net.name)
    for name in RELAXATIONS:
        result, _, _ = run_relaxation(net, name, "W", objective, cfg, recover=False)
        if result is None:
            report.statuses[name] = "n.a."
            continue
        report.statuses[name] = result.status
        report.bounds[name] = result.bound
    ac = run_ac(net, objective, cfg)
    report.statuses["ac"] = ac.status.value
    report.bounds["ac"] = ac.objective if ac.ok else None

    b = report.bounds
    if report.statuses.get("cp") != "n.a.":
        report.checks["cp<=soc"] = _leq(b.get("cp"), b.get("soc"))
    report.checks["soc<=qc"] = _leq(b.get("soc"), b.get("qc"))
    report.checks["qc<=ac"] = _leq(b.get("qc"), b.get("ac"))
    if sdp_bound is not None:
        b["sdp"] = sdp_bound
        report.checks["soc<=sdp"] = _leq(b.get("soc"), sdp_bound)
        report.checks["sdp<=ac"] = _leq(sdp_bound, b.get("ac"))
        qc = b.get("qc")
        if qc is None:
            report.sdp_position = "qc unavailable"
        elif abs(sdp_bound - qc) <= _eps(qc):
            report.sdp_position = "equal to qc"
        else:
            report.sdp_position = "above qc" if sdp_bound > qc else "below qc"
    if not report.holds:
        logger.warning("%s: dominance ordering violated: %s", net.name, report.checks)
    return report


# ---------------------------------------------------------------------------
# W versus C timing


FORMULATIONS = (("W-SOC", "soc", "W"), ("C-SOC", "soc", "C"), ("W-QC", "qc", "W"), ("C-QC", "qc", "C"))
BENCH_COLUMNS = ("case", "formulation", "median_time", "iterations", "status", "repetitions")


@dataclass
class BenchRow:
    case: str
    formulation: str
    median_time: float
    iterations: int
    status: str
    repetitions: int


def bench_wc(net: Network, repetitions: int = 3, cfg: SolverConfig | None = None) -> List[BenchRow]:
    """Median build-and-solve time of the W and C forms of SOC and QC."""
    cfg = cfg or SolverConfig()
    rows: List[BenchRow] = []
    if repetitions <= 0:
        return rows
    for label, kind, variant in FORMULATIONS:
        builder = build_soc if kind == "soc" else build_qc
        times: List[float] = []
        sol: Optional[Solution] = None
        try:
            for _ in range(repetitions):
                started = time.perf_counter()
                sol = solve_conic(builder(net, variant), cfg)
                times.append(time.perf_counter() - started)
        except EnvelopeDomainError as exc:
            logger.warning("%s %s: %s", net.name, label, exc)
            rows.append(BenchRow(net.name, label, math.nan, 0, "n.a.", repetitions))
            continue
        assert sol is not None
        rows.append(BenchRow(net.name, label, statistics.median(times), sol.iterations, sol.status.value, repetitions))
    return rows


def bench_to_csv(rows: Iterable[BenchRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BENCH_COLUMNS)
    for row in rows:
        time_cell = "" if math.isnan(row.median_time) else repr(row.median_time)
        writer.writerow([row.case, row.formulation, time_cell, row.iterations, row.status, row.repetitions])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# case pipeline


def parse_relaxations(text: str | Sequence[str]) -> List[str]:
    items = text.split(",") if isinstance(text, str) else list(text)
    out: List[str] = []
    for item in items:
        name = item.strip().lower()
        if not name:
            continue
        if name not in RELAXATIONS:
            raise ValueError(f"unknown relaxation {name!r}; choose from {', '.join(RELAXATIONS)}")
        if name not in out:
            out.append(name)
    if not out:
        raise ValueError("select at least one relaxation")
    return out


def run_ac(net: Network, objective: str = "cost", cfg: SolverConfig | None = None, start: np.ndarray | None = None) -> Solution:
    prog = build_ac(net, objective)  # type: ignore[arg-type]
    return solve_local_ac(prog, start, cfg)


def run_relaxation(
    net: Network,
    name: str,
    variant: str = "W",
    objective: str = "cost",
    cfg: SolverConfig | None = None,
    recover: bool = True,
) -> Tuple[Optional[RelaxationResult], Optional[Solution], Optional[AcRecovery]]:
    """Build and solve one relaxation; (None, None, None) when it does not apply."""
    cfg = cfg or SolverConfig()
    started = time.perf_counter()
    try:
        if name == "cp":
            prog = build_copper_plate(net, objective)  # type: ignore[arg-type]
        elif name == "soc":
            prog = build_soc(net, variant, objective)  # type: ignore[arg-type]
        elif name == "qc":
            prog = build_qc(net, variant, objective)  # type: ignore[arg-type]
        else:
            raise ValueError(f"unknown relaxation {name!r}")
    except NotApplicableError as exc:
        logger.info("%s %s: %s", net.name, name, exc)
        return None, None, None
    except EnvelopeDomainError as exc:
        logger.warning("%s %s: %s", net.name, name, exc)
        return RelaxationResult(name, "n.a."), None, None

    sol = solve_conic(prog, cfg)
    result = RelaxationResult(
        name=name,
        status=sol.status.value,
        bound=sol.objective if sol.has_bound else None,
        runtime=time.perf_counter() - started,
        iterations=sol.iterations,
        numeric_warning=sol.status is SolveStatus.NUMERIC_WARNING,
    )
    recovery = None
    if recover and name != "cp" and sol.has_bound:
        recovery = ac_point_from_relaxation(net, prog, sol)
        result.ac_feasible = recovery.ac_feasible
    logger.info("%s %s: %s bound %s", net.name, name, result.status, result.bound)
    return result, sol, recovery


def assemble_report(
    case: str,
    ac: Optional[Solution],
    results: Iterable[Optional[RelaxationResult]],
    sdp_bound: float | None = None,
    ac_runtime: float | None = None,
) -> GapReport:
    report = GapReport(case=case)
    if ac is not None:
        report.ac_status = ac.status.value
        report.ac_runtime = ac.wall_time if ac_runtime is None else ac_runtime
        if ac.ok:
            report.ac_value = ac.objective
    heuristic = report.ac_value if report.ac_value is not None and report.ac_value > 0.0 else None
    for result in results:
        if result is None:
            continue
        if heuristic is not None and result.bound is not None:
            result.gap = optimality_gap(heuristic, result.bound)
        report.add(result)
        if result.status == SolveStatus.INFEASIBLE.value and INFEASIBLE_NOTE not in report.notes:
            report.notes.append(INFEASIBLE_NOTE)
    if sdp_bound is not None:
        gap = optimality_gap(heuristic, sdp_bound) if heuristic is not None else None
        report.add(RelaxationResult("sdp", EXTERNAL, bound=sdp_bound, gap=gap))
    return report


def warm_start(recoveries: Iterable[Optional[AcRecovery]]) -> Optional[np.ndarray]:
    for recovery in recoveries:
        if recovery is not None and np.all(np.isfinite(recovery.x)):
            return recovery.x
    return None


def solve_case(
    net: Network,
    relaxations: Sequence[str] = RELAXATIONS,
    cfg: SolverConfig | None = None,
    objective: str = "cost",
    variant: str = "W",
    sdp_bound: float | None = None,
    name: str | None = None,
) -> GapReport:
    """AC heuristic plus each requested relaxation, with gaps against the heuristic."""
    cfg = cfg or SolverConfig()
    names = parse_relaxations(relaxations)
    results: List[Optional[RelaxationResult]] = []
    recoveries: List[Optional[AcRecovery]] = []
    for relax in names:
        result, _, recovery = run_relaxation(net, relax, variant, objective, cfg)
        results.append(result)
        recoveries.append(recovery)
    start = warm_start(recoveries) if cfg.start == "warm" else None
    ac = run_ac(net, objective, cfg, start)
    return assemble_report(name or net.name, ac, results, sdp_bound)


# ---------------------------------------------------------------------------
# W/C equivalence on solved programs


@dataclass
class EquivalenceResult:
    case: str
    kind: str
    w_objective: Optional[float] = None
    c_objective: Optional[float] = None
    # worst residual of each mapped point, None when the mapping could not run
    w_to_c: Optional[float] = None
    c_to_w: Optional[float] = None
    tol: float = 1e-6

    @property
    def relative_difference(self) -> float:
        if self.w_objective is None or self.c_objective is None:
            return math.inf
        return abs(self.w_objective - self.c_objective) / max(1.0, abs(self.w_objective))

    @property
    def ok(self) -> bool:
        mapped = [self.w_to_c, self.c_to_w]
        return self.relative_difference <= self.tol and all(m is not None and m <= self.tol for m in mapped)


def check_equivalence(net: Network, cfg: SolverConfig | None = None, kind: str = "soc", tol: float = 1e-6) -> EquivalenceResult:
    """Solve both variants, compare objectives and map each optimum into the other variant."""
    cfg = cfg or SolverConfig()
    builder = build_soc if kind == "soc" else build_qc
    result = EquivalenceResult(case=net.name, kind=kind, tol=tol)
    w_prog, c_prog = builder(net, "W"), builder(net, "C")
    w_sol, c_sol = solve_conic(w_prog, cfg), solve_conic(c_prog, cfg)
    if w_sol.ok:
        result.w_objective = w_sol.objective
        try:
            result.w_to_c = map_w_to_c(w_prog, w_sol, net, tol).report.worst[1]
        except InfeasiblePointError as exc:
            logger.warning("%s", exc)
    if c_sol.ok:
        result.c_objective = c_sol.objective
        try:
            result.c_to_w = map_c_to_w(c_prog, c_sol, net, tol).report.worst[1]
        except InfeasiblePointError as exc:
            logger.warning("%s", exc)
    return result
