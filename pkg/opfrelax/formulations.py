"""
Optimization models built from a `Network`.

Every model uses the extended branch physics (bus shunts, line charging,
complex taps on the from side). In W space a branch (i, j) with series
admittance Y = g + ib, charging bc and tap T = t e^{i phi} carries

    p_ij = g W_ii / t^2 - (g R + b I)
    q_ij = -(b + bc/2) W_ii / t^2 - (g I - b R)
    p_ji = g W_jj - (g R - b I)
    q_ji = -(b + bc/2) W_jj + (g I + b R)

where R + iI = W_ij e^{-i phi} / t. Phase angle difference limits and the
trigonometric envelopes act on the shifted difference theta_i - theta_j - phi.

Variable names used across the package:
    w[i] wr[k] wi[k] pg[g] qg[g] p[k,f] q[k,f] p[k,t] q[k,t] l[k]
    v[i] va[i] vv[k] cs[k] sn[k] wc[k] ws[k]
with bus ids i, branch positions k and generator positions g.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Literal, Mapping, Tuple

import numpy as np
import scipy.sparse as sp

from .envelopes import (
    AUX,
    EnvelopeSet,
    compose_product,
    cosine_envelope,
    mccormick,
    sine_envelope,
    square_envelope,
)
from .errors import EnvelopeDomainError, NotApplicableError
from .network import Branch, Network, require_valid
from .program import ConicProgram, LinExpr, NlpProgram

logger = logging.getLogger(__name__)

Variant = Literal["W", "C"]
Objective = Literal["cost", "loss"]

ARC_SIDES = ("f", "t")


@dataclass(frozen=True)
class BranchTerms:
    g: float
    b: float
    bc: float
    t: float
    phi: float

    @classmethod
    def of(cls, br: Branch) -> "BranchTerms":
        y = br.admittance
        return cls(g=y.real, b=y.imag, bc=br.b_charge, t=br.tap_mag, phi=br.tap_shift)


def _normalize_variant(variant: str) -> Variant:
    v = variant.upper()
    if v not in ("W", "C"):
        raise ValueError(f"unknown variant {variant!r}; expected W or C")
    return v  # type: ignore[return-value]


def _check_objective(objective: str) -> None:
    if objective not in ("cost", "loss"):
        raise ValueError(f"unknown objective {objective!r}; expected cost or loss")


def _clip(value: float, lo: float, hi: float) -> float:
    return min(max(value, lo), hi)


# ---------------------------------------------------------------------------
# shared pieces of the W-space models


def _set_objective(prog: ConicProgram, net: Network, objective: str) -> None:
    base = net.base_mva
    quad: List[Tuple[int, int, float]] = []
    lin = LinExpr()
    for g, gen in enumerate(net.generators):
        pg = prog.var(f"pg[{g}]")
        if objective == "loss":
            lin.add(pg, base)
            continue
        if gen.c2 != 0.0:
            quad.append((pg, pg, gen.c2 * base * base))
        lin.add(pg, gen.c1 * base)
        lin.const += gen.c0
    prog.set_objective(quad, lin)


def _add_generators(prog: ConicProgram, net: Network) -> None:
    for g, gen in enumerate(net.generators):
        p_start = _clip(0.0, gen.p_min, gen.p_max)
        q_start = _clip(0.0, gen.q_min, gen.q_max)
        prog.add_var(f"pg[{g}]", gen.p_min, gen.p_max, p_start)
        prog.add_var(f"qg[{g}]", gen.q_min, gen.q_max, q_start)


def _add_arcs(prog: ConicProgram, net: Network) -> None:
    for k, br in enumerate(net.branches):
        for side in ARC_SIDES:
            prog.add_var(f"p[{k},{side}]", -br.s_max, br.s_max, 0.0)
            prog.add_var(f"q[{k},{side}]", -br.s_max, br.s_max, 0.0)


def rotate(wr: LinExpr, wi: LinExpr, phi: float) -> Tuple[LinExpr, LinExpr]:
    """(Re, Im) of (wr + i wi) e^{-i phi}."""
    c, s = math.cos(phi), math.sin(phi)
    return wr * c + wi * s, wi * c - wr * s


def shifted_w(prog: ConicProgram, k: int, terms: BranchTerms) -> Tuple[LinExpr, LinExpr]:
    """(Re, Im) of W_ij e^{-i phi} as expressions of wr[k], wi[k]."""
    return rotate(prog.x(f"wr[{k}]"), prog.x(f"wi[{k}]"), terms.phi)


def w_flow_exprs(prog: ConicProgram, net: Network, k: int) -> Dict[str, LinExpr]:
    """Linear expressions of the four directed branch flows in W space."""
    br = net.branches[k]
    return branch_flow_exprs(
        BranchTerms.of(br),
        prog.x(f"w[{br.from_bus}]"),
        prog.x(f"w[{br.to_bus}]"),
        prog.x(f"wr[{k}]"),
        prog.x(f"wi[{k}]"),
    )


def branch_flow_exprs(
    terms: BranchTerms, wii: LinExpr, wjj: LinExpr, wr: LinExpr, wi: LinExpr
) -> Dict[str, LinExpr]:
    g, b, bc, t = terms.g, terms.b, terms.bc, terms.t
    re, im = rotate(wr, wi, terms.phi)
    r_, i_ = re * (1.0 / t), im * (1.0 / t)
    return {
        "p,f": wii * (g / (t * t)) - r_ * g - i_ * b,
        "q,f": wii * (-(b + bc / 2.0) / (t * t)) - i_ * g + r_ * b,
        "p,t": wjj * g - r_ * g + i_ * b,
        "q,t": wjj * (-(b + bc / 2.0)) + i_ * g + r_ * b,
    }


def _add_flow_rows(prog: ConicProgram, net: Network) -> None:
    for k in range(net.n_branch):
        flows = w_flow_exprs(prog, net, k)
        for side in ARC_SIDES:
            for kind in ("p", "q"):
                arc = prog.x(f"{kind}[{k},{side}]")
                prog.add_linear(arc - flows[f"{kind},{side}"], "==", 0.0, f"flow_{kind}")


def _add_kcl(prog: ConicProgram, net: Network) -> None:
    p_rows: Dict[int, LinExpr] = {bus.id: LinExpr() for bus in net.buses}
    q_rows: Dict[int, LinExpr] = {bus.id: LinExpr() for bus in net.buses}
    for g, gen in enumerate(net.generators):
        p_rows[gen.bus].add(prog.var(f"pg[{g}]"), 1.0)
        q_rows[gen.bus].add(prog.var(f"qg[{g}]"), 1.0)
    for k, br in enumerate(net.branches):
        for side, bus in zip(ARC_SIDES, (br.from_bus, br.to_bus)):
            p_rows[bus].add(prog.var(f"p[{k},{side}]"), -1.0)
            q_rows[bus].add(prog.var(f"q[{k},{side}]"), -1.0)
    for bus in net.buses:
        w = prog.var(f"w[{bus.id}]")
        prog.add_linear(p_rows[bus.id].add(w, -bus.shunt_g), "==", bus.p_load, "kcl_p")
        prog.add_linear(q_rows[bus.id].add(w, bus.shunt_b), "==", bus.q_load, "kcl_q")


def _add_thermal(prog: ConicProgram, net: Network) -> None:
    for k, br in enumerate(net.branches):
        if not math.isfinite(br.s_max):
            continue
        for side in ARC_SIDES:
            parts = [prog.x(f"p[{k},{side}]"), prog.x(f"q[{k},{side}]")]
            prog.add_square_le(parts, LinExpr(), br.s_max * br.s_max, "thermal")


def _add_pad(prog: ConicProgram, net: Network) -> None:
    for k, br in enumerate(net.branches):
        re, im = shifted_w(prog, k, BranchTerms.of(br))
        slope = math.tan(br.angle_max)
        prog.add_linear(im - re * slope, "<=", 0.0, "pad")
        prog.add_linear(-im - re * slope, "<=", 0.0, "pad")


def _w_space_model(net: Network, name: str, objective: str) -> ConicProgram:
    prog = ConicProgram(name=name)
    for bus in net.buses:
        prog.add_var(f"w[{bus.id}]", bus.v_min**2, bus.v_max**2, _clip(1.0, bus.v_min**2, bus.v_max**2))
    for k, br in enumerate(net.branches):
        lo_i, hi_i = net.bus(br.from_bus).v_min, net.bus(br.from_bus).v_max
        lo_j, hi_j = net.bus(br.to_bus).v_min, net.bus(br.to_bus).v_max
        prog.add_var(f"wr[{k}]", start=_clip(1.0, lo_i * lo_j, hi_i * hi_j))
        prog.add_var(f"wi[{k}]", start=0.0)
    _add_generators(prog, net)
    _add_arcs(prog, net)
    _set_objective(prog, net, objective)
    _add_kcl(prog, net)
    _add_flow_rows(prog, net)
    _add_thermal(prog, net)
    _add_pad(prog, net)
    return prog


def current_squared_expr(net: Network, k: int, w: Mapping[str, float]) -> float:
    """|I_s|^2 as a linear function of W for branch k (from-side current behind the tap)."""
    br = net.branches[k]
    terms = BranchTerms.of(br)
    y = complex(terms.g, terms.b)
    yc = y + 0.5j * terms.bc
    wii = w[f"w[{br.from_bus}]"] / (terms.t * terms.t)
    wjj = w[f"w[{br.to_bus}]"]
    # U_i conj(V_j) = W_ij / T
    cross = complex(w[f"wr[{k}]"], w[f"wi[{k}]"]) / br.tap
    return abs(yc) ** 2 * wii + abs(y) ** 2 * wjj - 2.0 * (yc * y.conjugate() * cross).real


def _add_c_family(prog: ConicProgram, net: Network) -> None:
    for k, br in enumerate(net.branches):
        terms = BranchTerms.of(br)
        l_var = prog.add_var(f"l[{k}]", 0.0, math.inf, 0.0)
        wii_t = prog.x(f"w[{br.from_bus}]", 1.0 / (terms.t * terms.t))
        wjj = prog.x(f"w[{br.to_bus}]")
        pf, qf = prog.x(f"p[{k},f]"), prog.x(f"q[{k},f]")
        pt, qt = prog.x(f"p[{k},t]"), prog.x(f"q[{k},t]")
        half = terms.bc / 2.0
        series = LinExpr.of(l_var) + wii_t * (half * half) + qf * terms.bc
        prog.add_linear(pf + pt - series * br.r, "==", 0.0, "loss_p")
        prog.add_linear(qf + qt - series * br.x + (wii_t + wjj) * half, "==", 0.0, "loss_q")
        prog.add_rotated_cone([pf, qf], wii_t, LinExpr.of(l_var), "c_cone")


def _add_w_cones(prog: ConicProgram, net: Network) -> None:
    for k, br in enumerate(net.branches):
        prog.add_rotated_cone(
            [prog.x(f"wr[{k}]"), prog.x(f"wi[{k}]")],
            prog.x(f"w[{br.from_bus}]"),
            prog.x(f"w[{br.to_bus}]"),
            "w_cone",
        )


def build_soc(net: Network, variant: str = "W", objective: Objective = "cost") -> ConicProgram:
    """SOC relaxation; W uses |W_ij|^2 <= W_ii W_jj, C uses the current-squared lifting."""
    require_valid(net)
    variant = _normalize_variant(variant)
    _check_objective(objective)
    prog = _w_space_model(net, f"{net.name}/{variant}-SOC", objective)
    if variant == "W":
        _add_w_cones(prog, net)
    else:
        _add_c_family(prog, net)
    prog.meta.update(kind="soc", variant=variant, objective=objective, network=net)
    logger.debug("built %s: %s", prog.name, prog.summary())
    return prog


# ---------------------------------------------------------------------------
# QC


def emit_envelope(
    prog: ConicProgram, env: EnvelopeSet, mapping: Mapping[str, LinExpr], group: str
) -> None:
    """Add every cut of `env` with its symbols replaced by program expressions."""
    for cut in env.cuts:
        expr = LinExpr()
        for name, coef in cut.linear.items():
            expr = expr + mapping[name] * coef
        if cut.is_quadratic:
            parts = [mapping[name] * math.sqrt(coef) for name, coef in cut.square.items() if coef > 0.0]
            prog.add_square_le(parts, expr, cut.rhs, group)
        else:
            prog.add_linear(expr, cut.sense, cut.rhs, group)


def angle_difference(prog: ConicProgram, br: Branch) -> LinExpr:
    return prog.x(f"va[{br.from_bus}]") - prog.x(f"va[{br.to_bus}]") - br.tap_shift


def build_qc(net: Network, variant: str = "W", objective: Objective = "cost") -> ConicProgram:
    """QC relaxation: the SOC model of the same variant plus the envelope rows."""
    require_valid(net)
    variant = _normalize_variant(variant)
    for k, br in enumerate(net.branches):
        if not (0.0 < br.angle_max <= math.pi / 2.0):
            raise EnvelopeDomainError(f"branch {k}: angle bound {br.angle_max} outside (0, pi/2]")

    prog = build_soc(net, variant, objective)
    prog.name = f"{net.name}/{variant}-QC"

    for bus in net.buses:
        prog.add_var(f"v[{bus.id}]", bus.v_min, bus.v_max, _clip(1.0, bus.v_min, bus.v_max))
        fixed = bus.id == net.reference_bus
        prog.add_var(f"va[{bus.id}]", 0.0 if fixed else -math.inf, 0.0 if fixed else math.inf, 0.0)
        env = square_envelope(bus.v_min, bus.v_max, arg="v")
        emit_envelope(prog, env, {"v": prog.x(f"v[{bus.id}]"), AUX: prog.x(f"w[{bus.id}]")}, "qc_square")

    for k, br in enumerate(net.branches):
        bi, bj = net.bus(br.from_bus), net.bus(br.to_bus)
        terms = BranchTerms.of(br)
        delta = angle_difference(prog, br)
        prog.add_linear(delta, "<=", br.angle_max, "qc_angle")
        prog.add_linear(delta, ">=", -br.angle_max, "qc_angle")

        vv_env = mccormick(bi.v_min, bi.v_max, bj.v_min, bj.v_max)
        cos_env = cosine_envelope(br.angle_max, arg="d")
        sin_env = sine_envelope(br.angle_max, arg="d")
        wc_env = compose_product(vv_env, cos_env)
        ws_env = compose_product(vv_env, sin_env)

        vv = prog.add_var(f"vv[{k}]", vv_env.aux_lo, vv_env.aux_hi, _clip(1.0, vv_env.aux_lo, vv_env.aux_hi))
        cs = prog.add_var(f"cs[{k}]", cos_env.aux_lo, cos_env.aux_hi, 1.0)
        sn = prog.add_var(f"sn[{k}]", sin_env.aux_lo, sin_env.aux_hi, 0.0)
        wc = prog.add_var(f"wc[{k}]", wc_env.aux_lo, wc_env.aux_hi, _clip(1.0, wc_env.aux_lo, wc_env.aux_hi))
        ws = prog.add_var(f"ws[{k}]", ws_env.aux_lo, ws_env.aux_hi, 0.0)

        emit_envelope(
            prog,
            vv_env,
            {"x": prog.x(f"v[{br.from_bus}]"), "y": prog.x(f"v[{br.to_bus}]"), AUX: LinExpr.of(vv)},
            "qc_vv",
        )
        emit_envelope(prog, cos_env, {"d": delta, AUX: LinExpr.of(cs)}, "qc_cos")
        emit_envelope(prog, sin_env, {"d": delta, AUX: LinExpr.of(sn)}, "qc_sin")
        emit_envelope(prog, wc_env, {"a": LinExpr.of(vv), "b": LinExpr.of(cs), AUX: LinExpr.of(wc)}, "qc_wc")
        emit_envelope(prog, ws_env, {"a": LinExpr.of(vv), "b": LinExpr.of(sn), AUX: LinExpr.of(ws)}, "qc_ws")

        re, im = shifted_w(prog, k, terms)
        prog.add_linear(LinExpr.of(wc) - re, "==", 0.0, "qc_link")
        prog.add_linear(LinExpr.of(ws) - im, "==", 0.0, "qc_link")

    prog.meta.update(kind="qc")
    logger.debug("built %s: %s", prog.name, prog.summary())
    return prog


# ---------------------------------------------------------------------------
# copper plate


def build_copper_plate(net: Network, objective: Objective = "cost") -> ConicProgram:
    """Single-bus economic dispatch: total generation equals total load."""
    require_valid(net)
    _check_objective(objective)
    negative = [k for k, br in enumerate(net.branches) if br.r < 0.0]
    if negative:
        raise NotApplicableError(f"copper plate is not a relaxation with negative resistance on branches {negative}")
    prog = ConicProgram(name=f"{net.name}/CP")
    balance = LinExpr()
    for g, gen in enumerate(net.generators):
        balance.add(prog.add_var(f"pg[{g}]", gen.p_min, gen.p_max, _clip(0.0, gen.p_min, gen.p_max)), 1.0)
    _set_objective(prog, net, objective)
    prog.add_linear(balance, "==", sum(bus.p_load for bus in net.buses), "balance")
    prog.meta.update(kind="cp", variant=None, objective=objective, network=net)
    return prog


# ---------------------------------------------------------------------------
# polar AC model


@dataclass(frozen=True)
class AcLayout:
    """Column offsets of the polar AC variables."""

    n_bus: int
    n_gen: int
    n_branch: int

    @property
    def va(self) -> int:
        return 0

    @property
    def vm(self) -> int:
        return self.n_bus

    @property
    def pg(self) -> int:
        return 2 * self.n_bus

    @property
    def qg(self) -> int:
        return 2 * self.n_bus + self.n_gen

    @property
    def p(self) -> int:
        return 2 * self.n_bus + 2 * self.n_gen

    @property
    def q(self) -> int:
        return self.p + 2 * self.n_branch

    @property
    def n(self) -> int:
        return self.q + 2 * self.n_branch


# (variable block, to-side arc, from-bus coefficient, to-bus coefficient, alpha, beta)
def _flow_kinds(g, b, bc, t):
    inv = 1.0 / (t * t)
    zero = np.zeros_like(g)
    return [
        ("p", False, g * inv, zero, -g, -b),
        ("p", True, zero, g, -g, b),
        ("q", False, -(b + bc / 2.0) * inv, zero, b, -g),
        ("q", True, zero, -(b + bc / 2.0), b, g),
    ]


def build_ac(net: Network, objective: Objective = "cost") -> NlpProgram:
    """Nonconvex polar AC-OPF with the flows carried as explicit variables."""
    require_valid(net)
    _check_objective(objective)
    nb, ng, m = net.n_bus, net.n_gen, net.n_branch
    lay = AcLayout(nb, ng, m)
    base = net.base_mva
    idx = net.bus_index

    fi = np.array([idx[br.from_bus] for br in net.branches], dtype=int)
    ti = np.array([idx[br.to_bus] for br in net.branches], dtype=int)
    terms = [BranchTerms.of(br) for br in net.branches]
    g = np.array([tm.g for tm in terms])
    b = np.array([tm.b for tm in terms])
    bc = np.array([tm.bc for tm in terms])
    tau = np.array([tm.t for tm in terms])
    phi = np.array([tm.phi for tm in terms])
    dmax = np.array([br.angle_max for br in net.branches])
    smax = np.array([br.s_max for br in net.branches])
    kinds = _flow_kinds(g, b, bc, tau)
    kinv = 1.0 / tau

    gen_bus = np.array([idx[gen.bus] for gen in net.generators], dtype=int)
    c2 = np.array([gen.c2 for gen in net.generators])
    c1 = np.array([gen.c1 for gen in net.generators])
    c0 = np.array([gen.c0 for gen in net.generators])
    pd = np.array([bus.p_load for bus in net.buses])
    qd = np.array([bus.q_load for bus in net.buses])
    gs = np.array([bus.shunt_g for bus in net.buses])
    bs = np.array([bus.shunt_b for bus in net.buses])

    thermal_arcs = [(k, side) for side in (False, True) for k in range(m) if math.isfinite(smax[k])]
    n_thermal = len(thermal_arcs)
    n_eq = 2 * nb + 4 * m
    n_ineq = n_thermal + 2 * m

    def arc_col(block: str, to_side: bool, k: np.ndarray) -> np.ndarray:
        start = lay.p if block == "p" else lay.q
        return start + k + (m if to_side else 0)

    ks = np.arange(m)
    arc_bus = np.concatenate([fi, ti])

    def flows(x: np.ndarray):
        va, vm = x[lay.va : lay.va + nb], x[lay.vm : lay.vm + nb]
        vi, vj = vm[fi], vm[ti]
        delta = va[fi] - va[ti] - phi
        cos_d, sin_d = np.cos(delta), np.sin(delta)
        out = []
        for block, to_side, ai, aj, alpha, beta in kinds:
            c = alpha * cos_d + beta * sin_d
            dc = -alpha * sin_d + beta * cos_d
            f = ai * vi * vi + aj * vj * vj + kinv * vi * vj * c
            out.append((block, to_side, ai, aj, c, dc, f))
        return vi, vj, out

    def objective_fn(x: np.ndarray):
        pg = x[lay.pg : lay.pg + ng]
        grad = np.zeros(lay.n)
        diag = np.zeros(lay.n)
        if objective == "loss":
            f = float(base * pg.sum())
            grad[lay.pg : lay.pg + ng] = base
        else:
            pmw = base * pg
            f = float(np.sum(c2 * pmw * pmw + c1 * pmw + c0))
            grad[lay.pg : lay.pg + ng] = 2.0 * c2 * base * pmw + c1 * base
            diag[lay.pg : lay.pg + ng] = 2.0 * c2 * base * base
        return f, grad, sp.diags(diag).tocsr()

    def constraints_fn(x: np.ndarray):
        vm = x[lay.vm : lay.vm + nb]
        pg, qg = x[lay.pg : lay.pg + ng], x[lay.qg : lay.qg + ng]
        parc, qarc = x[lay.p : lay.p + 2 * m], x[lay.q : lay.q + 2 * m]

        gvec = np.empty(n_eq)
        gvec[:nb] = np.bincount(gen_bus, pg, nb) - pd - gs * vm * vm - np.bincount(arc_bus, parc, nb)
        gvec[nb : 2 * nb] = np.bincount(gen_bus, qg, nb) - qd + bs * vm * vm - np.bincount(arc_bus, qarc, nb)

        rows, cols, vals = [], [], []

        def put(r, c, v):
            rows.append(np.broadcast_to(r, np.shape(v)).ravel())
            cols.append(np.broadcast_to(c, np.shape(v)).ravel())
            vals.append(np.ravel(v))

        gen_rows = np.arange(ng)
        put(gen_bus[gen_rows], lay.pg + gen_rows, np.ones(ng))
        put(nb + gen_bus[gen_rows], lay.qg + gen_rows, np.ones(ng))
        put(np.arange(nb), lay.vm + np.arange(nb), -2.0 * gs * vm)
        put(nb + np.arange(nb), lay.vm + np.arange(nb), 2.0 * bs * vm)
        arcs = np.arange(2 * m)
        put(arc_bus, lay.p + arcs, -np.ones(2 * m))
        put(nb + arc_bus, lay.q + arcs, -np.ones(2 * m))

        vi, vj, evaluated = flows(x)
        for r, (block, to_side, ai, aj, c, dc, f) in enumerate(evaluated):
            row0 = 2 * nb + r * m
            cols_arc = arc_col(block, to_side, ks)
            gvec[row0 : row0 + m] = x[cols_arc] - f
            rr = row0 + ks
            vv = kinv * vi * vj
            put(rr, cols_arc, np.ones(m))
            put(rr, lay.va + fi, -vv * dc)
            put(rr, lay.va + ti, vv * dc)
            put(rr, lay.vm + fi, -(2.0 * ai * vi + kinv * vj * c))
            put(rr, lay.vm + ti, -(2.0 * aj * vj + kinv * vi * c))

        dg = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n_eq, lay.n)
        )

        hvec = np.empty(n_ineq)
        hr, hc, hv = [], [], []
        for r, (k, to_side) in enumerate(thermal_arcs):
            pc, qc = arc_col("p", to_side, k), arc_col("q", to_side, k)
            hvec[r] = x[pc] ** 2 + x[qc] ** 2 - smax[k] ** 2
            hr += [r, r]
            hc += [int(pc), int(qc)]
            hv += [2.0 * x[pc], 2.0 * x[qc]]
        va = x[lay.va : lay.va + nb]
        delta = va[fi] - va[ti] - phi
        base_row = n_thermal
        hvec[base_row : base_row + m] = delta - dmax
        hvec[base_row + m : base_row + 2 * m] = -delta - dmax
        for k in range(m):
            for sign, row in ((1.0, base_row + k), (-1.0, base_row + m + k)):
                hr += [row, row]
                hc += [lay.va + int(fi[k]), lay.va + int(ti[k])]
                hv += [sign, -sign]
        dh = sp.csr_matrix((hv, (hr, hc)), shape=(n_ineq, lay.n))
        return gvec, dg, hvec, dh

    def hessian_fn(x: np.ndarray, lam: np.ndarray, mu: np.ndarray):
        rows, cols, vals = [], [], []

        def put(r, c, v):
            rows.append(np.ravel(r))
            cols.append(np.ravel(c))
            vals.append(np.ravel(v))

        def sym(r, c, v):
            put(r, c, v)
            put(c, r, v)

        vm_cols = lay.vm + np.arange(nb)
        put(vm_cols, vm_cols, -2.0 * gs * lam[:nb] + 2.0 * bs * lam[nb : 2 * nb])

        vi, vj, evaluated = flows(x)
        ti_c, tj_c = lay.va + fi, lay.va + ti
        vi_c, vj_c = lay.vm + fi, lay.vm + ti
        for r, (block, to_side, ai, aj, c, dc, f) in enumerate(evaluated):
            # constraint is arc - f, so the Hessian is -lam * d2f
            w = -lam[2 * nb + r * m : 2 * nb + (r + 1) * m]
            vv = kinv * vi * vj
            put(ti_c, ti_c, w * -vv * c)
            put(tj_c, tj_c, w * -vv * c)
            sym(ti_c, tj_c, w * vv * c)
            sym(ti_c, vi_c, w * kinv * vj * dc)
            sym(ti_c, vj_c, w * kinv * vi * dc)
            sym(tj_c, vi_c, w * -kinv * vj * dc)
            sym(tj_c, vj_c, w * -kinv * vi * dc)
            put(vi_c, vi_c, w * 2.0 * ai)
            put(vj_c, vj_c, w * 2.0 * aj)
            sym(vi_c, vj_c, w * kinv * c)

        for r, (k, to_side) in enumerate(thermal_arcs):
            pc, qc = arc_col("p", to_side, k), arc_col("q", to_side, k)
            put(np.array([pc, qc]), np.array([pc, qc]), np.array([2.0 * mu[r], 2.0 * mu[r]]))

        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(lay.n, lay.n)
        )

    names = (
        [f"va[{bus.id}]" for bus in net.buses]
        + [f"v[{bus.id}]" for bus in net.buses]
        + [f"pg[{k}]" for k in range(ng)]
        + [f"qg[{k}]" for k in range(ng)]
        + [f"p[{k},{s}]" for s in ARC_SIDES for k in range(m)]
        + [f"q[{k},{s}]" for s in ARC_SIDES for k in range(m)]
    )

    lb = np.full(lay.n, -np.inf)
    ub = np.full(lay.n, np.inf)
    ref = idx[net.reference_bus]
    lb[lay.va + ref] = ub[lay.va + ref] = 0.0
    lb[lay.vm : lay.vm + nb] = [bus.v_min for bus in net.buses]
    ub[lay.vm : lay.vm + nb] = [bus.v_max for bus in net.buses]
    lb[lay.pg : lay.pg + ng] = [gen.p_min for gen in net.generators]
    ub[lay.pg : lay.pg + ng] = [gen.p_max for gen in net.generators]
    lb[lay.qg : lay.qg + ng] = [gen.q_min for gen in net.generators]
    ub[lay.qg : lay.qg + ng] = [gen.q_max for gen in net.generators]
    lb[lay.p : lay.p + 2 * m] = np.concatenate([-smax, -smax])
    ub[lay.p : lay.p + 2 * m] = np.concatenate([smax, smax])
    lb[lay.q : lay.q + 2 * m] = np.concatenate([-smax, -smax])
    ub[lay.q : lay.q + 2 * m] = np.concatenate([smax, smax])

    prog = NlpProgram(
        name=f"{net.name}/AC",
        names=names,
        lb=lb,
        ub=ub,
        x0=np.zeros(lay.n),
        objective=objective_fn,
        constraints=constraints_fn,
        hessian=hessian_fn,
        eq_groups=[
            ("kcl_p", slice(0, nb)),
            ("kcl_q", slice(nb, 2 * nb)),
            ("flow_p", slice(2 * nb, 2 * nb + 2 * m)),
            ("flow_q", slice(2 * nb + 2 * m, 2 * nb + 4 * m)),
        ],
        ineq_groups=[("thermal", slice(0, n_thermal)), ("pad", slice(n_thermal, n_ineq))],
        meta={"kind": "ac", "objective": objective, "network": net, "layout": lay},
    )
    prog.x0 = flat_start(prog, net)
    logger.debug("built %s: %d variables, %d equalities, %d inequalities", prog.name, lay.n, n_eq, n_ineq)
    return prog


def ac_flows(prog: NlpProgram, x: np.ndarray) -> np.ndarray:
    """Arc flows implied by the voltages in x, in variable order (p then q)."""
    lay: AcLayout = prog.meta["layout"]  # type: ignore[assignment]
    g, _, _, _ = prog.constraints(x)
    n_bus, m = lay.n_bus, lay.n_branch
    flow_rows = g[2 * n_bus : 2 * n_bus + 4 * m]
    arcs = np.concatenate([x[lay.p : lay.p + 2 * m], x[lay.q : lay.q + 2 * m]])
    return arcs - flow_rows


def flat_start(prog: NlpProgram, net: Network) -> np.ndarray:
    """v = 1, angles 0, load shared evenly over dispatchable units, flows consistent."""
    lay: AcLayout = prog.meta["layout"]  # type: ignore[assignment]
    x = np.zeros(lay.n)
    for k, bus in enumerate(net.buses):
        x[lay.vm + k] = _clip(1.0, bus.v_min, bus.v_max)
    units = [k for k, gen in enumerate(net.generators) if gen.p_max > gen.p_min]
    total = sum(bus.p_load for bus in net.buses)
    total_q = sum(bus.q_load for bus in net.buses)
    share = total / len(units) if units else 0.0
    share_q = total_q / len(units) if units else 0.0
    for k, gen in enumerate(net.generators):
        p = share if k in units else gen.p_min
        q = share_q if k in units else 0.0
        x[lay.pg + k] = _clip(p, gen.p_min, gen.p_max)
        x[lay.qg + k] = _clip(q, gen.q_min, gen.q_max)
    return with_consistent_flows(prog, x)


def with_consistent_flows(prog: NlpProgram, x: np.ndarray) -> np.ndarray:
    lay: AcLayout = prog.meta["layout"]  # type: ignore[assignment]
    x = x.copy()
    m = lay.n_branch
    flows = ac_flows(prog, x)
    x[lay.p : lay.p + 2 * m] = flows[: 2 * m]
    x[lay.q : lay.q + 2 * m] = flows[2 * m :]
    return x


def ac_point_to_w(net: Network, vm: np.ndarray, va: np.ndarray) -> Dict[str, float]:
    """W-space values of a polar voltage profile (W_ij = V_i conj(V_j))."""
    idx = net.bus_index
    volts = vm * np.exp(1j * va)
    out: Dict[str, float] = {}
    for bus in net.buses:
        out[f"w[{bus.id}]"] = float(abs(volts[idx[bus.id]]) ** 2)
    for k, br in enumerate(net.branches):
        w = volts[idx[br.from_bus]] * np.conj(volts[idx[br.to_bus]])
        out[f"wr[{k}]"] = float(w.real)
        out[f"wi[{k}]"] = float(w.imag)
    return out
