"""
Export of the SDP relaxation in SDPA sparse format.

SDPA reads

    minimize    c'x
    subject to  sum_i F_i x_i - F_0 >= 0   (positive semidefinite)

so constant parts of a block are written into F_0 with flipped sign. Only the
upper triangle of each symmetric block is listed, indices are 1-based, and a
negative block size marks a diagonal (LP) block.

Block layout for a network with n buses:
    1                  2n x 2n real embedding [[Re W, -Im W], [Im W, Re W]]
    then per finite thermal limit and arc, a 3x3 block [[s, p, q], [p, s, 0], [q, 0, s]]
    then per generator with c2 > 0, a 2x2 cost epigraph [[1, a], [a, t - c1 P]]
    last               LP block: bounds, KCL (as two inequalities) and PAD rows
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

from .errors import CaseParseError
from .formulations import BranchTerms, branch_flow_exprs, rotate
from .network import Network, require_valid
from .program import LinExpr

logger = logging.getLogger(__name__)

Entry = Tuple[int, int, int, int, float]


@dataclass
class SdpExport:
    block_sizes: List[int]
    objective: List[float]
    entries: List[Entry]
    var_names: List[str] = field(default_factory=list)
    offset: float = 0.0
    name: str = "sdp"

    @property
    def n_vars(self) -> int:
        return len(self.objective)

    def text(self) -> str:
        lines = [f"* opfrelax SDP relaxation of {self.name}", f"* objective offset {self.offset!r}"]
        lines.append(f"{self.n_vars} = mDIM")
        lines.append(f"{len(self.block_sizes)} = nBLOCK")
        lines.append(" ".join(str(s) for s in self.block_sizes) + " = bLOCKsTRUCT")
        lines.append(" ".join(_num(c) for c in self.objective))
        for mat, blk, i, j, value in self.entries:
            lines.append(f"{mat} {blk} {i} {j} {_num(value)}")
        return "\n".join(lines) + "\n"

    def checksum(self) -> str:
        return hashlib.sha256(self.text().encode()).hexdigest()

    def summary(self) -> Dict[str, object]:
        psd = [s for s in self.block_sizes if s > 0]
        lp = sum(-s for s in self.block_sizes if s < 0)
        return {"variables": self.n_vars, "psd_blocks": psd, "lp_rows": lp, "entries": len(self.entries)}


def _num(value: float) -> str:
    return "%.17g" % value


class _Builder:
    def __init__(self) -> None:
        self.names: List[str] = []
        self.index: Dict[str, int] = {}
        self.blocks: List[int] = []
        self.entries: Dict[Tuple[int, int, int, int], float] = {}

    def var(self, name: str) -> int:
        if name not in self.index:
            self.index[name] = len(self.names) + 1
            self.names.append(name)
        return self.index[name]

    def x(self, name: str, coef: float = 1.0) -> LinExpr:
        return LinExpr.of(self.var(name), coef)

    def new_block(self, size: int) -> int:
        self.blocks.append(size)
        return len(self.blocks)

    def put(self, blk: int, i: int, j: int, expr: LinExpr) -> None:
        """Place an affine expression at (i, j) of block `blk` (1-based, i <= j)."""
        if i > j:
            i, j = j, i
        for var, coef in expr.terms.items():
            self._add((var, blk, i, j), coef)
        if expr.const != 0.0:
            self._add((0, blk, i, j), -expr.const)

    def _add(self, key: Tuple[int, int, int, int], value: float) -> None:
        total = self.entries.get(key, 0.0) + value
        if total == 0.0:
            self.entries.pop(key, None)
        else:
            self.entries[key] = total

    def sorted_entries(self) -> List[Entry]:
        return [(m, b, i, j, v) for (m, b, i, j), v in sorted(self.entries.items())]


def export_sdp(net: Network, path: str | Path | None = None, objective: str = "cost") -> SdpExport:
    """Build the SDPA export of the SDP relaxation; write it when `path` is given."""
    require_valid(net)
    if objective not in ("cost", "loss"):
        raise ValueError(f"unknown objective {objective!r}")
    n = net.n_bus
    idx = net.bus_index
    base = net.base_mva
    sdp = _Builder()

    for bus in net.buses:
        sdp.var(f"w[{bus.id}]")
    for a in range(n):
        for b in range(a + 1, n):
            ia, ib = net.buses[a].id, net.buses[b].id
            sdp.var(f"wr[{ia},{ib}]")
            sdp.var(f"wi[{ia},{ib}]")
    for g in range(net.n_gen):
        sdp.var(f"pg[{g}]")
        sdp.var(f"qg[{g}]")

    psd = sdp.new_block(2 * n)
    for a, bus in enumerate(net.buses):
        w = sdp.x(f"w[{bus.id}]")
        sdp.put(psd, a + 1, a + 1, w)
        sdp.put(psd, n + a + 1, n + a + 1, w)
        for b in range(a + 1, n):
            other = net.buses[b].id
            re = sdp.x(f"wr[{bus.id},{other}]")
            im = sdp.x(f"wi[{bus.id},{other}]")
            sdp.put(psd, a + 1, b + 1, re)
            sdp.put(psd, n + a + 1, n + b + 1, re)
            sdp.put(psd, a + 1, n + b + 1, -im)
            sdp.put(psd, b + 1, n + a + 1, im)

    def pair(i_id: int, j_id: int) -> Tuple[LinExpr, LinExpr]:
        if idx[i_id] < idx[j_id]:
            return sdp.x(f"wr[{i_id},{j_id}]"), sdp.x(f"wi[{i_id},{j_id}]")
        return sdp.x(f"wr[{j_id},{i_id}]"), sdp.x(f"wi[{j_id},{i_id}]", -1.0)

    flows: List[Dict[str, LinExpr]] = []
    for br in net.branches:
        wr, wi = pair(br.from_bus, br.to_bus)
        flows.append(
            branch_flow_exprs(BranchTerms.of(br), sdp.x(f"w[{br.from_bus}]"), sdp.x(f"w[{br.to_bus}]"), wr, wi)
        )

    for k, br in enumerate(net.branches):
        if not math.isfinite(br.s_max):
            continue
        for side in ("f", "t"):
            blk = sdp.new_block(3)
            s = LinExpr(const=br.s_max)
            for d in (1, 2, 3):
                sdp.put(blk, d, d, s)
            sdp.put(blk, 1, 2, flows[k][f"p,{side}"])
            sdp.put(blk, 1, 3, flows[k][f"q,{side}"])

    cost: Dict[int, float] = {}
    offset = 0.0
    for g, gen in enumerate(net.generators):
        pg = sdp.var(f"pg[{g}]")
        if objective == "loss":
            cost[pg] = cost.get(pg, 0.0) + base
            continue
        offset += gen.c0
        if gen.c2 > 0.0:
            t = sdp.var(f"t[{g}]")
            blk = sdp.new_block(2)
            sdp.put(blk, 1, 1, LinExpr(const=1.0))
            sdp.put(blk, 1, 2, LinExpr.of(pg, math.sqrt(gen.c2) * base))
            sdp.put(blk, 2, 2, LinExpr.of(t) - LinExpr.of(pg, gen.c1 * base))
            cost[t] = 1.0
        elif gen.c1 != 0.0:
            cost[pg] = cost.get(pg, 0.0) + gen.c1 * base

    rows: List[LinExpr] = []

    def geq(expr: LinExpr) -> None:
        rows.append(expr)

    for bus in net.buses:
        w = sdp.x(f"w[{bus.id}]")
        geq(w - bus.v_min**2)
        geq(LinExpr(const=bus.v_max**2) - w)
    for g, gen in enumerate(net.generators):
        for kind, lo, hi in (("pg", gen.p_min, gen.p_max), ("qg", gen.q_min, gen.q_max)):
            x = sdp.x(f"{kind}[{g}]")
            if math.isfinite(lo):
                geq(x - lo)
            if math.isfinite(hi):
                geq(LinExpr(const=hi) - x)

    for bus in net.buses:
        p_bal = LinExpr(const=-bus.p_load) - sdp.x(f"w[{bus.id}]", bus.shunt_g)
        q_bal = LinExpr(const=-bus.q_load) + sdp.x(f"w[{bus.id}]", bus.shunt_b)
        for g in net.generators_at(bus.id):
            p_bal = p_bal + sdp.x(f"pg[{g}]")
            q_bal = q_bal + sdp.x(f"qg[{g}]")
        for k, br in enumerate(net.branches):
            for side, end in (("f", br.from_bus), ("t", br.to_bus)):
                if end == bus.id:
                    p_bal = p_bal - flows[k][f"p,{side}"]
                    q_bal = q_bal - flows[k][f"q,{side}"]
        for bal in (p_bal, q_bal):
            geq(bal)
            geq(-bal)

    for br in net.branches:
        wr, wi = pair(br.from_bus, br.to_bus)
        re, im = rotate(wr, wi, br.tap_shift)
        slope = math.tan(br.angle_max)
        geq(re * slope - im)
        geq(re * slope + im)

    lp = sdp.new_block(-len(rows))
    for r, expr in enumerate(rows, start=1):
        sdp.put(lp, r, r, expr)

    c = [cost.get(k + 1, 0.0) for k in range(len(sdp.names))]
    export = SdpExport(
        block_sizes=sdp.blocks,
        objective=c,
        entries=sdp.sorted_entries(),
        var_names=list(sdp.names),
        offset=offset,
        name=net.name,
    )
    if path is not None:
        Path(path).write_text(export.text())
        logger.info("wrote SDP export %s (%s)", path, export.summary())
    return export


def parse_sdpa(text: str) -> SdpExport:
    """Read SDPA sparse text (comments, `{}`, `()` and `,` separators tolerated)."""
    offset = 0.0
    name = "sdp"
    body: List[Tuple[int, str]] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line[0] in "*\"":
            if line.startswith("* objective offset"):
                offset = float(line.rsplit(" ", 1)[1])
            elif line.startswith("* opfrelax SDP relaxation of"):
                name = line.rsplit(" ", 1)[1]
            continue
        body.append((line_no, line.split("=")[0]))

    def tokens(pos: int) -> List[str]:
        line_no, line = body[pos]
        for ch in "{}(),":
            line = line.replace(ch, " ")
        return line.split()

    try:
        m = int(tokens(0)[0])
        n_blocks = int(tokens(1)[0])
        sizes = [int(s) for s in tokens(2)[:n_blocks]]
        c = [float(s) for s in tokens(3)[:m]]
        entries: List[Entry] = []
        for pos in range(4, len(body)):
            mat, blk, i, j, value = tokens(pos)[:5]
            entries.append((int(mat), int(blk), int(i), int(j), float(value)))
    except (IndexError, ValueError) as exc:
        raise CaseParseError(f"malformed SDPA text: {exc}") from None
    if len(c) != m or len(sizes) != n_blocks:
        raise CaseParseError("SDPA header does not match its data")
    return SdpExport(block_sizes=sizes, objective=c, entries=sorted(entries), offset=offset, name=name)
