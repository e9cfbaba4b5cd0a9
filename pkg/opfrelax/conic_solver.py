"""
Primal-dual interior-point method for convex quadratic cone programs.

The program is compiled to

    minimize    1/2 x'Px + c'x
    subject to  Gx + s = h,  Ax = b,  s in K

with K a product of a nonnegative orthant and second-order cones. Steps use
Nesterov-Todd scaling and Mehrotra's predictor-corrector; each Newton
system is the quasi-definite KKT matrix [[P, A', G'], [A, 0, 0], [G, 0, -W'W]].
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
import scipy.sparse as sp

from .config import SolverConfig
from .errors import SolverError
from .kkt import SpluSolver
from .program import ConicProgram, LinExpr, Solution, SolveStatus, quad_matrix

logger = logging.getLogger(__name__)

EIG_TOL = 1e-12


@dataclass
class ConeForm:
    n: int
    P: sp.csc_matrix
    c: np.ndarray
    const: float
    A: sp.csr_matrix
    b: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    n_l: int
    soc: List[int]
    obj_scale: float = 1.0
    row_scale_a: np.ndarray = field(default_factory=lambda: np.zeros(0))
    row_scale_g: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def m(self) -> int:
        return self.n_l + sum(self.soc)

    @property
    def degree(self) -> int:
        return self.n_l + len(self.soc)


class _Rows:
    """Accumulates sparse rows and right-hand sides."""

    def __init__(self) -> None:
        self.rows: List[int] = []
        self.cols: List[int] = []
        self.vals: List[float] = []
        self.rhs: List[float] = []

    def add(self, coefs: dict, rhs: float) -> None:
        r = len(self.rhs)
        for col, val in coefs.items():
            if val != 0.0:
                self.rows.append(r)
                self.cols.append(col)
                self.vals.append(val)
        self.rhs.append(rhs)

    def add_affine(self, expr: LinExpr, scale: float = 1.0) -> None:
        """Cone entry s = scale * expr(x), i.e. G row -scale*a and h = scale*const."""
        self.add({v: -scale * c for v, c in expr.terms.items()}, scale * expr.const)

    def matrix(self, n: int) -> Tuple[sp.csr_matrix, np.ndarray]:
        mat = sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=(len(self.rhs), n))
        return mat, np.asarray(self.rhs, dtype=float)

    def __len__(self) -> int:
        return len(self.rhs)


def compile_program(prog: ConicProgram) -> ConeForm:
    """Lower a `ConicProgram` to (P, c, A, b, G, h, K) and equilibrate it."""
    n = prog.n_vars

    support, q = quad_matrix(prog.objective_quad)
    p_rows, p_cols, p_vals = [], [], []
    for a, i in enumerate(support):
        for bb, j in enumerate(support):
            if q[a, bb] != 0.0:
                p_rows.append(i)
                p_cols.append(j)
                p_vals.append(2.0 * q[a, bb])
    P = sp.csc_matrix((p_vals, (p_rows, p_cols)), shape=(n, n))
    c = np.zeros(n)
    for var, coef in prog.objective_linear.terms.items():
        c[var] += coef

    eq, lin = _Rows(), _Rows()
    socs: List[_Rows] = []

    for k, (lo, hi) in enumerate(zip(prog.lb, prog.ub)):
        if lo == hi:
            eq.add({k: 1.0}, lo)
            continue
        if math.isfinite(hi):
            lin.add({k: 1.0}, hi)
        if math.isfinite(lo):
            lin.add({k: -1.0}, -lo)

    for row in prog.linear:
        if row.sense == "==":
            eq.add(row.expr.terms, row.rhs)
        elif row.sense == "<=":
            lin.add(row.expr.terms, row.rhs)
        else:
            lin.add({v: -c_ for v, c_ in row.expr.terms.items()}, -row.rhs)

    for row in prog.quadratic:
        sup, qm = quad_matrix(row.quad)
        lam, vec = np.linalg.eigh(qm)
        keep = lam > EIG_TOL * max(1.0, float(np.abs(lam).max(initial=0.0)))
        factor = (np.sqrt(lam[keep])[:, None] * vec[:, keep].T) if keep.any() else np.zeros((0, len(sup)))
        if factor.shape[0] == 0:
            lin.add(row.linear.terms, row.rhs)
            continue
        block = _Rows()
        if not row.linear.terms and row.rhs > 0.0:
            # ||F x|| <= sqrt(r)
            block.add({}, math.sqrt(row.rhs))
            for frow in factor:
                block.add({sup[a]: -v for a, v in enumerate(frow)}, 0.0)
        else:
            # ||(2Fx, t - 1)|| <= t + 1 with t = r - q'x
            block.add(row.linear.terms, row.rhs + 1.0)
            for frow in factor:
                block.add({sup[a]: -2.0 * v for a, v in enumerate(frow)}, 0.0)
            block.add(row.linear.terms, row.rhs - 1.0)
        socs.append(block)

    for cone in prog.cones:
        # ||(2z, u - w)|| <= u + w
        block = _Rows()
        block.add_affine(cone.u + cone.w)
        for part in cone.z:
            block.add_affine(part, 2.0)
        block.add_affine(cone.u - cone.w)
        socs.append(block)

    A, b = eq.matrix(n)
    G_lin, h_lin = lin.matrix(n)
    parts = [G_lin] + [blk.matrix(n)[0] for blk in socs]
    hs = [h_lin] + [blk.matrix(n)[1] for blk in socs]
    G = sp.vstack(parts, format="csr") if parts else sp.csr_matrix((0, n))
    h = np.concatenate(hs) if hs else np.zeros(0)

    form = ConeForm(
        n=n, P=P, c=c, const=prog.objective_linear.const, A=A, b=b, G=G, h=h,
        n_l=len(lin), soc=[len(blk) for blk in socs],
    )
    return equilibrate(form)


def _row_max(mat: sp.csr_matrix) -> np.ndarray:
    if mat.shape[0] == 0:
        return np.zeros(0)
    return np.asarray(abs(mat).max(axis=1).todense()).ravel()


def equilibrate(form: ConeForm) -> ConeForm:
    """Scale rows by their largest coefficient and the objective by its largest entry."""
    ra = _row_max(form.A)
    da = np.where(ra > 0.0, 1.0 / np.where(ra > 0.0, ra, 1.0), 1.0)
    rg = _row_max(form.G)
    dg = np.ones(form.m)
    head = rg[: form.n_l]
    dg[: form.n_l] = np.where(head > 0.0, 1.0 / np.where(head > 0.0, head, 1.0), 1.0)
    start = form.n_l
    for size in form.soc:
        biggest = float(rg[start : start + size].max(initial=0.0))
        dg[start : start + size] = 1.0 / biggest if biggest > 0.0 else 1.0
        start += size

    biggest_obj = max(1.0, float(np.abs(form.c).max(initial=0.0)), float(abs(form.P).max()) if form.P.nnz else 0.0)
    sigma = 1.0 / biggest_obj

    if form.A.shape[0]:
        form.A = (sp.diags(da) @ form.A).tocsr()
        form.b = da * form.b
    if form.m:
        form.G = (sp.diags(dg) @ form.G).tocsr()
        form.h = dg * form.h
    form.P = (form.P * sigma).tocsc()
    form.c = form.c * sigma
    form.obj_scale = sigma
    form.row_scale_a = da
    form.row_scale_g = dg
    return form


# ---------------------------------------------------------------------------
# cone algebra on the product K = R+^l x Q^q1 x ...


class Cone:
    def __init__(self, n_l: int, soc: List[int]) -> None:
        self.n_l = n_l
        self.soc = list(soc)
        self.blocks: List[slice] = []
        start = n_l
        for size in soc:
            self.blocks.append(slice(start, start + size))
            start += size
        self.m = start

    def identity(self) -> np.ndarray:
        e = np.zeros(self.m)
        e[: self.n_l] = 1.0
        for blk in self.blocks:
            e[blk.start] = 1.0
        return e

    def margin(self, u: np.ndarray) -> float:
        """Smallest 'eigenvalue' of u; positive iff u is interior."""
        vals = [float(u[: self.n_l].min())] if self.n_l else []
        for blk in self.blocks:
            x = u[blk]
            vals.append(float(x[0] - np.linalg.norm(x[1:])))
        return min(vals) if vals else math.inf

    def circ(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        out = np.empty(self.m)
        out[: self.n_l] = u[: self.n_l] * v[: self.n_l]
        for blk in self.blocks:
            a, b = u[blk], v[blk]
            out[blk.start] = a @ b
            out[blk.start + 1 : blk.stop] = a[0] * b[1:] + b[0] * a[1:]
        return out

    def inv_circ(self, lam: np.ndarray, u: np.ndarray) -> np.ndarray:
        """w with lam o w = u."""
        out = np.empty(self.m)
        out[: self.n_l] = u[: self.n_l] / lam[: self.n_l]
        for blk in self.blocks:
            l0, l1 = lam[blk.start], lam[blk.start + 1 : blk.stop]
            u0, u1 = u[blk.start], u[blk.start + 1 : blk.stop]
            det = l0 * l0 - l1 @ l1
            w0 = (l0 * u0 - l1 @ u1) / det
            out[blk.start] = w0
            out[blk.start + 1 : blk.stop] = (u1 - w0 * l1) / l0
        return out

    def max_step(self, u: np.ndarray, du: np.ndarray) -> float:
        """Largest alpha >= 0 keeping u + alpha du in the cone (u interior)."""
        alpha = math.inf
        if self.n_l:
            neg = du[: self.n_l] < 0.0
            if neg.any():
                alpha = float(np.min(-u[: self.n_l][neg] / du[: self.n_l][neg]))
        for blk in self.blocks:
            alpha = min(alpha, _soc_step(u[blk], du[blk]))
        return alpha


def _soc_step(x: np.ndarray, d: np.ndarray) -> float:
    a = d[0] * d[0] - d[1:] @ d[1:]
    b = 2.0 * (x[0] * d[0] - x[1:] @ d[1:])
    c = x[0] * x[0] - x[1:] @ x[1:]
    if c <= 0.0:
        return 0.0
    if abs(a) <= 1e-14 * max(1.0, abs(b), c):
        return -c / b if b < 0.0 else math.inf
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return math.inf
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    roots = [r for r in ((q / a) if a != 0.0 else math.inf, (c / q) if q != 0.0 else math.inf) if r > 0.0]
    return min(roots) if roots else math.inf


@dataclass
class NtScaling:
    """Nesterov-Todd scaling W with W z = W^{-1} s = lam."""

    cone: Cone
    d: np.ndarray
    blocks: List[Tuple[float, np.ndarray]]
    lam: np.ndarray

    @classmethod
    def compute(cls, cone: Cone, s: np.ndarray, z: np.ndarray) -> "NtScaling":
        d = np.sqrt(s[: cone.n_l] / z[: cone.n_l])
        blocks = []
        for blk in cone.blocks:
            sb, zb = s[blk], z[blk]
            s_norm = math.sqrt(max(sb[0] ** 2 - sb[1:] @ sb[1:], 0.0))
            z_norm = math.sqrt(max(zb[0] ** 2 - zb[1:] @ zb[1:], 0.0))
            if s_norm <= 0.0 or z_norm <= 0.0:
                raise SolverError("iterate left the cone interior")
            beta = math.sqrt(s_norm / z_norm)
            sn, zn = sb / s_norm, zb / z_norm
            gamma = math.sqrt(max((1.0 + sn @ zn) / 2.0, 0.0))
            jz = zn.copy()
            jz[1:] = -jz[1:]
            wbar = (sn + jz) / (2.0 * gamma)
            v = wbar.copy()
            v[0] += 1.0
            v /= math.sqrt(2.0 * (wbar[0] + 1.0))
            blocks.append((beta, v))
        scaling = cls(cone, d, blocks, np.zeros(cone.m))
        scaling.lam = scaling.apply(z)
        return scaling

    def _block(self, beta: float, v: np.ndarray, inverse: bool) -> np.ndarray:
        j = np.ones(len(v))
        j[1:] = -1.0
        if inverse:
            jv = j * v
            return (2.0 * np.outer(jv, jv) - np.diag(j)) / beta
        return beta * (2.0 * np.outer(v, v) - np.diag(j))

    def apply(self, u: np.ndarray, inverse: bool = False) -> np.ndarray:
        out = np.empty_like(u)
        nl = self.cone.n_l
        out[:nl] = u[:nl] / self.d if inverse else u[:nl] * self.d
        for blk, (beta, v) in zip(self.cone.blocks, self.blocks):
            out[blk] = self._block(beta, v, inverse) @ u[blk]
        return out

    def squared(self) -> sp.csc_matrix:
        mats = [sp.diags(self.d * self.d)] if self.cone.n_l else []
        for beta, v in self.blocks:
            w = self._block(beta, v, False)
            mats.append(sp.csr_matrix(w @ w))
        if not mats:
            return sp.csc_matrix((0, 0))
        return sp.block_diag(mats, format="csc")


# ---------------------------------------------------------------------------


def _kkt_matrix(form: ConeForm, w2: sp.spmatrix) -> sp.csc_matrix:
    p, m = form.A.shape[0], form.m
    top = [form.P]
    if p:
        top.append(form.A.T)
    if m:
        top.append(form.G.T)
    blocks = [top]
    if p:
        row = [form.A, sp.csr_matrix((p, p))]
        if m:
            row.append(sp.csr_matrix((p, m)))
        blocks.append(row)
    if m:
        row = [form.G]
        if p:
            row.append(sp.csr_matrix((m, p)))
        row.append(-w2)
        blocks.append(row)
    return sp.bmat(blocks, format="csc")


def _signs(form: ConeForm) -> np.ndarray:
    return np.concatenate([np.ones(form.n), -np.ones(form.A.shape[0] + form.m)])


def solve_conic(prog: ConicProgram, cfg: SolverConfig | None = None) -> Solution:
    """Solve a `ConicProgram`; failures are reported through `Solution.status`."""
    cfg = cfg or SolverConfig()
    started = time.perf_counter()
    form = compile_program(prog)
    cone = Cone(form.n_l, form.soc)
    n, p, m = form.n, form.A.shape[0], form.m
    e = cone.identity()
    solver = SpluSolver(_signs(form), reg=cfg.kkt_reg)

    def split(sol: np.ndarray):
        return sol[:n], sol[n : n + p], sol[n + p :]

    try:
        solver.update(_kkt_matrix(form, sp.identity(m, format="csc")))
        x, _, u = split(solver.solve(np.concatenate([np.zeros(n), form.b, form.h])))
        s = -u
        _, y, z = split(solver.solve(np.concatenate([-form.c, np.zeros(p), np.zeros(m)])))
    except SolverError as exc:
        logger.warning("%s: initial point failed: %s", prog.name, exc)
        return _result(prog, form, np.zeros(n), None, None, SolveStatus.NUMERIC_WARNING, 0, started)

    for vec in (s, z):
        margin = cone.margin(vec) if m else 1.0
        vec += (1.0 + max(-margin, 0.0)) * e

    norm_b = max(1.0, float(np.linalg.norm(form.b)))
    norm_h = max(1.0, float(np.linalg.norm(form.h)))
    norm_c = max(1.0, float(np.linalg.norm(form.c)))

    best = (math.inf, x.copy(), y.copy(), z.copy())
    status = SolveStatus.ITERATION_LIMIT
    iteration = 0
    for iteration in range(cfg.max_iter + 1):
        rx = form.P @ x + form.c + form.A.T @ y + form.G.T @ z
        ry = form.A @ x - form.b
        rz = form.G @ x + s - form.h
        gap = float(s @ z)
        pcost = float(0.5 * x @ (form.P @ x) + form.c @ x)
        dcost = pcost + float(y @ ry + z @ rz) - gap
        pres = max(float(np.linalg.norm(ry)) / norm_b, float(np.linalg.norm(rz)) / norm_h)
        dres = float(np.linalg.norm(rx)) / norm_c
        relgap = gap / max(1.0, abs(pcost))
        logger.debug(
            "%s it %3d pcost % .8e dcost % .8e gap %.2e pres %.2e dres %.2e",
            prog.name, iteration, pcost, dcost, gap, pres, dres,
        )

        score = max(pres, dres, min(gap, relgap))
        if score < best[0]:
            best = (score, x.copy(), y.copy(), z.copy())

        if pres <= cfg.feas_tol and dres <= cfg.feas_tol and min(gap, relgap) <= cfg.gap_tol:
            status = SolveStatus.OPTIMAL
            break

        cert = -float(form.h @ z + form.b @ y)
        if cert > 0.0:
            farkas = float(np.linalg.norm(form.A.T @ y + form.G.T @ z)) / cert
            if farkas <= cfg.feas_tol:
                status = SolveStatus.INFEASIBLE
                break

        if iteration == cfg.max_iter:
            break

        try:
            scaling = NtScaling.compute(cone, s, z)
            solver.update(_kkt_matrix(form, scaling.squared()))
            lam = scaling.lam
            lam_sq = cone.circ(lam, lam)

            def newton(rc: np.ndarray):
                v = cone.inv_circ(lam, rc)
                rhs = np.concatenate([-rx, -ry, -rz - scaling.apply(v)])
                dx, dy, dz = split(solver.solve(rhs))
                ds = scaling.apply(v - scaling.apply(dz))
                return dx, dy, dz, ds

            dx, dy, dz, ds = newton(-lam_sq)
            alpha = min(1.0, cone.max_step(s, ds), cone.max_step(z, dz))
            mu = gap / max(form.degree, 1)
            sigma = float((s + alpha * ds) @ (z + alpha * dz)) / gap if gap > 0.0 else 0.0
            sigma = min(max(sigma, 0.0), 1.0) ** 3

            correction = cone.circ(scaling.apply(ds, inverse=True), scaling.apply(dz))
            dx, dy, dz, ds = newton(-lam_sq + sigma * mu * e - correction)
        except (SolverError, ValueError, FloatingPointError, ZeroDivisionError) as exc:
            logger.warning("%s: Newton step failed at iteration %d: %s", prog.name, iteration, exc)
            status = SolveStatus.NUMERIC_WARNING
            break

        alpha = min(1.0, cfg.step_fraction * min(cone.max_step(s, ds), cone.max_step(z, dz)))
        if not np.all(np.isfinite(dx)) or alpha < 1e-12:
            logger.warning("%s: step stalled at iteration %d (alpha=%.1e)", prog.name, iteration, alpha)
            status = SolveStatus.NUMERIC_WARNING
            break
        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        s = s + alpha * ds

    if status in (SolveStatus.ITERATION_LIMIT, SolveStatus.NUMERIC_WARNING):
        score, x, y, z = best
        if score <= cfg.warn_tol:
            status = SolveStatus.NUMERIC_WARNING
        logger.warning("%s: stopped with %s (best residual %.2e)", prog.name, status.value, score)
    return _result(prog, form, x, y, z, status, iteration, started)


def _result(
    prog: ConicProgram, form: ConeForm, x: np.ndarray, y, z, status: SolveStatus, iterations: int, started: float
) -> Solution:
    residuals = prog.residuals(x)
    primal = max(residuals.values()) if residuals else 0.0
    dual_res = math.nan
    dual_obj = None
    if y is not None and z is not None:
        sigma = form.obj_scale
        y_u = form.row_scale_a * y / sigma
        z_u = form.row_scale_g * z / sigma
        P = form.P / sigma
        c = form.c / sigma
        A = sp.diags(1.0 / form.row_scale_a) @ form.A if form.A.shape[0] else form.A
        G = sp.diags(1.0 / form.row_scale_g) @ form.G if form.G.shape[0] else form.G
        b = form.b / form.row_scale_a if form.A.shape[0] else form.b
        h = form.h / form.row_scale_g if form.G.shape[0] else form.h
        stationarity = P @ x + c + A.T @ y_u + G.T @ z_u
        dual_res = float(np.abs(stationarity).max(initial=0.0)) / max(1.0, float(np.abs(c).max(initial=0.0)))
        # Lagrangian dual value at (y, z): -1/2 x'Px - b'y - h'z, valid where stationarity holds
        dual_obj = float(-0.5 * x @ (P @ x) - b @ y_u - h @ z_u) + form.const
    objective = prog.objective(x)
    elapsed = time.perf_counter() - started
    logger.info(
        "%s: %s objective %.6f in %d iterations (%.3fs)", prog.name, status.value, objective, iterations, elapsed
    )
    return Solution(
        x=x,
        objective=objective,
        status=status,
        primal_residual=primal,
        dual_residual=dual_res,
        iterations=iterations,
        wall_time=elapsed,
        names=list(prog.names),
        dual_objective=dual_obj,
    )
