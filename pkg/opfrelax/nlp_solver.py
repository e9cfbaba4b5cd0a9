"""
Local solver for the nonconvex AC program.

A primal-dual barrier Newton method on

    minimize f(x)  s.t.  g(x) = 0,  h(x) + z = 0,  z >= 0

with variable bounds folded into g (fixed variables) and h (finite bounds).
The barrier parameter follows gamma = sigma * z'mu / n_ineq. When the main
run does not converge, an l1 elastic restoration problem is solved from the
last iterate; a positive minimum violation means the AC program is locally
infeasible.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
import scipy.sparse as sp

from .config import SolverConfig
from .errors import SolverError
from .kkt import SpluSolver
from .program import NlpProgram, Solution, SolveStatus

logger = logging.getLogger(__name__)

ALPHA_MIN = 1e-8
GAMMA_LIMIT = 1e10
Z0 = 1.0
# elastic violation still counted as feasible after restoration
RESTORATION_TOL = 1e-5

ObjectiveFn = Callable[[np.ndarray], Tuple[float, np.ndarray, sp.spmatrix]]
ConstraintFn = Callable[[np.ndarray], Tuple[np.ndarray, sp.spmatrix, np.ndarray, sp.spmatrix]]
HessianFn = Callable[[np.ndarray, np.ndarray, np.ndarray], sp.spmatrix]


@dataclass
class BarrierResult:
    x: np.ndarray
    f: float
    converged: bool
    iterations: int
    reason: str
    feascond: float
    gradcond: float


def _bound_rows(lb: np.ndarray, ub: np.ndarray):
    n = len(lb)
    fixed = np.isfinite(lb) & np.isfinite(ub) & (lb == ub)
    upper = np.isfinite(ub) & ~fixed
    lower = np.isfinite(lb) & ~fixed
    eye = sp.identity(n, format="csr")
    a_eq = eye[np.flatnonzero(fixed)]
    b_eq = lb[fixed]
    a_in = sp.vstack([eye[np.flatnonzero(upper)], -eye[np.flatnonzero(lower)]], format="csr")
    b_in = np.concatenate([ub[upper], -lb[lower]])
    return a_eq, b_eq, a_in, b_in


def barrier_solve(
    objective: ObjectiveFn,
    constraints: ConstraintFn,
    hessian: HessianFn,
    x0: np.ndarray,
    lb: np.ndarray,
    ub: np.ndarray,
    cfg: SolverConfig,
    cost_mult: float = 1.0,
    label: str = "nlp",
) -> BarrierResult:
    """Run the barrier Newton iteration from x0; never raises on numerical trouble."""
    n = len(x0)
    a_eq, b_eq, a_in, b_in = _bound_rows(lb, ub)

    def evaluate(x: np.ndarray):
        f, df, _ = objective(x)
        gn, dgn, hn, dhn = constraints(x)
        g = np.concatenate([gn, a_eq @ x - b_eq])
        h = np.concatenate([hn, a_in @ x - b_in])
        dg = sp.vstack([sp.csr_matrix(dgn), a_eq], format="csr")
        dh = sp.vstack([sp.csr_matrix(dhn), a_in], format="csr")
        return f * cost_mult, df * cost_mult, g, dg, h, dh, len(gn), len(hn)

    x = np.array(x0, dtype=float)
    f, df, g, dg, h, dh, n_geq, n_hin = evaluate(x)
    neq, niq = len(g), len(h)

    gamma = 1.0
    lam = np.zeros(neq)
    z = np.full(niq, Z0)
    mu = np.full(niq, Z0)
    low = h < -Z0
    z[low] = -h[low]
    big = gamma / z > Z0
    mu[big] = gamma / z[big]
    e = np.ones(niq)
    signs = np.concatenate([np.ones(n), -np.ones(neq)])
    solver = SpluSolver(signs, reg=cfg.kkt_reg)

    def conditions(x, f, f0, g, h, lx, lam, mu, z):
        norm_x = float(np.linalg.norm(x, np.inf)) if n else 0.0
        maxh = float(h.max()) if niq else 0.0
        norm_g = float(np.linalg.norm(g, np.inf)) if neq else 0.0
        norm_z = float(np.linalg.norm(z, np.inf)) if niq else 0.0
        norm_lam = float(np.linalg.norm(lam, np.inf)) if neq else 0.0
        norm_mu = float(np.linalg.norm(mu, np.inf)) if niq else 0.0
        feascond = max(norm_g, maxh) / (1.0 + max(norm_x, norm_z))
        gradcond = float(np.linalg.norm(lx, np.inf)) / (1.0 + max(norm_lam, norm_mu))
        compcond = float(z @ mu) / (1.0 + norm_x)
        costcond = abs(f - f0) / (1.0 + abs(f0))
        return feascond, gradcond, compcond, costcond

    lx = df + dg.T @ lam + dh.T @ mu
    f0 = f
    feascond, gradcond, compcond, costcond = conditions(x, f, f0, g, h, lx, lam, mu, z)
    if feascond < cfg.feas_tol and gradcond < cfg.nlp_tol and compcond < cfg.nlp_tol:
        return BarrierResult(x, f / cost_mult, True, 0, "converged", feascond, gradcond)

    reason = "iteration limit"
    iteration = 0
    for iteration in range(1, cfg.max_iter + 1):
        _, _, d2f = objective(x)
        lxx = cost_mult * sp.csr_matrix(d2f) + sp.csr_matrix(hessian(x, lam[:n_geq], mu[:n_hin]))
        zinv = 1.0 / z
        dh_zinv = dh.T @ sp.diags(zinv)
        m_mat = lxx + dh_zinv @ sp.diags(mu) @ dh
        n_vec = lx + dh_zinv @ (mu * h + gamma * e)
        kkt = sp.bmat([[m_mat, dg.T], [dg, None]], format="csc") if neq else sp.csc_matrix(m_mat)
        try:
            solver.signs = signs if neq else np.ones(n)
            solver.update(kkt)
            step = solver.solve(np.concatenate([-n_vec, -g]))
        except SolverError as exc:
            reason = f"singular Newton system ({exc})"
            break
        dx, dlam = step[:n], step[n:]
        dz = -h - z - dh @ dx
        dmu = -mu + zinv * (gamma * e - mu * dz)

        neg = dz < 0.0
        alpha_p = min(cfg.step_fraction * float(np.min(z[neg] / -dz[neg])), 1.0) if neg.any() else 1.0
        neg = dmu < 0.0
        alpha_d = min(cfg.step_fraction * float(np.min(mu[neg] / -dmu[neg])), 1.0) if neg.any() else 1.0

        x = x + alpha_p * dx
        z = z + alpha_p * dz
        lam = lam + alpha_d * dlam
        mu = mu + alpha_d * dmu
        if niq:
            gamma = cfg.barrier_reduction * float(z @ mu) / niq

        f, df, g, dg, h, dh, _, _ = evaluate(x)
        lx = df + dg.T @ lam + dh.T @ mu
        feascond, gradcond, compcond, costcond = conditions(x, f, f0, g, h, lx, lam, mu, z)
        logger.debug(
            "%s it %3d f % .8e feas %.2e grad %.2e comp %.2e cost %.2e",
            label, iteration, f / cost_mult, feascond, gradcond, compcond, costcond,
        )
        if (
            feascond < cfg.feas_tol
            and gradcond < cfg.nlp_tol
            and compcond < cfg.nlp_tol
            and costcond < cfg.nlp_tol
        ):
            return BarrierResult(x, f / cost_mult, True, iteration, "converged", feascond, gradcond)
        if not np.all(np.isfinite(x)) or not np.isfinite(f):
            reason = "non-finite iterate"
            break
        if alpha_p < ALPHA_MIN or alpha_d < ALPHA_MIN:
            reason = "step length collapsed"
            break
        if niq and (gamma < np.finfo(float).eps or gamma > GAMMA_LIMIT):
            reason = "barrier parameter out of range"
            break
        f0 = f

    return BarrierResult(x, f / cost_mult, False, iteration, reason, feascond, gradcond)


def _elastic_problem(prog: NlpProgram, n_eq: int, n_in: int):
    """l1 restoration: min sum(pe + ne + t) s.t. g(x) - pe + ne = 0, h(x) - t <= 0."""
    n = prog.n_vars
    n_el = 2 * n_eq + n_in

    def objective(xr: np.ndarray):
        grad = np.concatenate([np.zeros(n), np.ones(n_el)])
        return float(xr[n:].sum()), grad, sp.csr_matrix((n + n_el, n + n_el))

    def constraints(xr: np.ndarray):
        x = xr[:n]
        pe, ne, t = xr[n : n + n_eq], xr[n + n_eq : n + 2 * n_eq], xr[n + 2 * n_eq :]
        g, dg, h, dh = prog.constraints(x)
        eye_eq = sp.identity(n_eq, format="csr")
        eye_in = sp.identity(n_in, format="csr")
        dg_r = sp.hstack([dg, -eye_eq, eye_eq, sp.csr_matrix((n_eq, n_in))], format="csr")
        dh_r = sp.hstack([dh, sp.csr_matrix((n_in, 2 * n_eq)), -eye_in], format="csr")
        return g - pe + ne, dg_r, h - t, dh_r

    def hessian(xr: np.ndarray, lam: np.ndarray, mu: np.ndarray):
        inner = sp.csr_matrix(prog.hessian(xr[:n], lam, mu))
        return sp.block_diag([inner, sp.csr_matrix((n_el, n_el))], format="csr")

    lb = np.concatenate([prog.lb, np.zeros(n_el)])
    ub = np.concatenate([prog.ub, np.full(n_el, np.inf)])
    return objective, constraints, hessian, lb, ub


def restore(prog: NlpProgram, x: np.ndarray, cfg: SolverConfig) -> Tuple[np.ndarray, float, bool]:
    """Minimize the l1 constraint violation from x; returns (point, violation, converged)."""
    g, _, h, _ = prog.constraints(x)
    n_eq, n_in = len(g), len(h)
    objective, constraints, hessian, lb, ub = _elastic_problem(prog, n_eq, n_in)
    start = np.concatenate([np.clip(x, prog.lb, prog.ub), np.maximum(g, 0.0), np.maximum(-g, 0.0), np.maximum(h, 0.0)])
    result = barrier_solve(objective, constraints, hessian, start, lb, ub, cfg, label=f"{prog.name}/restore")
    logger.info("%s: restoration %s, violation %.3e", prog.name, result.reason, result.f)
    return result.x[: prog.n_vars], result.f, result.converged


def _solution(prog: NlpProgram, x: np.ndarray, status: SolveStatus, result: BarrierResult, iterations: int, started: float) -> Solution:
    f, _, _ = prog.objective(x)
    residuals = prog.residuals(x)
    return Solution(
        x=x,
        objective=float(f),
        status=status,
        primal_residual=max(residuals.values(), default=0.0),
        dual_residual=result.gradcond,
        iterations=iterations,
        wall_time=time.perf_counter() - started,
        names=list(prog.names),
    )


def solve_local_ac(prog: NlpProgram, start: np.ndarray | None = None, cfg: SolverConfig | None = None) -> Solution:
    """
    Find a locally optimal AC operating point.

    The result is a valid upper bound on the AC optimum whenever its status
    is "optimal"; on "restoration-failure" the program is locally infeasible.
    """
    cfg = cfg or SolverConfig()
    started = time.perf_counter()
    x0 = prog.x0 if start is None else np.asarray(start, dtype=float)
    if x0.shape != (prog.n_vars,):
        raise ValueError(f"start point has shape {x0.shape}, expected ({prog.n_vars},)")

    result = barrier_solve(
        prog.objective, prog.constraints, prog.hessian, x0, prog.lb, prog.ub, cfg,
        cost_mult=cfg.cost_scale, label=prog.name,
    )
    if result.converged:
        logger.info("%s: optimal %.6f after %d iterations", prog.name, result.f, result.iterations)
        return _solution(prog, result.x, SolveStatus.OPTIMAL, result, result.iterations, started)
    logger.info("%s: %s after %d iterations, trying restoration", prog.name, result.reason, result.iterations)

    restart = result.x if np.all(np.isfinite(result.x)) else x0
    restored, violation, restored_ok = restore(prog, restart, cfg)
    if not restored_ok or violation > RESTORATION_TOL or not np.all(np.isfinite(restored)):
        logger.warning("%s: restoration failed (violation %.3e)", prog.name, violation)
        return _solution(prog, result.x, SolveStatus.RESTORATION_FAILURE, result, result.iterations, started)

    retry = barrier_solve(
        prog.objective, prog.constraints, prog.hessian, restored, prog.lb, prog.ub, cfg,
        cost_mult=cfg.cost_scale, label=prog.name,
    )
    iterations = result.iterations + retry.iterations
    if retry.converged:
        status = SolveStatus.OPTIMAL
    elif retry.reason == "iteration limit":
        status = SolveStatus.ITERATION_LIMIT
    else:
        status = SolveStatus.NUMERIC_WARNING
    logger.info("%s: %s after restoration (%s)", prog.name, status.value, retry.reason)
    return _solution(prog, retry.x, status, retry, iterations, started)
