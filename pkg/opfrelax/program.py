"""
Solver-neutral optimization programs.

`ConicProgram` holds linear rows, convex quadratic rows and rotated second
order cones over named variables. `NlpProgram` holds callbacks for a smooth
nonconvex problem together with its derivative sparsity. Both keep a group
label on every constraint so residuals can be reported per constraint class.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import NonConvexError

logger = logging.getLogger(__name__)

SENSES = ("<=", ">=", "==")
PSD_TOL = 1e-10


@dataclass
class LinExpr:
    terms: Dict[int, float] = field(default_factory=dict)
    const: float = 0.0

    @classmethod
    def of(cls, var: int, coef: float = 1.0) -> "LinExpr":
        return cls({var: coef})

    def copy(self) -> "LinExpr":
        return LinExpr(dict(self.terms), self.const)

    def add(self, var: int, coef: float) -> "LinExpr":
        if coef != 0.0:
            self.terms[var] = self.terms.get(var, 0.0) + coef
        return self

    def __add__(self, other: "LinExpr | float") -> "LinExpr":
        out = self.copy()
        if isinstance(other, LinExpr):
            for var, coef in other.terms.items():
                out.add(var, coef)
            out.const += other.const
        else:
            out.const += float(other)
        return out

    __radd__ = __add__

    def __mul__(self, scale: float) -> "LinExpr":
        return LinExpr({v: c * scale for v, c in self.terms.items()}, self.const * scale)

    __rmul__ = __mul__

    def __neg__(self) -> "LinExpr":
        return self * -1.0

    def __sub__(self, other: "LinExpr | float") -> "LinExpr":
        return self + (-other if isinstance(other, LinExpr) else -float(other))

    def value(self, x: np.ndarray) -> float:
        return self.const + sum(coef * x[var] for var, coef in self.terms.items())


@dataclass
class LinearRow:
    expr: LinExpr
    sense: str
    rhs: float
    group: str


@dataclass
class QuadRow:
    """sum(coef * x_i * x_j) + linear(x) <= rhs, with a PSD quadratic part."""

    quad: List[Tuple[int, int, float]]
    linear: LinExpr
    rhs: float
    group: str


@dataclass
class RotatedCone:
    """||z||^2 <= u * w with u, w >= 0."""

    z: List[LinExpr]
    u: LinExpr
    w: LinExpr
    group: str


def quad_matrix(quad: Iterable[Tuple[int, int, float]]) -> Tuple[List[int], np.ndarray]:
    """Dense symmetric Q over the variables `quad` touches, so x'Qx = sum(c x_i x_j)."""
    quad = list(quad)
    support = sorted({i for i, _, _ in quad} | {j for _, j, _ in quad})
    pos = {v: k for k, v in enumerate(support)}
    q = np.zeros((len(support), len(support)))
    for i, j, coef in quad:
        a, b = pos[i], pos[j]
        if a == b:
            q[a, a] += coef
        else:
            q[a, b] += coef / 2.0
            q[b, a] += coef / 2.0
    return support, q


def quad_value(quad: Iterable[Tuple[int, int, float]], x: np.ndarray) -> float:
    return float(sum(coef * x[i] * x[j] for i, j, coef in quad))


def check_psd(quad: Iterable[Tuple[int, int, float]], what: str) -> None:
    support, q = quad_matrix(quad)
    if not support:
        return
    lowest = float(np.linalg.eigvalsh(q).min())
    if lowest < -PSD_TOL * max(1.0, float(np.abs(q).max())):
        raise NonConvexError(f"{what}: quadratic form is not PSD (min eigenvalue {lowest:.3e})")


@dataclass
class ConicProgram:
    name: str = "program"
    names: List[str] = field(default_factory=list)
    lb: List[float] = field(default_factory=list)
    ub: List[float] = field(default_factory=list)
    start: List[Optional[float]] = field(default_factory=list)
    linear: List[LinearRow] = field(default_factory=list)
    quadratic: List[QuadRow] = field(default_factory=list)
    cones: List[RotatedCone] = field(default_factory=list)
    objective_quad: List[Tuple[int, int, float]] = field(default_factory=list)
    objective_linear: LinExpr = field(default_factory=LinExpr)
    meta: Dict[str, object] = field(default_factory=dict)
    _index: Dict[str, int] = field(default_factory=dict, repr=False)

    # variables ---------------------------------------------------------
    def add_var(
        self, name: str, lb: float = -math.inf, ub: float = math.inf, start: Optional[float] = None
    ) -> int:
        if name in self._index:
            raise KeyError(f"duplicate variable {name!r}")
        self._index[name] = len(self.names)
        self.names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.start.append(start)
        return self._index[name]

    def var(self, name: str) -> int:
        return self._index[name]

    def has_var(self, name: str) -> bool:
        return name in self._index

    def x(self, name: str, coef: float = 1.0) -> LinExpr:
        return LinExpr.of(self._index[name], coef)

    @property
    def n_vars(self) -> int:
        return len(self.names)

    # constraints -------------------------------------------------------
    def add_linear(self, expr: LinExpr, sense: str, rhs: float, group: str) -> None:
        if sense not in SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        self.linear.append(LinearRow(LinExpr(dict(expr.terms)), sense, float(rhs) - expr.const, group))

    def add_quadratic(self, quad: List[Tuple[int, int, float]], linear: LinExpr, rhs: float, group: str) -> None:
        check_psd(quad, f"{group} row {len(self.quadratic)}")
        self.quadratic.append(QuadRow(list(quad), LinExpr(dict(linear.terms)), float(rhs) - linear.const, group))

    def add_square_le(self, parts: List[LinExpr], linear: LinExpr, rhs: float, group: str) -> None:
        """sum(part**2) + linear <= rhs, expanding each squared affine part."""
        quad: List[Tuple[int, int, float]] = []
        lin = linear.copy()
        for part in parts:
            items = sorted(part.terms.items())
            for a, (i, ci) in enumerate(items):
                quad.append((i, i, ci * ci))
                for j, cj in items[a + 1 :]:
                    quad.append((i, j, 2.0 * ci * cj))
                if part.const != 0.0:
                    lin.add(i, 2.0 * ci * part.const)
            lin.const += part.const * part.const
        self.add_quadratic(quad, lin, rhs, group)

    def add_rotated_cone(self, z: List[LinExpr], u: LinExpr, w: LinExpr, group: str) -> None:
        self.cones.append(RotatedCone([e.copy() for e in z], u.copy(), w.copy(), group))

    def set_objective(self, quad: List[Tuple[int, int, float]], linear: LinExpr) -> None:
        check_psd(quad, "objective")
        self.objective_quad = list(quad)
        self.objective_linear = linear.copy()

    # evaluation --------------------------------------------------------
    def objective(self, x: np.ndarray) -> float:
        return quad_value(self.objective_quad, x) + self.objective_linear.value(x)

    def starting_point(self) -> np.ndarray:
        x = np.zeros(self.n_vars)
        for k, (lo, hi, hint) in enumerate(zip(self.lb, self.ub, self.start)):
            if hint is not None:
                x[k] = hint
            elif math.isfinite(lo) and math.isfinite(hi):
                x[k] = 0.5 * (lo + hi)
            elif math.isfinite(lo):
                x[k] = max(lo, 0.0)
            elif math.isfinite(hi):
                x[k] = min(hi, 0.0)
        return x

    def residuals(self, x: np.ndarray) -> Dict[str, float]:
        """Largest violation per constraint group (0.0 when satisfied)."""
        out: Dict[str, float] = {}

        def record(group: str, amount: float) -> None:
            out[group] = max(out.get(group, 0.0), max(amount, 0.0))

        lb, ub = np.asarray(self.lb), np.asarray(self.ub)
        with np.errstate(invalid="ignore"):
            below = np.where(np.isfinite(lb), lb - x, 0.0)
            above = np.where(np.isfinite(ub), x - ub, 0.0)
        record("bounds", float(max(below.max(initial=0.0), above.max(initial=0.0))))

        for row in self.linear:
            gap = row.expr.value(x) - row.rhs
            record(row.group, gap if row.sense == "<=" else -gap if row.sense == ">=" else abs(gap))
        for row in self.quadratic:
            record(row.group, quad_value(row.quad, x) + row.linear.value(x) - row.rhs)
        for cone in self.cones:
            u, w = cone.u.value(x), cone.w.value(x)
            norm = math.sqrt(sum((2.0 * e.value(x)) ** 2 for e in cone.z) + (u - w) ** 2)
            record(cone.group, norm - (u + w))
        return out

    def groups(self) -> List[str]:
        seen: Dict[str, None] = {"bounds": None}
        for row in self.linear:
            seen.setdefault(row.group)
        for row in self.quadratic:
            seen.setdefault(row.group)
        for cone in self.cones:
            seen.setdefault(cone.group)
        return list(seen)

    def summary(self) -> Dict[str, int]:
        return {
            "variables": self.n_vars,
            "linear": len(self.linear),
            "equalities": sum(1 for r in self.linear if r.sense == "=="),
            "quadratic": len(self.quadratic),
            "cones": len(self.cones),
        }

    def values(self, x: np.ndarray, prefix: str) -> Dict[str, float]:
        """Values of every variable whose name starts with `prefix`."""
        return {name: float(x[k]) for name, k in self._index.items() if name.startswith(prefix)}


Evaluation = Tuple[np.ndarray, sp.csr_matrix]


@dataclass
class NlpProgram:
    """
    minimize f(x) s.t. g(x) = 0, h(x) <= 0, lb <= x <= ub.

    `objective(x)` returns (f, grad, hess); `constraints(x)` returns
    (g, dg, h, dh) with Jacobians shaped (rows, n); `hessian(x, lam, mu)`
    returns the constraint part of the Lagrangian Hessian.
    """

    name: str
    names: List[str]
    lb: np.ndarray
    ub: np.ndarray
    x0: np.ndarray
    objective: Callable[[np.ndarray], Tuple[float, np.ndarray, sp.spmatrix]]
    constraints: Callable[[np.ndarray], Tuple[np.ndarray, sp.spmatrix, np.ndarray, sp.spmatrix]]
    hessian: Callable[[np.ndarray, np.ndarray, np.ndarray], sp.spmatrix]
    eq_groups: List[Tuple[str, slice]] = field(default_factory=list)
    ineq_groups: List[Tuple[str, slice]] = field(default_factory=list)
    meta: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._index = {name: k for k, name in enumerate(self.names)}

    @property
    def n_vars(self) -> int:
        return len(self.names)

    def var(self, name: str) -> int:
        return self._index[name]

    def residuals(self, x: np.ndarray) -> Dict[str, float]:
        g, _, h, _ = self.constraints(x)
        out: Dict[str, float] = {}
        with np.errstate(invalid="ignore"):
            below = np.where(np.isfinite(self.lb), self.lb - x, 0.0)
            above = np.where(np.isfinite(self.ub), x - self.ub, 0.0)
        out["bounds"] = max(0.0, float(below.max(initial=0.0)), float(above.max(initial=0.0)))
        for group, rows in self.eq_groups:
            block = np.abs(g[rows])
            out[group] = max(out.get(group, 0.0), float(block.max(initial=0.0)))
        for group, rows in self.ineq_groups:
            block = h[rows]
            out[group] = max(out.get(group, 0.0), float(np.maximum(block, 0.0).max(initial=0.0)))
        return out

    def values(self, x: np.ndarray, names: Mapping[str, int] | None = None) -> Dict[str, float]:
        return {name: float(x[k]) for name, k in (names or self._index).items()}


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    ITERATION_LIMIT = "iteration-limit"
    NUMERIC_WARNING = "numeric-warning"
    INFEASIBLE = "infeasible-detected"
    RESTORATION_FAILURE = "restoration-failure"


@dataclass
class Solution:
    """Outcome of one solve; `objective` is in $/h (or MW for the loss objective)."""

    x: np.ndarray
    objective: float
    status: SolveStatus
    primal_residual: float
    dual_residual: float
    iterations: int
    wall_time: float
    names: List[str] = field(default_factory=list)
    dual_objective: Optional[float] = None

    @property
    def ok(self) -> bool:
        return self.status is SolveStatus.OPTIMAL

    @property
    def has_bound(self) -> bool:
        """Whether `objective` is usable as a bound (optimal or flagged as approximate)."""
        return self.status in (SolveStatus.OPTIMAL, SolveStatus.NUMERIC_WARNING)

    def value(self, name: str) -> float:
        return float(self.x[self.names.index(name)])

    def as_dict(self) -> Dict[str, float]:
        return {name: float(v) for name, v in zip(self.names, self.x)}
