"""Residual certification of solutions and voltage profiles."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Tuple, Union

import numpy as np

from .formulations import AcLayout, build_ac, with_consistent_flows
from .network import Network
from .program import ConicProgram, NlpProgram, Solution

logger = logging.getLogger(__name__)

Program = Union[ConicProgram, NlpProgram]


@dataclass
class ResidualReport:
    name: str
    tol: float
    residuals: Dict[str, float] = field(default_factory=dict)

    @property
    def failed(self) -> List[str]:
        return [group for group, value in self.residuals.items() if not value <= self.tol]

    @property
    def passed(self) -> bool:
        return not self.failed

    @property
    def worst(self) -> Tuple[str, float]:
        if not self.residuals:
            return ("", 0.0)
        group = max(self.residuals, key=lambda k: self.residuals[k])
        return group, self.residuals[group]

    def as_dict(self) -> Dict[str, object]:
        return {"name": self.name, "tol": self.tol, "passed": self.passed, "residuals": dict(self.residuals)}


def certify_solution(prog: Program, sol: Union[Solution, np.ndarray], tol: float = 1e-6) -> ResidualReport:
    """Largest violation per constraint group of `prog` at the solution point."""
    x = sol.x if isinstance(sol, Solution) else np.asarray(sol, dtype=float)
    if x.shape != (prog.n_vars,):
        raise ValueError(f"point has shape {x.shape}, expected ({prog.n_vars},)")
    if not np.all(np.isfinite(x)):
        report = ResidualReport(prog.name, tol, {"bounds": float("inf")})
    else:
        report = ResidualReport(prog.name, tol, prog.residuals(x))
    if not report.passed:
        logger.info("%s: residual check failed on %s", prog.name, ", ".join(report.failed))
    return report


def ac_point(
    prog: NlpProgram, vm: np.ndarray, va: np.ndarray, pg: np.ndarray, qg: np.ndarray
) -> np.ndarray:
    """Assemble an AC variable vector with arc flows implied by the voltages."""
    lay: AcLayout = prog.meta["layout"]  # type: ignore[assignment]
    x = np.zeros(lay.n)
    x[lay.va : lay.va + lay.n_bus] = va
    x[lay.vm : lay.vm + lay.n_bus] = vm
    x[lay.pg : lay.pg + lay.n_gen] = pg
    x[lay.qg : lay.qg + lay.n_gen] = qg
    return with_consistent_flows(prog, x)


def certify_voltages(
    net: Network,
    vm: np.ndarray,
    va: np.ndarray,
    pg: np.ndarray,
    qg: np.ndarray,
    tol: float = 1e-6,
    prog: NlpProgram | None = None,
) -> ResidualReport:
    """Check a polar operating point against the AC power-flow equations and limits."""
    prog = prog or build_ac(net)
    x = ac_point(prog, np.asarray(vm, float), np.asarray(va, float), np.asarray(pg, float), np.asarray(qg, float))
    return certify_solution(prog, x, tol)
