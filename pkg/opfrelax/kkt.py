"""Direct solvers for the Newton (KKT) systems of both interior-point methods."""

from __future__ import annotations

import logging
from typing import Protocol

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError

logger = logging.getLogger(__name__)


class LinearSolver(Protocol):
    def update(self, kkt: sp.spmatrix) -> None:
        """Factorize (or refactorize) the KKT matrix."""
        ...

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        ...


class SpluSolver:
    """
    Sparse LU with a fixed COLAMD ordering and static regularization.

    `signs` marks each KKT row as primal (+1) or dual (-1); the factorized
    matrix is K + reg * diag(signs), and solutions are refined against the
    unregularized K. When the factorization breaks down the regularization
    is raised by 100x, up to `max_retries` times.
    """

    def __init__(self, signs: np.ndarray, reg: float = 1e-9, refine: int = 3, max_retries: int = 4) -> None:
        self.signs = np.asarray(signs, dtype=float)
        self.reg = reg
        self.refine = refine
        self.max_retries = max_retries
        self.kkt: sp.csc_matrix | None = None
        self._lu = None
        self.used_reg = reg

    def update(self, kkt: sp.spmatrix) -> None:
        self.kkt = sp.csc_matrix(kkt)
        reg = self.reg
        last: Exception | None = None
        for _ in range(self.max_retries + 1):
            try:
                regularized = (self.kkt + sp.diags(reg * self.signs)).tocsc()
                self._lu = spla.splu(regularized, permc_spec="COLAMD")
                self.used_reg = reg
                if reg != self.reg:
                    logger.debug("KKT factorized with raised regularization %.1e", reg)
                return
            except RuntimeError as exc:
                last = exc
                reg *= 100.0
        raise SolverError(f"KKT factorization failed: {last}")

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._lu is None or self.kkt is None:
            raise SolverError("solve called before update")
        x = self._lu.solve(rhs)
        for _ in range(self.refine):
            residual = rhs - self.kkt @ x
            x = x + self._lu.solve(residual)
        if not np.all(np.isfinite(x)):
            raise SolverError("KKT solve produced non-finite values")
        return x


def solve_once(kkt: sp.spmatrix, rhs: np.ndarray, signs: np.ndarray, reg: float = 1e-9) -> np.ndarray:
    solver = SpluSolver(signs, reg=reg)
    solver.update(kkt)
    return solver.solve(rhs)
