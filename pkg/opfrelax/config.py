from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator

logger = logging.getLogger(__name__)


class SolverConfig(BaseModel):
    """Settings shared by the conic and the local AC interior-point solvers."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    feas_tol: float = Field(1e-8, gt=0.0)
    gap_tol: float = Field(1e-8, gt=0.0)
    # gradient/complementarity/cost tolerance of the local AC solver
    nlp_tol: float = Field(1e-6, gt=0.0)
    max_iter: int = Field(200, ge=1)
    step_fraction: float = Field(0.99, gt=0.0, lt=1.0)
    barrier_reduction: float = Field(0.1, gt=0.0, lt=1.0)
    start: Literal["flat", "warm"] = "flat"
    cost_scale: float = Field(1e-4, gt=0.0)
    kkt_reg: float = Field(1e-9, ge=0.0)
    # a stalled conic solve is accepted as "numeric-warning" below this
    warn_tol: float = Field(1e-5, gt=0.0)

    @field_validator("warn_tol")
    @classmethod
    def _warn_not_tighter(cls, value: float, info) -> float:
        feas = info.data.get("feas_tol", 1e-8)
        if value < feas:
            raise ValueError("warn_tol must not be tighter than feas_tol")
        return value

    def with_overrides(self, tol: float | None = None, max_iter: int | None = None) -> "SolverConfig":
        update = {}
        if tol is not None:
            update["feas_tol"] = tol
            update["gap_tol"] = tol
            update["warn_tol"] = max(self.warn_tol, tol)
        if max_iter is not None:
            update["max_iter"] = max_iter
        if not update:
            return self
        # model_copy skips validation; round-trip through the constructor.
        return SolverConfig(**{**self.model_dump(), **update})


@dataclass(frozen=True)
class Settings:
    threads: int
    log_level: str
    color: bool


def get_settings() -> Settings:
    """Environment-driven settings (read after `.env` has been loaded)."""
    raw_threads = os.getenv("OPFRELAX_THREADS", "")
    try:
        threads = int(raw_threads) if raw_threads else (os.cpu_count() or 1)
    except ValueError:
        logger.warning("ignoring non-integer OPFRELAX_THREADS=%r", raw_threads)
        threads = os.cpu_count() or 1
    return Settings(
        threads=max(1, threads),
        log_level=os.getenv("OPFRELAX_LOG_LEVEL", "WARNING").upper(),
        color=os.getenv("NO_COLOR") is None,
    )
