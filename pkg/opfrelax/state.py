from __future__ import annotations

from typing import List, Optional

from typing_extensions import TypedDict

from .analysis import AcRecovery
from .config import SolverConfig
from .network import Network
from .program import Solution
from .report import GapReport, RelaxationResult


class SolveState(TypedDict, total=False):
    # inputs
    case_spec: str
    relaxations: List[str]
    variant: str  # 'W' | 'C'
    objective: str  # 'cost' | 'loss'
    cfg: SolverConfig
    sdp_bound: Optional[float]
    min_soc_gap: Optional[float]

    # loading
    case_name: str
    network: Network
    load_error: str

    # solves
    results: List[Optional[RelaxationResult]]
    recoveries: List[Optional[AcRecovery]]
    ac_solution: Solution

    # output
    report: GapReport
    skipped: bool
