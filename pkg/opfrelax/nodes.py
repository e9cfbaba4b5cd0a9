from __future__ import annotations

import logging

from .analysis import assemble_report, run_ac, run_relaxation, warm_start
from .case_io import load_case
from .config import SolverConfig
from .errors import OpfRelaxError
from .state import SolveState

logger = logging.getLogger(__name__)


def load_network(state: SolveState) -> SolveState:
    spec = state["case_spec"]
    try:
        name, net = load_case(spec)
    except FileNotFoundError:
        return {"load_error": f"case file not found: {spec}"}
    except (OSError, OpfRelaxError) as exc:
        return {"load_error": f"{spec}: {exc}"}
    logger.info("loaded %s: %d buses, %d branches", name, net.n_bus, net.n_branch)
    return {"case_name": name, "network": net}


def after_load(state: SolveState) -> str:
    return "error" if state.get("load_error") else "ok"


def solve_relaxations(state: SolveState) -> SolveState:
    net = state["network"]
    cfg = state.get("cfg") or SolverConfig()
    results, recoveries = [], []
    for name in state.get("relaxations", []):
        result, _, recovery = run_relaxation(
            net, name, state.get("variant", "W"), state.get("objective", "cost"), cfg
        )
        results.append(result)
        recoveries.append(recovery)
    return {"results": results, "recoveries": recoveries}


def solve_ac(state: SolveState) -> SolveState:
    cfg = state.get("cfg") or SolverConfig()
    # warm start from the first relaxation that produced voltages
    start = warm_start(state.get("recoveries", [])) if cfg.start == "warm" else None
    return {"ac_solution": run_ac(state["network"], state.get("objective", "cost"), cfg, start)}


def build_report(state: SolveState) -> SolveState:
    report = assemble_report(
        state.get("case_name", state["case_spec"]),
        state.get("ac_solution"),
        state.get("results", []),
        state.get("sdp_bound"),
    )
    return {"report": report}


def needs_filter(state: SolveState) -> str:
    return "filter" if state.get("min_soc_gap") is not None else "done"


def apply_gap_filter(state: SolveState) -> SolveState:
    # keep only cases where SOC leaves a gap above the threshold
    gap = state["report"].gap("soc")
    threshold = state["min_soc_gap"]
    skipped = gap is None or gap <= threshold
    if skipped:
        logger.info("%s: SOC gap %s not above %.3g%%, skipped", state.get("case_name"), gap, threshold)
    return {"skipped": skipped}
