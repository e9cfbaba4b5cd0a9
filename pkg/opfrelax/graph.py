from __future__ import annotations

from langgraph.graph import END, StateGraph

from .nodes import (
    after_load,
    apply_gap_filter,
    build_report,
    load_network,
    needs_filter,
    solve_ac,
    solve_relaxations,
)
from .state import SolveState


def build_graph():
    g = StateGraph(SolveState)
    g.add_node("load", load_network)
    g.add_node("relaxations", solve_relaxations)
    g.add_node("ac", solve_ac)
    g.add_node("report", build_report)
    g.add_node("filter", apply_gap_filter)

    g.set_entry_point("load")
    g.add_conditional_edges("load", after_load, {"ok": "relaxations", "error": END})
    # relaxations first so a warm AC start can use their voltages
    g.add_edge("relaxations", "ac")
    g.add_edge("ac", "report")
    g.add_conditional_edges("report", needs_filter, {"filter": "filter", "done": END})
    g.add_edge("filter", END)

    return g.compile()


def run_case(spec: str, **inputs) -> SolveState:
    """Run the solve pipeline for one case spec (`builtin:<name>` or a path)."""
    return build_graph().invoke({"case_spec": spec, **inputs})
