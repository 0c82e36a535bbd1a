"""Grid-based reference solvers for Stokes and Stokes-Brinkman flow."""

from dualperm.solvers.grid import FlowState, Grid, sample_state
from dualperm.solvers.stokes import (
    FlowProblem,
    build_brinkman_problem,
    build_micro_problem,
    residual_report,
    solve_stokes_brinkman,
    solve_stokes_micro,
)
from dualperm.solvers.export import export_flow_state, load_flow_state

__all__ = [
    "FlowState",
    "Grid",
    "sample_state",
    "FlowProblem",
    "build_brinkman_problem",
    "build_micro_problem",
    "residual_report",
    "solve_stokes_brinkman",
    "solve_stokes_micro",
    "export_flow_state",
    "load_flow_state",
]
