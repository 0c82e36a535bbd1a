"""
Stokes and Stokes-Brinkman Solvers.

Both problems are discretized with second-order finite differences on the MAC
grid of `dualperm.solvers.grid` and assembled into one sparse saddle-point
system

    [ A    G    0 ] [u]   [f]
    [ G^T  0    c ] [p] = [0]
    [ 0    c^T  0 ] [l]   [0]

where A is the viscous operator plus the drag term, G the pressure gradient,
G^T the negative divergence and c the gauge that sets the mean pressure over the
inlet and outlet cell columns to zero. Fibers are masked by Brinkman
penalization with a tiny permeability; porous tows carry mu K^-1.

The system is factorized once with SuperLU. Outer cycles apply iterative
refinement against the factorization and stop when the residuals meet
`linear_tolerance` and the permeability estimate changes by less than
`permeability_stop` between cycles.
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from dualperm.config.solver_schemas import SolverConfig
from dualperm.geometry.cells import MesoCell, MicroCell, signed_distance
from dualperm.solvers.grid import FlowState, Grid
from dualperm.utils.exceptions import CancellationError, SolverDivergedError
from dualperm.utils.logger import get_logger, log_performance

logger = get_logger(__name__)

BC_MODES = ("periodic_benchmark", "channel_test")


@dataclass(frozen=True)
class FlowProblem:
    """Assembled discrete problem.

    Attributes:
        grid: The MAC grid.
        matrix: Sparse system of size 3 n^2 + 1 (CSC).
        rhs: Right-hand side.
        body_force: Forcing vector f.
        mu: Viscosity used in the Darcy estimate.
        mode: "periodic_benchmark" or "channel_test".
        solid_u1: Penalized vertical faces (inside a fiber), shape (n, n).
        solid_u2: Penalized horizontal faces, shape (n, n).
    """

    grid: Grid
    matrix: sp.csc_matrix
    rhs: np.ndarray
    body_force: Tuple[float, float]
    mu: float
    mode: str
    solid_u1: np.ndarray
    solid_u2: np.ndarray

    @property
    def n_cells(self) -> int:
        return self.grid.n * self.grid.n

    def pack(self, state: FlowState) -> np.ndarray:
        return np.concatenate([state.u1.ravel(), state.u2.ravel(), state.p.ravel(), [0.0]])

    def unpack(self, x: np.ndarray) -> FlowState:
        n, N = self.grid.n, self.n_cells
        return FlowState(
            grid=self.grid,
            u1=x[:N].reshape(n, n),
            u2=x[N : 2 * N].reshape(n, n),
            p=x[2 * N : 3 * N].reshape(n, n),
        )

    def residuals(self, x: np.ndarray) -> Tuple[float, float]:
        """(max momentum residual, max divergence) of a packed state, gauge excluded."""
        N = self.n_cells
        x = x.copy()
        x[-1] = 0.0
        r = self.rhs - self.matrix @ x
        momentum = float(np.max(np.abs(r[: 2 * N])))
        divergence = float(np.max(np.abs(r[2 * N : 3 * N])))
        return momentum, divergence


def assemble_system(
    grid: Grid,
    viscosity: float,
    drag_x: np.ndarray,
    drag_y: np.ndarray,
    body_force: Tuple[float, float],
    mode: str = "periodic_benchmark",
) -> Tuple[sp.csc_matrix, np.ndarray]:
    """Assemble the saddle-point system.

    Args:
        grid: MAC grid.
        viscosity: Coefficient of the Laplacian (mu or mu_tilde).
        drag_x: Array (n, n, 2) of (D11, D12) at vertical faces.
        drag_y: Array (n, n, 2) of (D22, D21) at horizontal faces.
        body_force: Forcing vector.
        mode: "periodic_benchmark" wraps both directions; "channel_test" puts
            no-slip walls at x2 = 0 and x2 = 1 (quadratic ghost values for u1,
            pinned u2 on the wall row).

    Returns:
        (matrix, rhs).
    """
    if mode not in BC_MODES:
        raise ValueError(f"Unknown bc_mode '{mode}', expected one of {BC_MODES}")

    n, h = grid.n, grid.h
    N = n * n
    U1, U2, P, LAM = 0, N, 2 * N, 3 * N
    c = viscosity / h**2
    channel = mode == "channel_test"

    J, I = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    J, I = J.ravel(), I.ravel()

    def cell(j, i):
        return (j % n) * n + (i % n)

    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    vals: List[np.ndarray] = []

    def add(r, col, v):
        r, col, v = np.broadcast_arrays(r, col, np.asarray(v, dtype=float))
        keep = v != 0.0
        rows.append(r[keep])
        cols.append(col[keep])
        vals.append(v[keep])

    # x-momentum on vertical faces
    r = U1 + cell(J, I)
    wall_lo = channel & (J == 0)
    wall_hi = channel & (J == n - 1)
    d11 = drag_x[..., 0].ravel()
    d12 = drag_x[..., 1].ravel() / 4.0
    add(r, r, 4.0 * c + d11 + np.where(wall_lo | wall_hi, 2.0 * c, 0.0))
    add(r, U1 + cell(J, I + 1), -c)
    add(r, U1 + cell(J, I - 1), -c)
    add(r, U1 + cell(J + 1, I), np.where(wall_hi, 0.0, np.where(wall_lo, -4.0 * c / 3.0, -c)))
    add(r, U1 + cell(J - 1, I), np.where(wall_lo, 0.0, np.where(wall_hi, -4.0 * c / 3.0, -c)))
    add(r, P + cell(J, I), 1.0 / h)
    add(r, P + cell(J, I - 1), -1.0 / h)
    for dj, di in ((0, -1), (0, 0), (1, -1), (1, 0)):
        add(r, U2 + cell(J + dj, I + di), d12)

    # y-momentum on horizontal faces; the wall row is pinned in channel mode
    pinned = channel & (J == 0)
    free = ~pinned
    r = U2 + cell(J, I)
    add(r[pinned], r[pinned], 1.0)
    Jf, If, rf = J[free], I[free], r[free]
    d22 = drag_y[..., 0].ravel()[free]
    d21 = drag_y[..., 1].ravel()[free] / 4.0
    add(rf, rf, 4.0 * c + d22)
    add(rf, U2 + cell(Jf, If + 1), -c)
    add(rf, U2 + cell(Jf, If - 1), -c)
    add(rf, U2 + cell(Jf + 1, If), -c)
    add(rf, U2 + cell(Jf - 1, If), -c)
    add(rf, P + cell(Jf, If), 1.0 / h)
    add(rf, P + cell(Jf - 1, If), -1.0 / h)
    for dj, di in ((-1, 0), (-1, 1), (0, 0), (0, 1)):
        add(rf, U1 + cell(Jf + dj, If + di), d21)

    # Continuity rows hold -div u
    r = P + cell(J, I)
    add(r, U1 + cell(J, I), 1.0 / h)
    add(r, U1 + cell(J, I + 1), -1.0 / h)
    add(r, U2 + cell(J, I), 1.0 / h)
    add(r, U2 + cell(J + 1, I), -1.0 / h)

    # Gauge: mean pressure over the inlet and outlet columns is zero
    boundary = (I == 0) | (I == n - 1)
    w = 1.0 / (2.0 * n)
    add(r[boundary], LAM, w)
    add(LAM, P + cell(J[boundary], I[boundary]), w)

    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(3 * N + 1, 3 * N + 1),
    ).tocsc()

    rhs = np.zeros(3 * N + 1)
    rhs[U1 : U1 + N] = body_force[0]
    rhs[U2 : U2 + N] = np.where(pinned, 0.0, body_force[1])
    return matrix, rhs


def build_micro_problem(
    cell: MicroCell, grid: Grid, config: SolverConfig, bc_mode: str = "periodic_benchmark"
) -> FlowProblem:
    """Penalized Stokes problem on a fiber cell."""
    n = grid.n
    solid_u1 = (signed_distance(cell, grid.u1_points()) < 0.0).reshape(n, n)
    solid_u2 = (signed_distance(cell, grid.u2_points()) < 0.0).reshape(n, n)
    penalty = config.mu / config.penalization_permeability

    drag_x = np.zeros((n, n, 2))
    drag_y = np.zeros((n, n, 2))
    drag_x[..., 0] = np.where(solid_u1, penalty, 0.0)
    drag_y[..., 0] = np.where(solid_u2, penalty, 0.0)

    matrix, rhs = assemble_system(grid, config.mu, drag_x, drag_y, config.body_force, bc_mode)
    return FlowProblem(
        grid=grid,
        matrix=matrix,
        rhs=rhs,
        body_force=tuple(config.body_force),
        mu=config.mu,
        mode=bc_mode,
        solid_u1=solid_u1,
        solid_u2=solid_u2,
    )


def build_brinkman_problem(meso: MesoCell, grid: Grid, config: SolverConfig) -> FlowProblem:
    """Stokes-Brinkman problem with drag mu K^-1 in the porous box."""
    n = grid.n
    dx = meso.drag_at(grid.u1_points(), config.mu)
    dy = meso.drag_at(grid.u2_points(), config.mu)

    drag_x = np.stack([dx[:, 0, 0], dx[:, 0, 1]], axis=1).reshape(n, n, 2)
    drag_y = np.stack([dy[:, 1, 1], dy[:, 1, 0]], axis=1).reshape(n, n, 2)

    matrix, rhs = assemble_system(
        grid, config.mu_tilde, drag_x, drag_y, config.body_force, "periodic_benchmark"
    )
    none = np.zeros((n, n), dtype=bool)
    return FlowProblem(
        grid=grid,
        matrix=matrix,
        rhs=rhs,
        body_force=tuple(config.body_force),
        mu=config.mu,
        mode="periodic_benchmark",
        solid_u1=none,
        solid_u2=none,
    )


# ------------------------------
# Solution
# ------------------------------


def _permeability_estimate(problem: FlowProblem, state: FlowState) -> float:
    """Superficial velocity along f divided by |f|, times mu."""
    f = np.asarray(problem.body_force, dtype=float)
    f_norm = float(np.linalg.norm(f))
    mean_u = state.cell_velocity().reshape(2, -1).mean(axis=1)
    return problem.mu * float(mean_u @ (f / f_norm)) / f_norm


def solve_problem(
    problem: FlowProblem,
    config: SolverConfig,
    label: str = "stokes",
    cancellation_check: Optional[Callable[[], bool]] = None,
) -> FlowState:
    """Factorize once and run outer refinement cycles until converged.

    Raises:
        SolverDivergedError: If max_cycles pass without meeting the tolerances
            or the factorization fails.
        CancellationError: If cancellation_check returns True between cycles.
    """
    history: List[Tuple[float, float, float]] = []
    try:
        lu = splu(problem.matrix, permc_spec="COLAMD")
    except RuntimeError as e:
        raise SolverDivergedError(f"{label}: factorization failed: {e}", history) from e

    x = np.zeros_like(problem.rhs)
    previous_k: Optional[float] = None
    for cycle in range(1, config.max_cycles + 1):
        if cancellation_check and cancellation_check():
            raise CancellationError(f"{label} solve cancelled at cycle {cycle}")

        x = x + lu.solve(problem.rhs - problem.matrix @ x)
        if not np.all(np.isfinite(x)):
            raise SolverDivergedError(f"{label}: non-finite solution at cycle {cycle}", history)

        momentum, divergence = problem.residuals(x)
        k_estimate = _permeability_estimate(problem, problem.unpack(x))
        history.append((momentum, divergence, k_estimate))
        logger.info(
            "Outer cycle",
            extra={
                "extra_fields": {
                    "solver": label,
                    "cycle": cycle,
                    "momentum_residual": momentum,
                    "divergence": divergence,
                    "k_estimate": k_estimate,
                }
            },
        )

        settled = previous_k is not None and abs(k_estimate - previous_k) <= (
            config.permeability_stop * abs(k_estimate)
        )
        if settled and momentum <= config.linear_tolerance and divergence <= config.linear_tolerance:
            break
        previous_k = k_estimate
    else:
        logger.error(
            "Solver did not converge",
            extra={"extra_fields": {"solver": label, "cycles": config.max_cycles}},
        )
        raise SolverDivergedError(
            f"{label}: no convergence within {config.max_cycles} cycles "
            f"(last residuals {history[-1][0]:.3e}, {history[-1][1]:.3e})",
            history,
        )

    state = problem.unpack(x)
    if problem.solid_u1.any() or problem.solid_u2.any():
        solid_speed = max(
            float(np.abs(state.u1[problem.solid_u1]).max(initial=0.0)),
            float(np.abs(state.u2[problem.solid_u2]).max(initial=0.0)),
        )
        bound = 10.0 * np.sqrt(config.penalization_permeability)
        if solid_speed > bound:
            logger.warning(
                "Velocity inside fibers exceeds penalization bound",
                extra={"extra_fields": {"solid_speed": solid_speed, "bound": bound}},
            )
    return state


def solve_stokes_micro(
    cell: MicroCell,
    grid: Grid,
    config: SolverConfig,
    bc_mode: str = "periodic_benchmark",
    cancellation_check: Optional[Callable[[], bool]] = None,
) -> FlowState:
    """Solve penalized Stokes flow through a fiber cell.

    Args:
        cell: The MicroCell (may be empty in channel_test mode).
        grid: MAC grid; should resolve fibers with h <= r / 4.
        config: Solver parameters.
        bc_mode: "periodic_benchmark" (periodic velocity, pressure gauge on the
            inlet/outlet columns) or "channel_test" (no-slip top and bottom walls).
        cancellation_check: Optional callable polled between outer cycles.

    Returns:
        The converged FlowState.

    Raises:
        SolverDivergedError: On non-convergence; carries the residual history.
    """
    if cell.fibers and grid.h > cell.radii.min() / 4.0:
        logger.warning(
            "Grid does not resolve fibers (h > r/4)",
            extra={"extra_fields": {"h": grid.h, "r_min": float(cell.radii.min())}},
        )
    with log_performance("stokes_micro_solve", grid_n=grid.n, fibers=len(cell.fibers), bc_mode=bc_mode):
        problem = build_micro_problem(cell, grid, config, bc_mode)
        return solve_problem(problem, config, "stokes_micro", cancellation_check)


def solve_stokes_brinkman(
    meso: MesoCell,
    grid: Grid,
    config: SolverConfig,
    cancellation_check: Optional[Callable[[], bool]] = None,
) -> FlowState:
    """Solve Stokes-Brinkman flow through a cell with porous tows.

    The fluid region carries no drag; the porous box carries mu K^-1 per
    segment. No interface conditions are imposed.

    Raises:
        SolverDivergedError: On non-convergence.
    """
    with log_performance("stokes_brinkman_solve", grid_n=grid.n, segments=meso.n_x * meso.n_y):
        problem = build_brinkman_problem(meso, grid, config)
        return solve_problem(problem, config, "stokes_brinkman", cancellation_check)


def residual_report(state: FlowState, problem: FlowProblem) -> Tuple[float, float]:
    """Apply the discrete operator of problem to state.

    Returns:
        (momentum_residual_max, divergence_max).
    """
    return problem.residuals(problem.pack(state))
