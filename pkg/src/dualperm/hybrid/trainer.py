"""
Hybrid Dual-Scale Training.

`hybrid_train` couples the microscale network to a coarse Stokes-Brinkman
solve of the mesoscale cell. Every `coupling_every` iterations (a checkpoint):

1. While k <= k_c the loss weights are rebalanced from per-term gradient
   norms; after k_c the coupling weights decay exponentially from their
   k_c values.
2. The network's permeability is read off with Darcy's law over the tow
   averaging window and projected onto [K_LB, K_UB] (the first checkpoint
   uses the initial guess instead).
3. The coarse problem is re-solved with that permeability inside the tow and
   the coupling targets are refreshed.

Every iteration takes one Adam step on the weighted objective. `pinn_train` is
the same loop without coupling terms or coarse solves.
"""

import time
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import torch

from dualperm.config.constants import BUFFER_BOX, COUPLING_EDGE_MARGIN
from dualperm.config.network_schemas import ArchitectureConfig, HybridConfig
from dualperm.config.solver_schemas import GeometryConfig, SamplingConfig, SolverConfig
from dualperm.geometry.cells import MesoCell, MicroCell, build_meso_cell, signed_distance
from dualperm.geometry.sampling import PointSets, build_coupling_sets, sample_collocation
from dualperm.hybrid.balancing import anneal_coupling_weights, project_permeability, weight_scaling
from dualperm.hybrid.losses import CouplingTargets, as_tensor, loss_terms, point_tensors, weighted_total
from dualperm.hybrid.optimizer import AdamState, adam_step
from dualperm.hybrid.trace import TraceRecord, TrainingTrace
from dualperm.neural.ansatz import PinnAnsatz, init_params
from dualperm.neural.gradients import gradient_set, param_gradients
from dualperm.solvers.grid import FlowState, Grid
from dualperm.solvers.stokes import solve_stokes_brinkman
from dualperm.upscaling.averaging import AveragingWindow, averaging_box_for
from dualperm.upscaling.darcy import darcy_scalar
from dualperm.utils.exceptions import (
    CancellationError,
    DualPermError,
    NonFiniteGradientError,
    TrainingDivergedError,
)
from dualperm.utils.logger import get_logger

logger = get_logger(__name__)

# Points evaluated per no-grad batch
_EVAL_CHUNK = 16384

COUPLING_TERMS = ("u", "p")


@dataclass
class TrainingResult:
    """Outcome of a training run.

    Attributes:
        params: Trained network.
        k_hat: Final projected permeability.
        trace: Checkpoint records.
        coarse_state: Last coarse Stokes-Brinkman solution (None for pinn_train).
        points: Collocation and coupling points used.
    """

    params: PinnAnsatz
    k_hat: float
    trace: TrainingTrace
    coarse_state: Optional[FlowState] = None
    points: Optional[PointSets] = None


def _evaluate(params: PinnAnsatz, points: np.ndarray, derivatives: bool = False):
    """Network outputs at many points without building a graph."""
    values, grads = [], []
    with torch.no_grad():
        for start in range(0, len(points), _EVAL_CHUNK):
            bundle = params.evaluate(as_tensor(points[start : start + _EVAL_CHUNK]), derivatives)
            values.append(bundle.value.numpy())
            if derivatives:
                grads.append(bundle.grad.numpy())
    value = np.concatenate(values, axis=0) if values else np.zeros((0, 3))
    grad = np.concatenate(grads, axis=0) if derivatives and grads else None
    return value, grad


def darcy_from_network(
    params: PinnAnsatz,
    cell: MicroCell,
    solver_config: SolverConfig,
    window: AveragingWindow,
    n_quad: int = 128,
    exact_pressure_drop: bool = False,
) -> float:
    """Permeability along f from the network velocity averaged over a window.

    Midpoint quadrature on an n_quad x n_quad grid of the window, restricted
    to fluid points. The pressure drop is |f| unless exact_pressure_drop is
    set, in which case the averaged network pressure gradient is subtracted.

    Returns:
        K = U.f_hat / (mu PD.f_hat); 0 for a zero network.
    """
    box = window.box
    xs = box.x_lo + (np.arange(n_quad) + 0.5) * box.width / n_quad
    ys = box.y_lo + (np.arange(n_quad) + 0.5) * box.height / n_quad
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    points = np.stack([X.ravel(), Y.ravel()], axis=1)
    points = points[signed_distance(cell, points) > 0.0]
    if len(points) == 0:
        raise TrainingDivergedError(f"Averaging window {box.as_tuple()} holds no fluid point")

    value, grad = _evaluate(params, points, derivatives=exact_pressure_drop)
    f = np.asarray(solver_config.body_force, dtype=float)
    direction = f / np.linalg.norm(f)
    U = float(value[:, 0:2].mean(axis=0) @ direction)
    if exact_pressure_drop:
        PD = float((f - grad[:, 2, :].mean(axis=0)) @ direction)
    else:
        PD = float(np.linalg.norm(f))
    return darcy_scalar(U, PD, solver_config.mu)


def reference_errors(
    params: PinnAnsatz, reference: FlowState, cell: MicroCell, stride: int = 1
) -> Dict[str, float]:
    """Relative l2 errors of (u1, u2, p) on the fluid cell centers of a reference grid.

    Args:
        params: Network.
        reference: Fine-grid solution.
        cell: Geometry of the reference solve.
        stride: Keep every stride-th row and column of cell centers.

    Returns:
        {"u1": ..., "u2": ..., "p": ...}.
    """
    n = reference.grid.n
    centers = reference.grid.cell_centers().reshape(n, n, 2)[::stride, ::stride].reshape(-1, 2)
    velocity = reference.cell_velocity()[:, ::stride, ::stride]
    truth = np.stack(
        [velocity[0].ravel(), velocity[1].ravel(), reference.p[::stride, ::stride].ravel()], axis=1
    )
    fluid = signed_distance(cell, centers) > 0.0
    predicted, _ = _evaluate(params, centers[fluid])
    truth = truth[fluid]

    errors = {}
    for k, name in enumerate(("u1", "u2", "p")):
        denom = np.linalg.norm(truth[:, k])
        diff = np.linalg.norm(predicted[:, k] - truth[:, k])
        errors[name] = float(diff / denom) if denom > 0 else float(diff)
    return errors


def _coarse_solve(
    meso: MesoCell, k_hat: float, grid: Grid, solver_config: SolverConfig, trace: TrainingTrace
) -> FlowState:
    try:
        return solve_stokes_brinkman(build_meso_cell(meso.porous_box, k_hat), grid, solver_config)
    except DualPermError as e:
        logger.error(
            "Coarse Stokes-Brinkman solve failed",
            extra={"extra_fields": {"k_hat": k_hat}},
            exc_info=True,
        )
        raise TrainingDivergedError(f"Coarse solve failed at K={k_hat:.4g}: {e}", trace=trace) from e


def _train(
    micro: MicroCell,
    meso: Optional[MesoCell],
    config: HybridConfig,
    arch: ArchitectureConfig,
    seed: int,
    method: str,
    k_init: float,
    solver_config: SolverConfig,
    sampling: SamplingConfig,
    coarse_grid_n: Optional[int],
    reference: Optional[FlowState],
    cancellation_check: Optional[Callable[[], bool]],
    deterministic: bool,
    error_stride: int,
    config_hash: str,
    code_version: str,
) -> TrainingResult:
    coupled = meso is not None
    params = init_params(arch, seed)
    theta_psi = params.theta() + params.psi()
    trace = TrainingTrace(method=method, seed=seed, config_hash=config_hash, code_version=code_version)
    k_hat = project_permeability(k_init, config.k_lb, config.k_ub)

    points = sample_collocation(micro, sampling, seed=seed)
    tensors = point_tensors(points)
    window = AveragingWindow(averaging_box_for(micro.tow_box), l_p=0.0)
    mu, f = solver_config.mu, solver_config.body_force

    coarse_state: Optional[FlowState] = None
    targets: Optional[CouplingTargets] = None
    if coupled:
        coarse_grid = Grid(coarse_grid_n or GeometryConfig().meso_grid_n)
        coupling_velocity, coupling_pressure = build_coupling_sets(
            meso, coarse_grid.cell_centers(), BUFFER_BOX, COUPLING_EDGE_MARGIN
        )
        points.coupling_velocity, points.coupling_pressure = coupling_velocity, coupling_pressure
        coarse_state = _coarse_solve(meso, k_hat, coarse_grid, solver_config, trace)
        targets = CouplingTargets.from_state(coarse_state, coupling_velocity, coupling_pressure)
    solved_k = k_hat

    weights = config.weights.as_dict()
    if not coupled:
        weights = {name: value for name, value in weights.items() if name not in COUPLING_TERMS}
    weights_at_kc: Optional[Tuple[float, float]] = None
    anchor = "r" if config.anchor_residual_weight else None
    state = AdamState.zeros_like(theta_psi)
    started = time.perf_counter()

    logger.info(
        "Training started",
        extra={"extra_fields": {"method": method, "k_max": config.k_max, **points.counts()}},
    )

    for k in range(config.k_max):
        if cancellation_check is not None and cancellation_check():
            raise CancellationError(f"Training cancelled at iteration {k}")

        if k % config.coupling_every == 0:
            if k <= config.k_c:
                terms = loss_terms(params, points, mu, f, targets, tensors)
                norms = {name: g.norm() for name, g in param_gradients(params, terms).items()}
                weights = weight_scaling(norms, weights, config.weight_scaling_alpha, anchor)
                if k == config.k_c and coupled:
                    weights_at_kc = (weights["u"], weights["p"])
            elif coupled and weights_at_kc is not None:
                weights["u"], weights["p"] = anneal_coupling_weights(
                    k, config.k_c, config.gamma_u, config.gamma_p, weights_at_kc
                )

            k_hat_raw = k_init if k == 0 else darcy_from_network(
                params, micro, solver_config, window, exact_pressure_drop=config.exact_pressure_drop
            )
            k_hat = project_permeability(k_hat_raw, config.k_lb, config.k_ub)
            if coupled and k_hat != solved_k:
                coarse_state = _coarse_solve(meso, k_hat, coarse_grid, solver_config, trace)
                targets = CouplingTargets.from_state(
                    coarse_state, points.coupling_velocity, points.coupling_pressure
                )
                solved_k = k_hat

        terms = loss_terms(params, points, mu, f, targets, tensors)
        total = weighted_total(terms, weights)
        if not torch.isfinite(total):
            logger.error(
                "Non-finite training loss",
                extra={"extra_fields": {"iteration": k, "losses": {n: float(v) for n, v in terms.items()}}},
            )
            raise TrainingDivergedError(f"Non-finite loss at iteration {k}", trace=trace)

        if k % config.coupling_every == 0:
            record = TraceRecord(
                iteration=k,
                losses={name: float(value.detach()) for name, value in terms.items()},
                weights=dict(weights),
                k_hat=k_hat,
                k_hat_raw=k_hat_raw,
                errors=reference_errors(params, reference, micro, error_stride) if reference is not None else None,
                wall_time_s=None if deterministic else time.perf_counter() - started,
            )
            trace.append(record)
            logger.info(
                "Training checkpoint",
                extra={"extra_fields": record.model_dump(exclude={"wall_time_s"})},
            )

        grads = gradient_set(params, total)
        if not grads.is_finite():
            raise NonFiniteGradientError(f"Non-finite gradient at iteration {k}", term="total")
        adam_step(theta_psi, grads.tensors(), state, k, config.adam)

    if config.k_max > 0:
        k_hat_raw = darcy_from_network(
            params, micro, solver_config, window, exact_pressure_drop=config.exact_pressure_drop
        )
        k_hat = project_permeability(k_hat_raw, config.k_lb, config.k_ub)
        if coupled and k_hat != solved_k:
            coarse_state = _coarse_solve(meso, k_hat, coarse_grid, solver_config, trace)
            targets = CouplingTargets.from_state(
                coarse_state, points.coupling_velocity, points.coupling_pressure
            )
        with torch.no_grad():
            terms = loss_terms(params, points, mu, f, targets, tensors)
        trace.append(
            TraceRecord(
                iteration=config.k_max,
                losses={name: float(value) for name, value in terms.items()},
                weights=dict(weights),
                k_hat=k_hat,
                k_hat_raw=k_hat_raw,
                errors=reference_errors(params, reference, micro, error_stride) if reference is not None else None,
                wall_time_s=None if deterministic else time.perf_counter() - started,
            )
        )

    logger.info(
        "Training finished",
        extra={"extra_fields": {"method": method, "k_hat": k_hat, "checkpoints": len(trace)}},
    )
    return TrainingResult(params=params, k_hat=k_hat, trace=trace, coarse_state=coarse_state, points=points)


def hybrid_train(
    micro: MicroCell,
    meso: MesoCell,
    config: HybridConfig,
    arch: ArchitectureConfig,
    seed: int,
    surrogate_init: Optional[float] = None,
    solver_config: Optional[SolverConfig] = None,
    sampling: Optional[SamplingConfig] = None,
    coarse_grid_n: Optional[int] = None,
    reference: Optional[FlowState] = None,
    cancellation_check: Optional[Callable[[], bool]] = None,
    deterministic: bool = False,
    error_stride: int = 4,
    config_hash: str = "",
    code_version: str = "",
) -> TrainingResult:
    """Train the microscale network coupled to the coarse Stokes-Brinkman field.

    Args:
        micro: Resolved tow geometry (the network's domain).
        meso: Mesoscale cell whose porous box matches the tow.
        config: Loop hyperparameters.
        arch: Network architecture.
        seed: Seed for initialization and collocation sampling.
        surrogate_init: Initial permeability; defaults to config.k_init.
        solver_config: Viscosity, body force and coarse-solve tolerances.
        sampling: Collocation counts.
        coarse_grid_n: Cells per side of the coarse grid; defaults to the
            geometry default meso_grid_n.
        reference: Fine-grid solution for error tracking.
        cancellation_check: Polled every iteration.
        deterministic: Omit wall time from trace records.
        error_stride: Subsampling of the reference grid for error tracking.

    Returns:
        TrainingResult. With k_max = 0 it holds the initialized network,
        the initial permeability, an empty trace and the initial coarse solve.

    Raises:
        TrainingDivergedError: On a non-finite loss or a failed coarse solve.
        NonFiniteGradientError: On a non-finite parameter gradient.
        CouplingSetError: If no coarse mesh point is usable for coupling.
        CancellationError: If cancellation_check returns True.
    """
    return _train(
        micro,
        meso,
        config,
        arch,
        seed,
        method="hybrid",
        k_init=config.k_init if surrogate_init is None else float(surrogate_init),
        solver_config=solver_config or SolverConfig(),
        sampling=sampling or SamplingConfig(),
        coarse_grid_n=coarse_grid_n,
        reference=reference,
        cancellation_check=cancellation_check,
        deterministic=deterministic,
        error_stride=error_stride,
        config_hash=config_hash,
        code_version=code_version,
    )


def pinn_train(
    micro: MicroCell,
    config: HybridConfig,
    arch: ArchitectureConfig,
    seed: int,
    solver_config: Optional[SolverConfig] = None,
    sampling: Optional[SamplingConfig] = None,
    reference: Optional[FlowState] = None,
    cancellation_check: Optional[Callable[[], bool]] = None,
    deterministic: bool = False,
    error_stride: int = 4,
    config_hash: str = "",
    code_version: str = "",
) -> TrainingResult:
    """Train the network on the PDE losses alone (lambda_u = lambda_p = 0).

    Same loop and trace as hybrid_train without coarse solves; the recorded
    permeability is the projected network estimate.
    """
    return _train(
        micro,
        None,
        config,
        arch,
        seed,
        method="pinn",
        k_init=config.k_init,
        solver_config=solver_config or SolverConfig(),
        sampling=sampling or SamplingConfig(),
        coarse_grid_n=None,
        reference=reference,
        cancellation_check=cancellation_check,
        deterministic=deterministic,
        error_stride=error_stride,
        config_hash=config_hash,
        code_version=code_version,
    )
