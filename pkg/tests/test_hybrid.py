# ---------- TESTS FOR HYBRID TRAINING ----------

import math
from unittest.mock import patch

import numpy as np
import pytest
import torch

from dualperm.config.constants import BENCHMARK_TOW_BOX
from dualperm.config.network_schemas import AdamSchedule, ArchitectureConfig, HybridConfig
from dualperm.config.solver_schemas import SamplingConfig, SolverConfig
from dualperm.geometry.cells import build_meso_cell, build_micro_cell
from dualperm.hybrid.balancing import anneal_coupling_weights, project_permeability, weight_scaling
from dualperm.hybrid.losses import (
    CouplingTargets,
    as_tensor,
    coupling_loss,
    coupling_terms,
    pinn_losses,
    weighted_total,
)
from dualperm.hybrid.optimizer import AdamState, adam_step, learning_rate
from dualperm.hybrid.trace import TraceRecord, TrainingTrace
from dualperm.hybrid.trainer import darcy_from_network, hybrid_train, pinn_train
from dualperm.neural.ansatz import DTYPE, init_params
from dualperm.neural.gradients import param_gradients
from dualperm.solvers.grid import FlowState, Grid
from dualperm.solvers.stokes import solve_stokes_brinkman, solve_stokes_micro
from dualperm.upscaling.averaging import AveragingWindow
from dualperm.utils.exceptions import (
    CancellationError,
    SolverDivergedError,
    TrainingDivergedError,
)

# --- MOCK DATA ---

TINY_ARCH = ArchitectureConfig(d_e=8, hidden_widths=[8])
TINY_SAMPLING = SamplingConfig(inside_split=40, outside_split=60, points_per_edge=6, points_per_fiber=8)
TINY_HYBRID = HybridConfig(k_max=4, k_c=2, coupling_every=2)
TINY_TRAINING = dict(sampling=TINY_SAMPLING, coarse_grid_n=16)


@pytest.fixture
def micro():
    """Single-fiber tow."""
    return build_micro_cell(1, 0.1, BENCHMARK_TOW_BOX)


@pytest.fixture
def meso():
    """Mesoscale cell matching the tow."""
    return build_meso_cell(BENCHMARK_TOW_BOX, 1e-4)


@pytest.fixture
def params():
    """Tiny ansatz."""
    return init_params(TINY_ARCH, seed=0)


def constant_state(u1: float, p: float = 0.0) -> FlowState:
    """Uniform coarse field on a 16-cell grid."""
    return FlowState(
        grid=Grid(16),
        u1=np.full((16, 16), u1),
        u2=np.zeros((16, 16)),
        p=np.full((16, 16), p),
    )


# --- TESTS ---


def test_weight_scaling_inverse_norms():
    """Test the inverse-gradient-norm update with the residual anchor."""
    updated = weight_scaling({"r": 1.0, "div": 3.0}, {"r": 1.0, "div": 1.0}, alpha=1.0)
    assert updated["r"] == pytest.approx(1.0)
    assert updated["div"] == pytest.approx(1.0 / 3.0)


def test_weight_scaling_moving_average_without_anchor():
    """Test the moving average of old and new weights."""
    updated = weight_scaling({"r": 1.0, "b": 1.0}, {"r": 1.0, "b": 4.0}, alpha=0.5, anchor=None)
    assert updated["r"] == pytest.approx(0.5 * 1.0 + 0.5 * 2.0)
    assert updated["b"] == pytest.approx(0.5 * 4.0 + 0.5 * 2.0)


def test_weight_scaling_alpha_zero_and_zero_norms():
    """Test that alpha = 0 and all-zero norms keep the weights."""
    weights = {"r": 1.0, "div": 2.0}
    assert weight_scaling({"r": 5.0, "div": 1.0}, weights, alpha=0.0) == weights
    with pytest.warns(RuntimeWarning):
        assert weight_scaling({"r": 0.0, "div": 0.0}, weights, alpha=0.9) == weights


def test_weight_scaling_skips_zero_norm_term():
    """Test that a term with zero gradient keeps its weight."""
    updated = weight_scaling({"r": 1.0, "u": 0.0}, {"r": 1.0, "u": 7.0}, alpha=1.0)
    assert updated["u"] == pytest.approx(7.0)


def test_anneal_coupling_weights():
    """Test the exponential decay after k_c."""
    assert anneal_coupling_weights(100, 100, 1e-3, 2e-3, (4.0, 5.0)) == (4.0, 5.0)
    lam_u, lam_p = anneal_coupling_weights(600, 100, 1e-3, 2e-3, (4.0, 5.0))
    assert lam_u == pytest.approx(4.0 * np.exp(-0.5))
    assert lam_p == pytest.approx(5.0 * np.exp(-1.0))
    with pytest.raises(ValueError):
        anneal_coupling_weights(50, 100, 1e-3, 1e-3, (1.0, 1.0))


def test_project_permeability():
    """Test clamping into [K_LB, K_UB]."""
    assert project_permeability(1e-3, 5e-5, 5e-4) == 5e-4
    assert project_permeability(-1.0, 5e-5, 5e-4) == 5e-5
    assert project_permeability(2e-4, 5e-5, 5e-4) == 2e-4
    with pytest.raises(ValueError):
        project_permeability(1e-4, 5e-4, 5e-5)


def test_learning_rate_decay():
    """Test l_k = l0 * rate ** (k / every)."""
    schedule = AdamSchedule(l0=1e-3, decay_rate=0.9, decay_every=1000)
    assert learning_rate(0, schedule) == pytest.approx(1e-3)
    assert learning_rate(2000, schedule) == pytest.approx(1e-3 * 0.81)


def test_adam_step_matches_torch_adam():
    """Test the explicit update against torch.optim.Adam with a constant rate."""
    schedule = AdamSchedule(l0=1e-2, decay_rate=1.0)
    generator = torch.Generator().manual_seed(0)
    ours = [torch.randn(3, 2, generator=generator, dtype=DTYPE)]
    theirs = [ours[0].clone().requires_grad_(True)]
    reference = torch.optim.Adam(
        theirs, lr=1e-2, betas=(schedule.beta1, schedule.beta2), eps=schedule.eps
    )
    state = AdamState.zeros_like(ours)
    for k in range(5):
        grad = torch.randn(3, 2, generator=generator, dtype=DTYPE)
        adam_step(ours, [grad], state, k, schedule)
        theirs[0].grad = grad.clone()
        reference.step()
    assert state.step == 5
    assert torch.allclose(ours[0], theirs[0].detach(), atol=1e-12)


def test_adam_step_misaligned():
    """Test that mismatched gradients are rejected."""
    params = [torch.zeros(2, dtype=DTYPE)]
    with pytest.raises(ValueError):
        adam_step(params, [], AdamState.zeros_like(params), 0, AdamSchedule())


def test_pinn_losses_nonnegative_and_empty_boundary(params):
    """Test the PDE losses and the empty boundary set."""
    residual = as_tensor(np.random.default_rng(0).uniform(0, 1, (20, 2)))
    j_r, j_div, j_b = pinn_losses(params, residual, torch.zeros(0, 2, dtype=DTYPE), 1.0, (10.0, 0.0))
    assert float(j_r) > 0
    assert float(j_div) >= 0
    assert float(j_b) == 0.0


def test_coupling_terms_against_manual(params):
    """Test J_u and J_p against a direct evaluation."""
    pts = np.array([[0.1, 0.1], [0.9, 0.2], [0.15, 0.85]])
    targets = CouplingTargets.from_state(constant_state(2.0, p=0.5), pts, pts)
    assert torch.allclose(targets.velocity_values[:, 0], torch.full((3,), 2.0, dtype=DTYPE))

    value = params.evaluate(as_tensor(pts), derivatives=False).value
    expected_u = ((value[:, 0] - 2.0) ** 2 + value[:, 1] ** 2).mean()
    expected_p = ((value[:, 2] - 0.5) ** 2).mean()
    j_u, j_p = coupling_terms(params, targets)
    assert torch.allclose(j_u, expected_u)
    assert torch.allclose(j_p, expected_p)
    total = coupling_loss(params, targets, {"u": 2.0, "p": 3.0})
    assert torch.allclose(total, 2.0 * expected_u + 3.0 * expected_p)


def test_weighted_total():
    """Test the weighted sum of loss terms."""
    terms = {"r": torch.tensor(2.0), "b": torch.tensor(3.0)}
    assert float(weighted_total(terms, {"r": 1.0, "b": 0.5, "u": 9.0})) == pytest.approx(3.5)


def test_weighted_total_skips_unweighted_terms():
    """Test that a term without a weight does not enter the total."""
    terms = {"r": torch.tensor(2.0), "u": torch.tensor(5.0)}
    assert float(weighted_total(terms, {"r": 1.5})) == pytest.approx(3.0)


def test_trace_ordering():
    """Test that iterations must strictly increase."""
    trace = TrainingTrace(method="hybrid", seed=0)
    trace.append(TraceRecord(iteration=0, losses={"r": 1.0}, weights={"r": 1.0}))
    with pytest.raises(ValueError):
        trace.append(TraceRecord(iteration=0, losses={"r": 1.0}, weights={"r": 1.0}))
    with pytest.raises(ValueError):
        TrainingTrace(
            method="hybrid",
            seed=0,
            records=[
                TraceRecord(iteration=5, losses={}, weights={}),
                TraceRecord(iteration=3, losses={}, weights={}),
            ],
        )


def test_trace_ndjson_roundtrip(tmp_path):
    """Test that a trace survives NDJSON serialization."""
    trace = TrainingTrace(method="hybrid", seed=2, config_hash="abc", code_version="1.0.0")
    trace.append(TraceRecord(iteration=0, losses={"r": 1.5}, weights={"r": 1.0}, k_hat=4.5e-4))
    trace.append(
        TraceRecord(iteration=250, losses={"r": 0.5}, weights={"r": 1.0}, errors={"u1": 0.1})
    )
    path = trace.to_ndjson(tmp_path / "trace.ndjson")
    assert len(path.read_text().splitlines()) == 2
    loaded = TrainingTrace.from_ndjson(path)
    assert loaded == trace


def test_darcy_from_network_uniform_velocity(micro, params):
    """Test Darcy's law on a mocked uniform network velocity."""

    def fake_evaluate(net, points, derivatives=False):
        value = np.zeros((len(points), 3))
        value[:, 0] = 1e-3
        return value, None

    window = AveragingWindow.from_bounds((0.3125, 0.6875, 0.3125, 0.6875))
    with patch("dualperm.hybrid.trainer._evaluate", side_effect=fake_evaluate):
        k = darcy_from_network(params, micro, SolverConfig(), window, n_quad=16)
    assert k == pytest.approx(1e-4)


def test_hybrid_train_trace(micro, meso):
    """Test checkpoint cadence, projection and weight keys of a short run."""
    result = hybrid_train(
        micro, meso, TINY_HYBRID, TINY_ARCH, seed=0, **TINY_TRAINING, deterministic=True
    )
    assert result.trace.iterations() == [0, 2, 4]
    first = result.trace.records[0]
    assert first.k_hat == pytest.approx(TINY_HYBRID.k_init)
    assert set(first.weights) == {"r", "div", "b", "u", "p"}
    assert first.weights["r"] == pytest.approx(1.0)
    assert all(r.wall_time_s is None for r in result.trace.records)
    assert TINY_HYBRID.k_lb <= result.k_hat <= TINY_HYBRID.k_ub
    assert result.coarse_state is not None
    assert len(result.points.coupling_velocity) > 0


def test_hybrid_train_reproducible(micro, meso):
    """Test that equal seeds give identical traces in deterministic mode."""
    a = hybrid_train(micro, meso, TINY_HYBRID, TINY_ARCH, seed=1, **TINY_TRAINING, deterministic=True)
    b = hybrid_train(micro, meso, TINY_HYBRID, TINY_ARCH, seed=1, **TINY_TRAINING, deterministic=True)
    assert a.trace == b.trace
    assert a.k_hat == b.k_hat


def test_hybrid_train_final_targets_follow_last_coarse_solve(micro, meso):
    """Test that the final record measures coupling against the last coarse solve."""
    with patch("dualperm.hybrid.trainer.darcy_from_network", side_effect=[2e-4, 3e-4]), patch(
        "dualperm.hybrid.trainer.solve_stokes_brinkman", wraps=solve_stokes_brinkman
    ) as mock_solve:
        result = hybrid_train(micro, meso, TINY_HYBRID, TINY_ARCH, seed=0, **TINY_TRAINING, deterministic=True)

    assert mock_solve.call_count == 3
    assert result.k_hat == pytest.approx(3e-4)
    targets = CouplingTargets.from_state(
        result.coarse_state, result.points.coupling_velocity, result.points.coupling_pressure
    )
    with torch.no_grad():
        j_u, j_p = coupling_terms(result.params, targets)
    assert result.trace.last.losses["u"] == pytest.approx(float(j_u), rel=1e-12)
    assert result.trace.last.losses["p"] == pytest.approx(float(j_p), rel=1e-12)


def test_hybrid_train_zero_iterations(micro, meso):
    """Test that k_max = 0 returns the initial state."""
    config = HybridConfig(k_max=0, k_c=0, coupling_every=2)
    result = hybrid_train(micro, meso, config, TINY_ARCH, seed=0, **TINY_TRAINING)
    assert len(result.trace) == 0
    assert result.k_hat == pytest.approx(config.k_init)
    assert result.coarse_state is not None


def test_hybrid_train_surrogate_init(micro, meso):
    """Test that a surrogate initial guess replaces k_init."""
    config = HybridConfig(k_max=0, k_c=0, coupling_every=2)
    result = hybrid_train(micro, meso, config, TINY_ARCH, seed=0, surrogate_init=1e-4, **TINY_TRAINING)
    assert result.k_hat == pytest.approx(1e-4)


def test_hybrid_train_coarse_failure(micro, meso):
    """Test that a failed coarse solve ends training with the partial trace."""
    error = SolverDivergedError("no convergence", [])
    with patch("dualperm.hybrid.trainer.solve_stokes_brinkman", side_effect=error):
        with pytest.raises(TrainingDivergedError) as exc_info:
            hybrid_train(micro, meso, TINY_HYBRID, TINY_ARCH, seed=0, **TINY_TRAINING)
    assert exc_info.value.trace is not None


def test_hybrid_train_cancellation(micro, meso):
    """Test that a positive cancellation check stops training."""
    with pytest.raises(CancellationError):
        hybrid_train(
            micro, meso, TINY_HYBRID, TINY_ARCH, seed=0, **TINY_TRAINING,
            cancellation_check=lambda: True,
        )


def test_pinn_train_has_no_coupling(micro):
    """Test that the uncoupled loop has no coupling terms or coarse state."""
    result = pinn_train(micro, TINY_HYBRID, TINY_ARCH, seed=0, sampling=TINY_SAMPLING, deterministic=True)
    assert result.coarse_state is None
    for record in result.trace.records:
        assert set(record.losses) == {"r", "div", "b"}
        assert set(record.weights) == {"r", "div", "b"}


def test_adam_path_invariant_to_weight_scale():
    """Test that scaling every loss weight leaves the Adam path unchanged."""
    schedule = AdamSchedule(l0=1e-3)
    start = torch.linspace(2.0, 3.0, 5, dtype=DTYPE)
    paths = []
    for scale in (1.0, 10.0):
        x = start.clone()
        state = AdamState.zeros_like([x])
        for k in range(100):
            leaf = x.clone().requires_grad_(True)
            terms = {"r": (leaf**4).sum(), "div": ((leaf - 1.0) ** 2).sum()}
            total = weighted_total(terms, {"r": scale, "div": 3.0 * scale})
            (grad,) = torch.autograd.grad(total, [leaf])
            adam_step([x], [grad], state, k, schedule)
        paths.append(x)
    assert not torch.allclose(paths[0], start)
    assert torch.allclose(paths[0], paths[1], rtol=0.0, atol=1e-10)


def test_coupling_loss_vanishes_at_coarse_interpolant(params):
    """Test R = 0 and zero coupling gradients when the network equals the coarse field."""
    with torch.no_grad():
        params.velocity.output.weight.zero_()
        params.velocity.output.bias.copy_(torch.tensor([0.5, 0.0], dtype=DTYPE))
        params.pressure.output.weight.zero_()
        params.pressure.output.bias.zero_()
    pts = np.random.default_rng(3).uniform(0.05, 0.95, (12, 2))
    targets = CouplingTargets.from_state(constant_state(0.5), pts, pts)
    weights = {"u": 2.0, "p": 3.0}

    assert float(coupling_loss(params, targets, weights)) == pytest.approx(0.0, abs=1e-24)
    j_u, j_p = coupling_terms(params, targets)
    grads = param_gradients(params, {"u": j_u, "p": j_p})
    assert grads["u"].norm() == pytest.approx(0.0, abs=1e-12)
    assert grads["p"].norm() == pytest.approx(0.0, abs=1e-12)

    with torch.no_grad():
        params.velocity.output.bias[0] += 0.1
    assert float(coupling_loss(params, targets, weights)) == pytest.approx(2.0 * 0.01)


def test_hybrid_train_anneals_coupling_weights(micro, meso):
    """Test that lambda_u and lambda_p decay between checkpoints after k_c."""
    config = HybridConfig(k_max=8, k_c=2, coupling_every=2)
    with patch("dualperm.hybrid.trainer.darcy_from_network", return_value=config.k_init):
        result = hybrid_train(micro, meso, config, TINY_ARCH, seed=0, **TINY_TRAINING, deterministic=True)
    by_iteration = {record.iteration: record.weights for record in result.trace.records}
    for name, gamma in (("u", config.gamma_u), ("p", config.gamma_p)):
        annealed = [by_iteration[k][name] for k in (2, 4, 6)]
        assert annealed[0] > annealed[1] > annealed[2] > 0
        assert annealed[1] / annealed[0] == pytest.approx(math.exp(-2.0 * gamma))


@pytest.mark.slow
def test_hybrid_beats_pinn_on_benchmark():
    """Test that coupling cuts the final u1 error at least five-fold against the plain PINN."""
    micro = build_micro_cell(5, 2.75e-2, BENCHMARK_TOW_BOX)
    meso = build_meso_cell(BENCHMARK_TOW_BOX, 2.4e-4)
    reference = solve_stokes_micro(micro, Grid(128), SolverConfig())
    config = HybridConfig(k_max=5000, k_c=1000, coupling_every=250)
    arch = ArchitectureConfig()

    hybrid = hybrid_train(
        micro, meso, config, arch, seed=0, surrogate_init=2.4e-4, reference=reference, deterministic=True
    )
    pinn = pinn_train(micro, config, arch, seed=0, reference=reference, deterministic=True)
    assert 5.0 * hybrid.trace.last.errors["u1"] <= pinn.trace.last.errors["u1"]
