# ---------- TESTS FOR STOKES AND STOKES-BRINKMAN SOLVERS ----------

import numpy as np
import pytest

from dualperm.config.constants import BENCHMARK_TOW_BOX, K_LB, K_UB
from dualperm.config.solver_schemas import SolverConfig
from dualperm.geometry.cells import Box, build_meso_cell, build_micro_cell
from dualperm.solvers.export import export_flow_state, load_flow_state
from dualperm.solvers.grid import FlowState, Grid, sample_state
from dualperm.solvers.stokes import (
    build_micro_problem,
    residual_report,
    solve_stokes_brinkman,
    solve_stokes_micro,
)
from dualperm.upscaling.darcy import meso_permeability, permeability_with_band
from dualperm.utils.exceptions import CancellationError, SolverDivergedError

# --- MOCK DATA ---

CONFIG = SolverConfig()

# Porous box covering every face of the grid
WHOLE_DOMAIN = Box.from_tuple((-0.01, 1.01, -0.01, 1.01))


@pytest.fixture
def cell_25():
    """25-fiber benchmark lattice."""
    return build_micro_cell(5, 2.75e-2, BENCHMARK_TOW_BOX)


@pytest.fixture
def empty_cell():
    """Cell without fibers."""
    return build_micro_cell(0, 0.01, BENCHMARK_TOW_BOX)


@pytest.fixture
def poiseuille(empty_cell):
    """Converged channel flow on a 32-cell grid."""
    grid = Grid(32)
    state = solve_stokes_micro(empty_cell, grid, CONFIG, bc_mode="channel_test")
    return state, build_micro_problem(empty_cell, grid, CONFIG, "channel_test")


# --- TESTS ---


def test_grid_minimum_size():
    """Test that grids below 16 cells are rejected."""
    with pytest.raises(ValueError):
        Grid(8)


def test_flow_state_rejects_bad_shape():
    """Test the FlowState shape check."""
    with pytest.raises(ValueError):
        FlowState(grid=Grid(16), u1=np.zeros((16, 15)), u2=np.zeros((16, 16)), p=np.zeros((16, 16)))


def test_poiseuille_profile(poiseuille):
    """Test the analytic channel profile u1 = 5 x2 (1 - x2)."""
    state, _ = poiseuille
    y = (np.arange(32) + 0.5) / 32
    expected = 5.0 * y * (1.0 - y)
    assert np.allclose(state.u1, expected[:, None], atol=1e-8)
    assert np.allclose(state.u2, 0.0, atol=1e-8)


def test_poiseuille_mean(poiseuille):
    """Test the mean channel velocity 5/6."""
    state, _ = poiseuille
    mean_u1 = state.cell_velocity()[0].mean()
    assert mean_u1 == pytest.approx(5.0 / 6.0, rel=1e-3)


def test_residual_report_converged(poiseuille):
    """Test that a converged state meets the linear tolerance."""
    state, problem = poiseuille
    momentum, divergence = residual_report(state, problem)
    assert momentum <= CONFIG.linear_tolerance
    assert divergence <= CONFIG.linear_tolerance


def test_residual_report_zero_state(empty_cell):
    """Test that the residual of the zero state is the forcing."""
    grid = Grid(16)
    problem = build_micro_problem(empty_cell, grid, CONFIG)
    momentum, divergence = residual_report(FlowState.zeros(grid), problem)
    assert momentum == pytest.approx(10.0)
    assert divergence == 0.0


def test_brinkman_uniform_permeability():
    """Test the constant Darcy state u1 = K f / mu."""
    meso = build_meso_cell(WHOLE_DOMAIN, 1e-3)
    state = solve_stokes_brinkman(meso, Grid(16), CONFIG)
    assert np.allclose(state.u1, 1e-2, atol=1e-10)
    assert np.allclose(state.u2, 0.0, atol=1e-10)
    assert np.allclose(state.p, 0.0, atol=1e-10)
    assert meso_permeability(state, CONFIG) == pytest.approx(1e-3, rel=1e-8)


def test_brinkman_monotone_in_tow_permeability():
    """Test that a more permeable tow carries more flow."""
    grid = Grid(32)
    high = solve_stokes_brinkman(build_meso_cell(BENCHMARK_TOW_BOX, K_UB), grid, CONFIG)
    low = solve_stokes_brinkman(build_meso_cell(BENCHMARK_TOW_BOX, K_LB), grid, CONFIG)
    assert high.cell_velocity()[0].mean() > low.cell_velocity()[0].mean()


def test_solver_diverged_carries_history(empty_cell):
    """Test that exhausting max_cycles raises with the residual history."""
    config = SolverConfig(max_cycles=1)
    with pytest.raises(SolverDivergedError) as exc_info:
        solve_stokes_micro(empty_cell, Grid(16), config, bc_mode="channel_test")
    assert len(exc_info.value.residual_history) == 1


def test_solver_cancellation(empty_cell):
    """Test that a positive cancellation check stops the solve."""
    with pytest.raises(CancellationError):
        solve_stokes_micro(empty_cell, Grid(16), CONFIG, cancellation_check=lambda: True)


def test_unknown_bc_mode(empty_cell):
    """Test that an unknown boundary mode is rejected."""
    with pytest.raises(ValueError):
        solve_stokes_micro(empty_cell, Grid(16), CONFIG, bc_mode="walls")


def test_lattice_flow_symmetry():
    """Test u1 symmetric and u2 antisymmetric about x2 = 0.5."""
    cell = build_micro_cell(1, 0.1, BENCHMARK_TOW_BOX)
    state = solve_stokes_micro(cell, Grid(48), CONFIG)
    n = 48
    scale = np.abs(state.u1).max()
    assert np.allclose(state.u1, state.u1[::-1, :], atol=1e-6 * scale)
    mirrored_u2 = -state.u2[(n - np.arange(n)) % n, :]
    assert np.allclose(state.u2, mirrored_u2, atol=1e-6 * scale)


def test_sample_state_constant_and_nodes():
    """Test interpolation of a constant velocity and exact node values."""
    grid = Grid(16)
    rng = np.random.default_rng(0)
    p = rng.normal(size=(16, 16))
    state = FlowState(grid=grid, u1=np.full((16, 16), 2.0), u2=np.zeros((16, 16)), p=p)
    points = rng.uniform(0.0, 1.0, (20, 2))
    sampled = sample_state(state, points)
    assert np.allclose(sampled["u1"], 2.0)
    centers = grid.cell_centers()
    assert np.allclose(sample_state(state, centers)["p"], p.ravel())


def test_export_roundtrip(tmp_path):
    """Test npz and csv export round-trips."""
    grid = Grid(16)
    rng = np.random.default_rng(1)
    state = FlowState(
        grid=grid, u1=rng.normal(size=(16, 16)), u2=rng.normal(size=(16, 16)), p=rng.normal(size=(16, 16))
    )
    for suffix in (".npz", ".csv"):
        loaded = load_flow_state(export_flow_state(state, tmp_path / f"field{suffix}"))
        assert loaded.grid.n == 16
        assert np.array_equal(loaded.u1, state.u1)
        assert np.array_equal(loaded.p, state.p)


def test_export_rejects_foreign_file(tmp_path):
    """Test that a file without the flow-state header is rejected."""
    path = tmp_path / "other.csv"
    path.write_text('# {"format": "something-else", "version": 1, "n": 16}\nfield,j,i,value\n')
    with pytest.raises(ValueError):
        load_flow_state(path)


@pytest.mark.slow
def test_penalization_consistency():
    """Test that halving the penalization permeability changes K11 by < 1%."""
    cell = build_micro_cell(5, 2.75e-2, BENCHMARK_TOW_BOX)
    grid = Grid(256)
    a = solve_stokes_micro(cell, grid, SolverConfig(penalization_permeability=1e-9))
    b = solve_stokes_micro(cell, grid, SolverConfig(penalization_permeability=5e-10))
    ka = a.cell_velocity()[0].mean()
    kb = b.cell_velocity()[0].mean()
    assert abs(ka - kb) / abs(kb) < 0.01


@pytest.mark.slow
def test_benchmark_isotropy(cell_25):
    """Test K22 = K11 within 1% and a vanishing off-diagonal for the square lattice."""
    estimate = permeability_with_band(cell_25, Grid(192), CONFIG, two_directions=True)
    tensor = estimate.tensor
    assert abs(tensor[1, 1] - tensor[0, 0]) / tensor[0, 0] < 0.01
    assert abs(tensor[0, 1]) < 1e-6 * tensor[0, 0]


@pytest.mark.slow
def test_benchmark_solve_conserves_mass(cell_25):
    """Test divergence <= 1e-8 on a converged fiber-resolved solve."""
    grid = Grid(256)
    state = solve_stokes_micro(cell_25, grid, CONFIG)
    momentum, divergence = residual_report(state, build_micro_problem(cell_25, grid, CONFIG))
    assert divergence <= 1e-8
    assert momentum <= CONFIG.linear_tolerance


@pytest.mark.slow
def test_benchmark_grid_convergence(cell_25):
    """Test that K11 decreases under refinement with shrinking increments."""
    k11 = [permeability_with_band(cell_25, Grid(n), CONFIG).k11 for n in (192, 256, 384)]
    assert k11[0] > k11[1] > k11[2]
    first = (k11[0] - k11[1]) / k11[1]
    second = (k11[1] - k11[2]) / k11[2]
    assert second < first
    assert second < 0.04
