# ---------- TESTS FOR MAIN PIPELINE ORCHESTRATION ----------

import json
from unittest.mock import MagicMock, patch

import pytest
import torch

from dualperm.config.run_schemas import RunConfig, SurrogateConfig
from dualperm.main import (
    check_cancellation,
    pipeline_step,
    run_dataset,
    run_pipeline,
    run_train_surrogate,
    runtime_settings,
)
from dualperm.pipelines.report import ReportRow, read_rows
from dualperm.surrogate.dataset import Dataset, DatasetRow, FeatureVector
from dualperm.surrogate.emulator import gebart_baseline
from dualperm.utils.exceptions import CancellationError, RunConfigError, SolverDivergedError

# --- MOCK DATA ---

mock_config = RunConfig(method="num", seeds=[0, 1], micro_k=2e-4)


def fake_service_factory(files=("geometry.json",), error=None):
    """Service class whose run returns a fixed row per seed."""

    class FakeService:
        def __init__(self, config, run_dir, deterministic=False):
            self.config = config
            self.run_dir = run_dir
            self.files = list(files)

        def run(self, seed, geometry=None, cancellation_check=None):
            if error is not None:
                raise error
            return ReportRow(method=self.config.method, seed=seed, k_meso=1e-3 * (seed + 1))

    return FakeService


@pytest.fixture
def mock_services():
    """Patch the service registry with a fake NUM service."""
    with patch.dict("dualperm.main.SERVICES", {"num": fake_service_factory()}):
        yield


# --- TESTS ---


def test_pipeline_step_wraps_errors():
    """Test that step failures become RuntimeError chained to the cause."""

    @pipeline_step("Failing step", 2, 3)
    def failing():
        raise SolverDivergedError("no convergence", [])

    with pytest.raises(RuntimeError, match="Step 2/3: Failing step failed") as exc_info:
        failing()
    assert isinstance(exc_info.value.__cause__, SolverDivergedError)


def test_pipeline_step_passes_cancellation():
    """Test that cancellation is not wrapped."""

    @pipeline_step("Cancelled step", 1, 1)
    def cancelled():
        raise CancellationError("stop")

    with pytest.raises(CancellationError):
        cancelled()


def test_pipeline_step_returns_value():
    """Test that a successful step returns its result."""

    @pipeline_step("Adding", 1, 1)
    def add(a, b):
        return a + b

    assert add(2, 3) == 5


def test_check_cancellation():
    """Test the cancellation helper."""
    check_cancellation(None, "anywhere")
    check_cancellation(lambda: False, "anywhere")
    with pytest.raises(CancellationError, match="before start"):
        check_cancellation(lambda: True, "before start")


def test_run_pipeline_writes_report_and_manifest(mock_services, tmp_path):
    """Test one run directory per seed with report and manifest."""
    progress = MagicMock()
    result = run_pipeline(mock_config, out=tmp_path, deterministic=True, progress_callback=progress)

    assert [row.seed for row in result["rows"]] == [0, 1]
    assert len(result["run_dirs"]) == 2
    for seed, run_dir in zip((0, 1), result["run_dirs"]):
        assert run_dir.name.endswith(f"_seed{seed}")
        rows = read_rows(run_dir / "report.csv")
        assert rows[0].k_meso == pytest.approx(1e-3 * (seed + 1))
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert manifest["seed"] == seed
        assert manifest["files"] == ["geometry.json", "report.csv"]
        assert manifest["result"]["method"] == "num"
    progress.assert_any_call("finished", "Run finished")


def test_run_pipeline_seed_override(mock_services, tmp_path):
    """Test that explicit seeds replace config.seeds."""
    result = run_pipeline(mock_config, seeds=[7], out=tmp_path)
    assert [row.seed for row in result["rows"]] == [7]


def test_runtime_settings_restored():
    """Test that deterministic mode is scoped to the block."""
    threads = torch.get_num_threads()
    deterministic = torch.are_deterministic_algorithms_enabled()
    with runtime_settings(deterministic=True):
        assert torch.get_num_threads() == 1
        assert torch.are_deterministic_algorithms_enabled()
    assert torch.get_num_threads() == threads
    assert torch.are_deterministic_algorithms_enabled() == deterministic


def test_run_pipeline_restores_runtime(tmp_path):
    """Test that a deterministic run leaves torch settings as it found them."""
    threads = torch.get_num_threads()
    deterministic = torch.are_deterministic_algorithms_enabled()
    seen = {}

    class RecordingService(fake_service_factory()):
        def run(self, seed, geometry=None, cancellation_check=None):
            seen["threads"] = torch.get_num_threads()
            seen["deterministic"] = torch.are_deterministic_algorithms_enabled()
            return super().run(seed, geometry, cancellation_check)

    with patch.dict("dualperm.main.SERVICES", {"num": RecordingService}):
        run_pipeline(mock_config, seeds=[0], out=tmp_path, deterministic=True)

    assert seen == {"threads": 1, "deterministic": True}
    assert torch.get_num_threads() == threads
    assert torch.are_deterministic_algorithms_enabled() == deterministic


def test_run_pipeline_restores_runtime_on_failure(tmp_path):
    """Test that a failing deterministic run also restores torch settings."""
    threads = torch.get_num_threads()
    deterministic = torch.are_deterministic_algorithms_enabled()
    failing = fake_service_factory(error=SolverDivergedError("no convergence", []))
    with patch.dict("dualperm.main.SERVICES", {"num": failing}):
        with pytest.raises(RuntimeError):
            run_pipeline(mock_config, seeds=[0], out=tmp_path, deterministic=True)
    assert torch.get_num_threads() == threads
    assert torch.are_deterministic_algorithms_enabled() == deterministic


def test_run_pipeline_wraps_service_errors(tmp_path):
    """Test that a service failure surfaces as RuntimeError with the cause."""
    error = SolverDivergedError("no convergence", [])
    with patch.dict("dualperm.main.SERVICES", {"num": fake_service_factory(error=error)}):
        with pytest.raises(RuntimeError, match="Running num") as exc_info:
            run_pipeline(mock_config, out=tmp_path)
    assert exc_info.value.__cause__ is error


def test_run_pipeline_cancellation(mock_services, tmp_path):
    """Test cancellation before the first seed."""
    with pytest.raises(CancellationError):
        run_pipeline(mock_config, out=tmp_path, cancellation_check=lambda: True)


def test_run_dataset_and_train_surrogate(tmp_path):
    """Test the dataset and emulator steps with a mocked generator."""
    rows = [
        DatasetRow(features=FeatureVector(fvc=fvc, radius=r), k11=gebart_baseline(fvc, r))
        for fvc in (0.2, 0.25, 0.3, 0.35)
        for r in (0.02, 0.025, 0.03)
    ]
    dataset_path = tmp_path / "dataset.json"
    model_path = tmp_path / "emulator.json"
    config = RunConfig(
        method="num",
        surrogate=SurrogateConfig(dataset_path=str(dataset_path), model_path=str(model_path)),
    )

    with patch("dualperm.main.generate_dataset", return_value=Dataset(rows=rows, seed=0)):
        dataset = run_dataset(config, out=tmp_path / "runs")
    assert len(dataset) == 12
    assert dataset_path.is_file()

    model = run_train_surrogate(config, out=tmp_path / "runs")
    assert model_path.is_file()
    assert model.dataset_hash == dataset.dataset_hash


def test_run_train_surrogate_requires_dataset_path(tmp_path):
    """Test the missing dataset path error."""
    with pytest.raises(RunConfigError):
        run_train_surrogate(RunConfig(method="num", surrogate=SurrogateConfig()), out=tmp_path)
    with pytest.raises(RunConfigError):
        run_train_surrogate(RunConfig(method="num"), out=tmp_path)
