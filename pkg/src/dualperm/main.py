"""
dualperm Pipeline Orchestration.

Entry points shared by the CLI and the run service. A run goes through three
steps:

1. Preparing the run: runtime threads, deterministic mode, run directory
2. Running the method service for every seed
3. Writing report.csv and manifest.json

Sweeps, dataset generation and emulator training follow the same pattern with
their own middle step. Every step is wrapped by `pipeline_step` for uniform
logging and error handling.
"""

from contextlib import ExitStack, contextmanager
from functools import wraps
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Union

import torch

from dualperm.config.paths import DATASET_FILE, MODEL_FILE, PLOT_DATA_FILE, REPORT_FILE, run_directory
from dualperm.config.run_schemas import RunConfig, SurrogateConfig
from dualperm.pipelines import SERVICES, ComparisonReport, ReportRow, sweep_and_report, write_rows
from dualperm.pipelines.sweep import RUNS_FILE
from dualperm.surrogate.dataset import Dataset, generate_dataset
from dualperm.surrogate.emulator import EmulatorModel, train_emulator
from dualperm.utils.exceptions import CancellationError, RunConfigError
from dualperm.utils.hashing import config_hash, write_manifest
from dualperm.utils.logger import get_logger, log_performance, set_correlation_id

logger = get_logger(__name__)

ProgressCallback = Callable[[str, str], None]


def check_cancellation(
    cancellation_check: Optional[Callable[[], bool]], context: str
) -> None:
    """Raise CancellationError if the cancellation check fires.

    Args:
        cancellation_check: Returns True when the run should stop. None disables
            the check.
        context: Where the check happens (e.g. "before start").

    Raises:
        CancellationError: If cancellation_check returns True.
    """
    if cancellation_check and cancellation_check():
        raise CancellationError(f"Pipeline cancelled {context}")


def pipeline_step(step_name: str, step_number: int, total_steps: int):
    """Decorator for pipeline steps with uniform logging and error handling.

    Logs start and completion through log_performance. Any failure is logged
    and re-raised as RuntimeError chained to the original exception, except
    CancellationError, which passes through unchanged.

    Args:
        step_name: Human-readable step name (e.g. "Running hybrid").
        step_number: 1-indexed position of the step.
        total_steps: Number of steps in the pipeline.

    Example:
        @pipeline_step("Writing report", 3, 3)
        def _step3_report():
            return write_rows(rows, run_dir / REPORT_FILE)
    """

    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(*args, **kwargs) -> Any:
            fields = {
                "step_name": step_name,
                "step_number": step_number,
                "total_steps": total_steps,
            }
            with log_performance("pipeline_step", **fields):
                try:
                    result = func(*args, **kwargs)
                except CancellationError:
                    raise
                except Exception as e:
                    logger.error(
                        "Pipeline step failed",
                        extra={
                            "extra_fields": {
                                **fields,
                                "status": "error",
                                "error": str(e),
                                "error_type": type(e).__name__,
                            }
                        },
                        exc_info=True,
                    )
                    raise RuntimeError(
                        f"Step {step_number}/{total_steps}: {step_name} failed: {e}"
                    ) from e
                logger.info(
                    "Pipeline step completed",
                    extra={"extra_fields": {**fields, "status": "success"}},
                )
                return result

        return wrapper

    return decorator


@contextmanager
def runtime_settings(deterministic: bool = False, threads: Optional[int] = None) -> Iterator[None]:
    """Apply torch threading for one run and restore the previous settings on exit.

    Deterministic mode forces a single thread and deterministic kernels.
    """
    previous_threads = torch.get_num_threads()
    previous_deterministic = torch.are_deterministic_algorithms_enabled()
    try:
        if deterministic:
            torch.set_num_threads(1)
            torch.use_deterministic_algorithms(True)
        elif threads:
            torch.set_num_threads(threads)
        yield
    finally:
        torch.set_num_threads(previous_threads)
        torch.use_deterministic_algorithms(previous_deterministic)


def _progress(callback: Optional[ProgressCallback], phase: str, message: str) -> None:
    if callback:
        callback(phase, message)


def _base_dir(config: RunConfig, out: Optional[Union[str, Path]]) -> Optional[Union[str, Path]]:
    return out if out is not None else config.output_dir


def run_pipeline(
    config: RunConfig,
    seeds: Optional[Sequence[int]] = None,
    out: Optional[Union[str, Path]] = None,
    deterministic: bool = False,
    threads: Optional[int] = None,
    run_id: Optional[str] = None,
    progress_callback: Optional[ProgressCallback] = None,
    cancellation_check: Optional[Callable[[], bool]] = None,
) -> Dict[str, Any]:
    """Run one methodology for every seed.

    Each seed gets its own run directory with report.csv, manifest.json and the
    method's field, geometry and trace files.

    Args:
        config: Validated run config; config.method selects the service.
        seeds: Overrides config.seeds.
        out: Base output directory (defaults to config.output_dir, then
            DUALPERM_OUTPUT_DIR).
        deterministic: Single thread, deterministic torch kernels, null
            wall-clock fields.
        threads: torch intra-op threads when not deterministic.
        run_id: Correlation id for the logs.
        progress_callback: Receives (phase, message) updates.
        cancellation_check: Returns True when the run should stop.

    Returns:
        {"rows": [ReportRow, ...], "run_dirs": [Path, ...]}

    Raises:
        RunConfigError: If the method has no service.
        CancellationError: If cancelled.
        RuntimeError: If a step fails; chained to the underlying error.
    """
    if config.method not in SERVICES:
        raise RunConfigError(f"Unknown method '{config.method}'")
    digest = config_hash(config)
    set_correlation_id(run_id=run_id, config_hash=digest, method=config.method)
    seeds = list(seeds if seeds is not None else config.seeds)
    total = 3

    with ExitStack() as runtime:

        @pipeline_step("Preparing run", 1, total)
        def _step1_prepare() -> None:
            runtime.enter_context(runtime_settings(deterministic, threads))

        _step1_prepare()
        check_cancellation(cancellation_check, "before start")

        rows: List[ReportRow] = []
        run_dirs: List[Path] = []
        for seed in seeds:
            run_dir = run_directory(config.method, digest, seed, base=_base_dir(config, out))
            service = SERVICES[config.method](config, run_dir, deterministic=deterministic)
            _progress(progress_callback, "running", f"Running {config.method} with seed {seed}...")

            @pipeline_step(f"Running {config.method}", 2, total)
            def _step2_run() -> ReportRow:
                check_cancellation(cancellation_check, f"before seed {seed}")
                return service.run(seed, cancellation_check=cancellation_check)

            row = _step2_run()

            @pipeline_step("Writing report", 3, total)
            def _step3_report() -> None:
                write_rows([row], run_dir / REPORT_FILE)
                write_manifest(
                    run_dir,
                    config,
                    config.method,
                    seed,
                    [REPORT_FILE, *service.files],
                    extra={"result": row.model_dump(mode="json")},
                )

            _step3_report()
            rows.append(row)
            run_dirs.append(run_dir)

        _progress(progress_callback, "finished", "Run finished")
        logger.info(
            "Pipeline completed successfully",
            extra={"extra_fields": {"seeds": seeds, "run_dirs": [str(d) for d in run_dirs]}},
        )
        return {"rows": rows, "run_dirs": run_dirs}


def run_sweep(
    config: RunConfig,
    seeds: Optional[Sequence[int]] = None,
    out: Optional[Union[str, Path]] = None,
    deterministic: bool = False,
    threads: Optional[int] = None,
    run_id: Optional[str] = None,
    progress_callback: Optional[ProgressCallback] = None,
    cancellation_check: Optional[Callable[[], bool]] = None,
) -> ComparisonReport:
    """Multi-seed sweep over the sweep section's methods and fvc levels.

    Returns:
        The ComparisonReport; runs.csv, report.csv, plot_data.csv and
        manifest.json are written into one sweep directory.
    """
    digest = config_hash(config)
    set_correlation_id(run_id=run_id, config_hash=digest, method="sweep")
    run_dir = run_directory("sweep", digest, base=_base_dir(config, out))
    total = 3

    with ExitStack() as runtime:

        @pipeline_step("Preparing sweep", 1, total)
        def _step1_prepare() -> None:
            runtime.enter_context(runtime_settings(deterministic, threads))

        _step1_prepare()
        check_cancellation(cancellation_check, "before start")
        _progress(progress_callback, "running", "Running sweep...")

        @pipeline_step("Running sweep", 2, total)
        def _step2_sweep() -> ComparisonReport:
            return sweep_and_report(
                config,
                run_dir,
                seeds=seeds,
                deterministic=deterministic,
                cancellation_check=cancellation_check,
            )

        report = _step2_sweep()

        @pipeline_step("Writing manifest", 3, total)
        def _step3_manifest() -> None:
            write_manifest(
                run_dir,
                config,
                "sweep",
                None,
                [RUNS_FILE, REPORT_FILE, PLOT_DATA_FILE],
                extra={"seeds": list(seeds if seeds is not None else config.seeds)},
            )

        _step3_manifest()
        _progress(progress_callback, "finished", "Sweep finished")
        return report


def run_dataset(
    config: RunConfig,
    seed: Optional[int] = None,
    out: Optional[Union[str, Path]] = None,
    run_id: Optional[str] = None,
    progress_callback: Optional[ProgressCallback] = None,
    cancellation_check: Optional[Callable[[], bool]] = None,
) -> Dataset:
    """Label the surrogate grids with reference solves and write dataset.json.

    The dataset is also written to surrogate.dataset_path when that is set.
    """
    surrogate = config.surrogate or SurrogateConfig()
    digest = config_hash(config)
    seed = config.seeds[0] if seed is None else seed
    set_correlation_id(run_id=run_id, config_hash=digest, method="dataset")
    run_dir = run_directory("dataset", digest, seed, base=_base_dir(config, out))
    _progress(progress_callback, "running", "Generating dataset...")

    @pipeline_step("Generating dataset", 1, 2)
    def _step1_generate() -> Dataset:
        return generate_dataset(
            surrogate.fvc_grid,
            surrogate.radius_grid,
            surrogate.grid_n,
            seed=seed,
            solver_config=config.solver,
            cancellation_check=cancellation_check,
        )

    dataset = _step1_generate()

    @pipeline_step("Writing dataset", 2, 2)
    def _step2_write() -> None:
        dataset.save(run_dir / DATASET_FILE)
        if surrogate.dataset_path:
            dataset.save(surrogate.dataset_path)
        write_manifest(
            run_dir,
            config,
            "dataset",
            seed,
            [DATASET_FILE],
            extra={"rows": len(dataset), "dataset_hash": dataset.dataset_hash},
        )

    _step2_write()
    return dataset


def run_train_surrogate(
    config: RunConfig,
    out: Optional[Union[str, Path]] = None,
    run_id: Optional[str] = None,
    progress_callback: Optional[ProgressCallback] = None,
) -> EmulatorModel:
    """Fit the emulator on surrogate.dataset_path and write emulator.json.

    The model is also written to surrogate.model_path when that is set.

    Raises:
        RunConfigError: If no dataset path is configured.
    """
    config.require("surrogate")
    surrogate = config.surrogate
    if not surrogate.dataset_path:
        raise RunConfigError("train-surrogate requires surrogate.dataset_path")
    digest = config_hash(config)
    set_correlation_id(run_id=run_id, config_hash=digest, method="train-surrogate")
    run_dir = run_directory("surrogate", digest, base=_base_dir(config, out))
    _progress(progress_callback, "running", "Training emulator...")

    @pipeline_step("Training emulator", 1, 2)
    def _step1_train() -> EmulatorModel:
        dataset = Dataset.load(surrogate.dataset_path)
        return train_emulator(dataset, degree=surrogate.degree, folds=surrogate.folds)

    model = _step1_train()

    @pipeline_step("Writing emulator", 2, 2)
    def _step2_write() -> None:
        model.save(run_dir / MODEL_FILE)
        if surrogate.model_path:
            model.save(surrogate.model_path)
        write_manifest(
            run_dir,
            config,
            "train-surrogate",
            model.seed,
            [MODEL_FILE],
            extra={
                "degree": model.degree,
                "holdout_median_error": model.holdout_median_error,
                "dataset_hash": model.dataset_hash,
            },
        )

    _step2_write()
    return model
