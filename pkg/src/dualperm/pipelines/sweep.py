"""
Seed Sweeps.

Runs each configured method over every fvc level (n_side at fixed mean
radius) and every seed, jitters the fiber radius per seed, and folds the
results into a ComparisonReport with plot data.
"""

from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Type

import numpy as np

from dualperm import __version__
from dualperm.config.paths import PLOT_DATA_FILE, REPORT_FILE
from dualperm.config.run_schemas import RunConfig, SweepConfig
from dualperm.config.solver_schemas import GeometryConfig
from dualperm.pipelines.frm import FrmService
from dualperm.pipelines.num import NumService
from dualperm.pipelines.report import FLOAT_FORMAT, ComparisonReport, ReportRow, plot_data, summarize, write_rows
from dualperm.pipelines.sbm import SbmService
from dualperm.utils.exceptions import CancellationError, DualPermError
from dualperm.utils.hashing import config_hash
from dualperm.utils.logger import get_logger

logger = get_logger(__name__)

SWEEP_SERVICES: Dict[str, Type] = {"num": NumService, "sbm": SbmService, "frm": FrmService}

RUNS_FILE = "runs.csv"


def jittered_geometry(geometry: GeometryConfig, n_side: int, seed: int, jitter: float) -> GeometryConfig:
    """Geometry at one sweep level with the radius scaled by U(1 - jitter, 1 + jitter).

    The jittered radius is capped so the lattice stays feasible.
    """
    scale = 1.0
    if jitter > 0:
        scale = float(np.random.default_rng(seed).uniform(1.0 - jitter, 1.0 + jitter))
    box_width = min(geometry.tow_box[1] - geometry.tow_box[0], geometry.tow_box[3] - geometry.tow_box[2])
    cap = 0.49 * box_width / max(n_side, 1)
    radius = min(geometry.radius * scale, cap)
    return geometry.model_copy(update={"n_side": n_side, "radius": radius})


def sweep_and_report(
    config: RunConfig,
    run_dir: Path,
    seeds: Optional[Sequence[int]] = None,
    deterministic: bool = False,
    cancellation_check: Optional[Callable[[], bool]] = None,
) -> ComparisonReport:
    """Run the sweep and write runs.csv, report.csv and plot_data.csv.

    A failed run is logged and skipped; the remaining runs still enter the
    statistics.

    config.micro_k is ignored: every fvc level resolves its own tow
    permeability.

    Args:
        config: RunConfig with a sweep section (defaults apply when absent).
        run_dir: Output directory.
        seeds: Overrides config.seeds.
        deterministic: Null runtimes so reruns are identical.
        cancellation_check: Polled between runs.

    Returns:
        The ComparisonReport.
    """
    sweep = config.sweep or SweepConfig()
    seeds = list(seeds if seeds is not None else config.seeds)
    run_dir = Path(run_dir)
    rows: List[ReportRow] = []

    run_config = config
    if config.micro_k is not None:
        logger.warning(
            "Sweep ignores micro_k",
            extra={"extra_fields": {"micro_k": config.micro_k, "n_side_levels": list(sweep.n_side_levels)}},
        )
        run_config = config.model_copy(update={"micro_k": None})

    for method in sweep.methods:
        service = SWEEP_SERVICES[method](run_config, run_dir, deterministic=deterministic)
        for n_side in sweep.n_side_levels:
            for seed in seeds:
                if cancellation_check and cancellation_check():
                    raise CancellationError(f"Sweep cancelled before {method} n_side={n_side} seed={seed}")
                geometry = jittered_geometry(config.geometry, n_side, seed, sweep.radius_jitter)
                try:
                    row = service.run(seed, geometry=geometry, cancellation_check=cancellation_check)
                except CancellationError:
                    raise
                except DualPermError as e:
                    logger.error(
                        "Sweep run failed",
                        extra={
                            "extra_fields": {
                                "method": method,
                                "n_side": n_side,
                                "seed": seed,
                                "error": str(e),
                                "error_type": type(e).__name__,
                            }
                        },
                    )
                    continue
                rows.append(row.model_copy(update={"parameter": float(n_side)}))

    report = summarize(rows, config_hash=config_hash(config), code_version=__version__)
    write_rows(rows, run_dir / RUNS_FILE)
    report.save(run_dir / REPORT_FILE)
    plot_data(report).to_csv(run_dir / PLOT_DATA_FILE, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info(
        "Sweep finished",
        extra={"extra_fields": {"runs": len(rows), "groups": len(report.rows)}},
    )
    return report
