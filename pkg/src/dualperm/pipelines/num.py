"""
NUM Service - Numerical Upscaling with a Uniform Tow.

Every tow in the mesoscale cell carries one micropermeability, taken from the
config, the emulator or a resolved micro solve. A Stokes-Brinkman solve of the
mesoscale cell then gives K[Z].
"""

from pathlib import Path
from typing import Callable, List, Optional

from dualperm.config.run_schemas import RunConfig
from dualperm.config.solver_schemas import GeometryConfig
from dualperm.geometry.cells import build_meso_cell
from dualperm.pipelines.common import (
    Stopwatch,
    build_micro,
    geometry_fields,
    provenance,
    resolve_micro_k,
    save_geometry,
)
from dualperm.pipelines.report import ReportRow
from dualperm.solvers.grid import Grid
from dualperm.solvers.stokes import solve_stokes_brinkman
from dualperm.upscaling.darcy import meso_permeability
from dualperm.utils.logger import get_logger

logger = get_logger(__name__)


class NumService:
    """Uniform-tow mesoscale permeability.

    Args:
        config: Validated run config.
        run_dir: Directory for emitted files.
        deterministic: Report runtime as None.
    """

    def __init__(self, config: RunConfig, run_dir: Path, deterministic: bool = False) -> None:
        self.config = config
        self.run_dir = Path(run_dir)
        self.deterministic = deterministic
        self.files: List[str] = []

    # ------------------------------
    # Public interface
    # ------------------------------
    def run(
        self,
        seed: int,
        geometry: Optional[GeometryConfig] = None,
        cancellation_check: Optional[Callable[[], bool]] = None,
    ) -> ReportRow:
        geometry = geometry or self.config.geometry
        micro = build_micro(geometry, seed)
        timer = Stopwatch(self.deterministic)

        with timer.running():
            k_tow, source, estimate = resolve_micro_k(self.config, micro, cancellation_check)
            meso = build_meso_cell(geometry.porous_box, k_tow)
            state = solve_stokes_brinkman(
                meso, Grid(geometry.meso_grid_n), self.config.solver, cancellation_check
            )
            k_meso = meso_permeability(state, self.config.solver)

        self.files.append(save_geometry(micro, self.run_dir))
        row = ReportRow(
            method="num",
            seed=seed,
            k_micro=k_tow,
            k_micro_source=source,
            band_low=estimate.band_low if estimate else None,
            band_high=estimate.band_high if estimate else None,
            k_meso=k_meso,
            runtime_s=timer.reading,
            **geometry_fields(micro),
            **provenance(self.config),
        )
        logger.info("NUM run finished", extra={"extra_fields": row.model_dump()})
        return row
