"""
Reference Service - Resolved Micropermeability.

Solves penalized Stokes flow through the resolved tow on the fine grid,
inverts Darcy's law over the averaging window and records the l_p band. The
fine-grid field is exported so training runs can measure their errors against
it.
"""

from pathlib import Path
from typing import Callable, List, Optional

from dualperm.config.run_schemas import RunConfig
from dualperm.config.solver_schemas import GeometryConfig
from dualperm.pipelines.common import (
    Stopwatch,
    benchmark_band,
    build_micro,
    geometry_fields,
    provenance,
    save_geometry,
)
from dualperm.pipelines.report import ReportRow
from dualperm.solvers.export import export_flow_state
from dualperm.solvers.grid import Grid
from dualperm.solvers.stokes import solve_stokes_micro
from dualperm.upscaling.averaging import averaging_box_for
from dualperm.upscaling.darcy import permeability_with_band
from dualperm.utils.logger import get_logger

logger = get_logger(__name__)

REFERENCE_FIELD_FILE = "reference_field.npz"


class ReferenceService:
    """Fine-grid micro solve with Darcy upscaling.

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
            grid = Grid(geometry.micro_grid_n)
            state = solve_stokes_micro(micro, grid, self.config.solver, cancellation_check=cancellation_check)
            estimate = permeability_with_band(
                micro,
                grid,
                self.config.solver,
                two_directions=self.config.two_directions,
                state=state,
                base_box=averaging_box_for(micro.tow_box).as_tuple(),
                cancellation_check=cancellation_check,
            )

        export_flow_state(state, self.run_dir / REFERENCE_FIELD_FILE)
        self.files += [REFERENCE_FIELD_FILE, save_geometry(micro, self.run_dir)]

        published = benchmark_band(geometry)
        row = ReportRow(
            method="reference",
            seed=seed,
            k_micro=estimate.k11,
            k_micro_source="reference",
            band_low=estimate.band_low,
            band_high=estimate.band_high,
            in_band=None if published is None else published[0] <= estimate.k11 <= published[1],
            runtime_s=timer.reading,
            **geometry_fields(micro),
            **provenance(self.config),
        )
        logger.info("Reference run finished", extra={"extra_fields": row.model_dump()})
        return row
