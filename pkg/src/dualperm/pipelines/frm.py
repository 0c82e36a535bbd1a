"""
FRM Service - Fully Resolved Model.

No scale separation: one penalized Stokes solve of the whole cell with every
fiber resolved, upscaled with the superficial full-domain average. A cell
without fibers has no finite permeability and is reported as degenerate.
"""

from pathlib import Path
from typing import Callable, List, Optional

from dualperm.config.run_schemas import RunConfig
from dualperm.config.solver_schemas import GeometryConfig
from dualperm.pipelines.common import Stopwatch, build_micro, geometry_fields, provenance, save_geometry
from dualperm.pipelines.report import ReportRow
from dualperm.solvers.grid import Grid
from dualperm.solvers.stokes import solve_stokes_micro
from dualperm.upscaling.darcy import meso_permeability
from dualperm.utils.logger import get_logger

logger = get_logger(__name__)


class FrmService:
    """Fully resolved mesoscale permeability.

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
        self.files.append(save_geometry(micro, self.run_dir))

        if not micro.fibers:
            logger.warning(
                "FRM cell has no fibers; permeability is unbounded",
                extra={"extra_fields": {"seed": seed}},
            )
            return ReportRow(
                method="frm",
                seed=seed,
                degenerate=True,
                **geometry_fields(micro),
                **provenance(self.config),
            )

        timer = Stopwatch(self.deterministic)
        with timer.running():
            state = solve_stokes_micro(
                micro, Grid(geometry.micro_grid_n), self.config.solver, cancellation_check=cancellation_check
            )
            k_meso = meso_permeability(state, self.config.solver)

        row = ReportRow(
            method="frm",
            seed=seed,
            k_meso=k_meso,
            runtime_s=timer.reading,
            **geometry_fields(micro),
            **provenance(self.config),
        )
        logger.info("FRM run finished", extra={"extra_fields": row.model_dump()})
        return row
