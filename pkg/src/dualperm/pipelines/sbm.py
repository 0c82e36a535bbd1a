"""
SBM Service - Segment-Wise Scale Bridging.

The tow is cut into a regular grid of segments; each segment's fiber volume
content and radius go through the emulator (or a pinned value) and the
resulting piecewise permeability field drives the mesoscale Stokes-Brinkman
solve.
"""

import warnings
from pathlib import Path
from typing import Callable, List, Optional

from dualperm.config.run_schemas import RunConfig
from dualperm.config.solver_schemas import GeometryConfig
from dualperm.geometry.cells import build_meso_cell
from dualperm.geometry.segments import SegmentGrid, decompose_segments
from dualperm.pipelines.common import (
    Stopwatch,
    build_micro,
    geometry_fields,
    load_emulator,
    provenance,
    save_geometry,
)
from dualperm.pipelines.report import ReportRow
from dualperm.solvers.grid import Grid
from dualperm.solvers.stokes import solve_stokes_brinkman
from dualperm.surrogate.emulator import EmulatorModel
from dualperm.upscaling.bridging import ConstantPredictor, PermeabilityPredictor, assign_segment_permeabilities
from dualperm.upscaling.darcy import meso_permeability
from dualperm.utils.exceptions import ExtrapolationWarning, RunConfigError
from dualperm.utils.logger import get_logger

logger = get_logger(__name__)


class SbmService:
    """Segment-wise data-driven mesoscale permeability.

    Args:
        config: Validated run config; needs surrogate.model_path or micro_k.
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
        predictor = self._predictor()

        if not micro.fibers:
            self.files.append(save_geometry(micro, self.run_dir))
            logger.warning(
                "SBM cell has no fibers; segment features are undefined",
                extra={"extra_fields": {"seed": seed}},
            )
            return ReportRow(
                method="sbm",
                seed=seed,
                degenerate=True,
                **geometry_fields(micro),
                **provenance(self.config),
            )

        timer = Stopwatch(self.deterministic)

        with timer.running():
            segments = decompose_segments(geometry.porous_box, micro, geometry.segments_x, geometry.segments_y)
            # Clamping is logged by the bridging step and counted below
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ExtrapolationWarning)
                field = assign_segment_permeabilities(segments, predictor)
            meso = build_meso_cell(geometry.porous_box, field)
            state = solve_stokes_brinkman(
                meso, Grid(geometry.meso_grid_n), self.config.solver, cancellation_check
            )
            k_meso = meso_permeability(state, self.config.solver)

        self.files.append(save_geometry(micro, self.run_dir))
        row = ReportRow(
            method="sbm",
            seed=seed,
            k_micro=float(field[..., 0, 0].mean()),
            k_micro_source="config" if isinstance(predictor, ConstantPredictor) else "surrogate",
            k_meso=k_meso,
            clamped_segments=self._count_clamped(segments, predictor),
            runtime_s=timer.reading,
            **geometry_fields(micro),
            **provenance(self.config),
        )
        logger.info("SBM run finished", extra={"extra_fields": row.model_dump()})
        return row

    # ------------------------------
    # Internal functions
    # ------------------------------
    def _predictor(self) -> PermeabilityPredictor:
        if self.config.micro_k is not None:
            return ConstantPredictor(self.config.micro_k)
        model = load_emulator(self.config)
        if model is None:
            raise RunConfigError("Method 'sbm' requires surrogate.model_path or micro_k")
        return model

    def _count_clamped(self, segments: SegmentGrid, predictor: PermeabilityPredictor) -> int:
        if not isinstance(predictor, EmulatorModel):
            return 0
        model = predictor
        lo, hi = model.fvc_bounds
        r_lo, r_hi = model.radius_bounds
        outside = (segments.fvc < lo) | (segments.fvc > hi) | (segments.radius < r_lo) | (segments.radius > r_hi)
        return int(outside.sum())
