"""
Physics Service - PINN and Hybrid Training Runs.

Builds the benchmark cells, trains the network (pure PINN or coupled to the
coarse Stokes-Brinkman field) and emits the trace, the parameter checkpoint
and the final coarse field.
"""

from pathlib import Path
from typing import Callable, List, Optional

from dualperm.config.paths import CHECKPOINT_FILE, TRACE_FILE
from dualperm.config.run_schemas import RunConfig
from dualperm.config.solver_schemas import GeometryConfig, SamplingConfig
from dualperm.geometry.cells import build_meso_cell, tow_fvc
from dualperm.hybrid.trainer import TrainingResult, hybrid_train, pinn_train
from dualperm.neural.checkpoint import save_checkpoint
from dualperm.pipelines.common import (
    Stopwatch,
    benchmark_band,
    build_micro,
    geometry_fields,
    load_emulator,
    provenance,
    save_geometry,
)
from dualperm.pipelines.report import ReportRow
from dualperm.solvers.export import export_flow_state, load_flow_state
from dualperm.surrogate.dataset import FeatureVector
from dualperm.utils.logger import get_logger

logger = get_logger(__name__)

COARSE_FIELD_FILE = "coarse_field.npz"


class PhysicsService:
    """Network training for method 'pinn' or 'hybrid'.

    Args:
        config: Validated run config; needs the arch and hybrid sections.
        run_dir: Directory for emitted files.
        deterministic: Null wall times in the trace and report.
    """

    def __init__(self, config: RunConfig, run_dir: Path, deterministic: bool = False) -> None:
        config.require("arch", "hybrid")
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
        config = self.config
        geometry = geometry or config.geometry
        micro = build_micro(geometry, seed)
        reference = load_flow_state(config.reference_path) if config.reference_path else None
        common = dict(
            solver_config=config.solver,
            sampling=config.sampling or SamplingConfig(),
            reference=reference,
            cancellation_check=cancellation_check,
            deterministic=self.deterministic,
            **provenance(config),
        )

        timer = Stopwatch(self.deterministic)
        with timer.running():
            if config.method == "hybrid":
                k_init = self._initial_permeability(micro)
                result = hybrid_train(
                    micro,
                    build_meso_cell(geometry.porous_box, k_init),
                    config.hybrid,
                    config.arch,
                    seed,
                    surrogate_init=k_init,
                    coarse_grid_n=geometry.meso_grid_n,
                    **common,
                )
            else:
                result = pinn_train(micro, config.hybrid, config.arch, seed, **common)

        self._emit(result, micro)
        errors = (result.trace.last.errors if result.trace.last else None) or {}
        published = benchmark_band(geometry)
        row = ReportRow(
            method=config.method,
            seed=seed,
            k_hat=result.k_hat,
            band_low=published[0] if published else None,
            band_high=published[1] if published else None,
            in_band=None if published is None else published[0] <= result.k_hat <= published[1],
            error_u1=errors.get("u1"),
            error_u2=errors.get("u2"),
            error_p=errors.get("p"),
            runtime_s=timer.reading,
            **geometry_fields(micro),
            **provenance(config),
        )
        logger.info("Training run finished", extra={"extra_fields": row.model_dump()})
        return row

    # ------------------------------
    # Internal functions
    # ------------------------------
    def _initial_permeability(self, micro) -> float:
        """Initial tow permeability: micro_k, else the emulator, else the config default."""
        if self.config.micro_k is not None:
            return self.config.micro_k
        model = load_emulator(self.config)
        if model is None or not micro.fibers:
            return self.config.hybrid.k_init
        features = FeatureVector(fvc=tow_fvc(micro), radius=float(micro.radii.mean()))
        return float(model.predict(features)[0, 0])

    def _emit(self, result: TrainingResult, micro) -> None:
        result.trace.to_ndjson(self.run_dir / TRACE_FILE)
        save_checkpoint(result.params, self.run_dir / CHECKPOINT_FILE)
        self.files += [TRACE_FILE, CHECKPOINT_FILE, save_geometry(micro, self.run_dir)]
        if result.coarse_state is not None:
            export_flow_state(result.coarse_state, self.run_dir / COARSE_FIELD_FILE)
            self.files.append(COARSE_FIELD_FILE)
