"""
Shared Pipeline Helpers.

Geometry construction from a RunConfig, micro-permeability resolution and the
row fields every service fills in the same way.
"""

import time
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Dict, Iterator, Optional, Tuple

from dualperm import __version__
from dualperm.config.constants import BENCHMARK_25, BENCHMARK_36, BENCHMARK_TOW_BOX, REFERENCE_K11
from dualperm.config.paths import GEOMETRY_FILE
from dualperm.config.run_schemas import RunConfig
from dualperm.config.solver_schemas import GeometryConfig
from dualperm.geometry.cells import MicroCell, build_micro_cell, tow_fvc
from dualperm.solvers.grid import Grid
from dualperm.surrogate.dataset import FeatureVector
from dualperm.surrogate.emulator import EmulatorModel
from dualperm.upscaling.averaging import averaging_box_for
from dualperm.upscaling.darcy import PermeabilityEstimate, permeability_with_band
from dualperm.utils.hashing import config_hash
from dualperm.utils.logger import get_logger

logger = get_logger(__name__)


def build_micro(geometry: GeometryConfig, seed: int) -> MicroCell:
    """Resolved tow cell of a geometry; the meso cell is built once its K is known."""
    return build_micro_cell(geometry.n_side, geometry.radius, geometry.tow_box, seed=seed)


def micro_estimate(
    config: RunConfig,
    micro: MicroCell,
    grid_n: Optional[int] = None,
    cancellation_check: Optional[Callable[[], bool]] = None,
) -> PermeabilityEstimate:
    """Resolved micro solve with its l_p band."""
    return permeability_with_band(
        micro,
        Grid(grid_n or config.geometry.micro_grid_n),
        config.solver,
        two_directions=config.two_directions,
        base_box=averaging_box_for(micro.tow_box).as_tuple(),
        cancellation_check=cancellation_check,
    )


def load_emulator(config: RunConfig) -> Optional[EmulatorModel]:
    if config.surrogate is None or not config.surrogate.model_path:
        return None
    path = Path(config.surrogate.model_path)
    if not path.is_file():
        logger.warning("Emulator model not found", extra={"extra_fields": {"path": str(path)}})
        return None
    return EmulatorModel.load(path)


def resolve_micro_k(
    config: RunConfig,
    micro: MicroCell,
    cancellation_check: Optional[Callable[[], bool]] = None,
) -> Tuple[float, str, Optional[PermeabilityEstimate]]:
    """Tow permeability from, in order: config.micro_k, the emulator, a micro solve.

    Returns:
        (k11, source, estimate); estimate is set only for a micro solve.
    """
    if config.micro_k is not None:
        return config.micro_k, "config", None

    model = load_emulator(config)
    if model is not None and micro.fibers:
        features = FeatureVector(fvc=tow_fvc(micro), radius=float(micro.radii.mean()))
        return float(model.predict(features)[0, 0]), "surrogate", None

    estimate = micro_estimate(config, micro, cancellation_check=cancellation_check)
    return estimate.k11, "reference", estimate


def benchmark_band(geometry: GeometryConfig) -> Optional[Tuple[float, float]]:
    """Published K11 band when the geometry is one of the two benchmarks."""
    if tuple(geometry.tow_box) != BENCHMARK_TOW_BOX:
        return None
    for layout in (BENCHMARK_25, BENCHMARK_36):
        if geometry.n_side == layout["n_side"] and geometry.radius == layout["radius"]:
            value, half_width = REFERENCE_K11[layout["n_side"] ** 2]
            return value - half_width, value + half_width
    return None


def provenance(config: RunConfig) -> Dict[str, str]:
    return {"config_hash": config_hash(config), "code_version": __version__}


def geometry_fields(micro: MicroCell) -> Dict[str, object]:
    return {
        "n_fibers": len(micro.fibers),
        "fvc": tow_fvc(micro),
        "radius": float(micro.radii.mean()) if micro.fibers else None,
    }


def save_geometry(micro: MicroCell, run_dir: Path) -> str:
    micro.save(Path(run_dir) / GEOMETRY_FILE)
    return GEOMETRY_FILE


class Stopwatch:
    """Wall-clock timer whose reading is None in deterministic runs."""

    def __init__(self, deterministic: bool = False) -> None:
        self.deterministic = deterministic
        self.elapsed: float = 0.0

    @contextmanager
    def running(self) -> Iterator["Stopwatch"]:
        started = time.perf_counter()
        try:
            yield self
        finally:
            self.elapsed = time.perf_counter() - started

    @property
    def reading(self) -> Optional[float]:
        return None if self.deterministic else self.elapsed
