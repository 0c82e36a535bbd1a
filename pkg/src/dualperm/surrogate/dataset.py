"""
Surrogate Training Data.

A Dataset is a list of (features, K11) rows produced by the reference solver:
every (fvc, radius) pair of the requested grids is realized as a regular
lattice cell, solved, and upscaled. Datasets persist as JSON with their seed
and a content hash.
"""

import itertools
import json
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from dualperm.config.constants import FVC_MAX
from dualperm.config.solver_schemas import SolverConfig
from dualperm.geometry.cells import lattice_for_fvc, n_side_for
from dualperm.solvers.grid import Grid
from dualperm.upscaling.averaging import averaging_box_for
from dualperm.upscaling.darcy import permeability_with_band
from dualperm.utils.exceptions import CancellationError, DualPermError
from dualperm.utils.hashing import records_hash
from dualperm.utils.logger import get_logger

logger = get_logger(__name__)


class FeatureVector(BaseModel):
    """Structural features of a fiber segment."""

    model_config = ConfigDict(frozen=True)

    fvc: float = Field(gt=0, lt=FVC_MAX)
    radius: float = Field(gt=0)
    orientation: float = 0.0


class DatasetRow(BaseModel):
    """One labelled row."""

    model_config = ConfigDict(frozen=True)

    features: FeatureVector
    k11: float = Field(gt=0)
    metadata: Dict[str, Any] = Field(default_factory=dict)


class Dataset(BaseModel):
    """Labelled rows; feature tuples are unique."""

    rows: List[DatasetRow] = Field(default_factory=list)
    seed: int = 0

    @model_validator(mode="after")
    def validate_unique(self) -> "Dataset":
        seen = set()
        for row in self.rows:
            key = (row.features.fvc, row.features.radius, row.features.orientation)
            if key in seen:
                raise ValueError(f"Duplicate feature row {key}")
            seen.add(key)
        return self

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def dataset_hash(self) -> str:
        return records_hash(
            [
                [r.features.fvc, r.features.radius, r.features.orientation, r.k11]
                for r in self.rows
            ]
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "fvc": r.features.fvc,
                    "radius": r.features.radius,
                    "orientation": r.features.orientation,
                    "k11": r.k11,
                    **r.metadata,
                }
                for r in self.rows
            ]
        )

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        payload = self.model_dump(mode="json")
        payload["dataset_hash"] = self.dataset_hash
        path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Dataset":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        data.pop("dataset_hash", None)
        return cls.model_validate(data)


def generate_dataset(
    fvc_grid: Sequence[float],
    radius_grid: Sequence[float],
    grid_n: int,
    seed: int = 0,
    solver_config: Optional[SolverConfig] = None,
    cancellation_check: Optional[Callable[[], bool]] = None,
) -> Dataset:
    """Label every realizable (fvc, radius) pair with a reference K11.

    Args:
        fvc_grid: Fiber area fractions.
        radius_grid: Fiber radii.
        grid_n: Resolution of each reference solve.
        seed: Recorded with the dataset.
        solver_config: Solver parameters; defaults to SolverConfig().
        cancellation_check: Polled between rows.

    Returns:
        The Dataset. Infeasible pairs are skipped with a logged reason.
    """
    config = solver_config or SolverConfig()
    grid = Grid(grid_n)
    rows: List[DatasetRow] = []

    for fvc, radius in itertools.product(fvc_grid, radius_grid):
        if cancellation_check and cancellation_check():
            raise CancellationError("Dataset generation cancelled")
        try:
            n_side = n_side_for(fvc, radius)
            cell = lattice_for_fvc(fvc, radius, n_side)
            estimate = permeability_with_band(
                cell, grid, config, base_box=averaging_box_for(cell.tow_box).as_tuple()
            )
        except DualPermError as e:
            logger.warning(
                "Skipping dataset row",
                extra={"extra_fields": {"fvc": fvc, "radius": radius, "reason": str(e)}},
            )
            continue

        rows.append(
            DatasetRow(
                features=FeatureVector(fvc=fvc, radius=radius),
                k11=estimate.k11,
                metadata={
                    "n_side": n_side,
                    "grid_n": grid_n,
                    "band_low": estimate.band_low,
                    "band_high": estimate.band_high,
                },
            )
        )
        logger.info(
            "Dataset row labelled",
            extra={
                "extra_fields": {
                    "row": len(rows),
                    "fvc": fvc,
                    "radius": radius,
                    "n_side": n_side,
                    "k11": estimate.k11,
                }
            },
        )

    return Dataset(rows=rows, seed=seed)
