"""
Solver and Geometry Schemas.

Pydantic models for the grid-based flow solvers, the benchmark geometry and
collocation sampling. All models are frozen.

Key Models:
    - SolverConfig: viscosities, body force, penalization and stopping rules
    - GeometryConfig: fiber lattice, tow/porous boxes and grid resolutions
    - SamplingConfig: collocation counts and the interior split box

Note:
    Tuple and list fields also accept comma-separated strings so that values
    read from flat `key = value` run files validate without extra parsing.
"""

from typing import Any, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from dualperm.config.constants import (
    BENCHMARK_POROUS_BOX,
    BENCHMARK_TOW_BOX,
    BODY_FORCE,
    BUFFER_BOX,
    LINEAR_TOLERANCE,
    MAX_REJECTION_ROUNDS,
    MIN_GRID_N,
    PENALIZATION_PERMEABILITY,
    PERMEABILITY_STOP,
    POINTS_PER_EDGE,
    POINTS_PER_FIBER,
    SPLIT_25,
)


def split_csv(value: Any) -> Any:
    """Turn "a, b, c" into ["a", "b", "c"]; other values pass through."""
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


def check_box(box: Tuple[float, float, float, float]) -> Tuple[float, float, float, float]:
    """Validate an (x_lo, x_hi, y_lo, y_hi) box inside the unit square."""
    x_lo, x_hi, y_lo, y_hi = box
    if not (0.0 <= x_lo < x_hi <= 1.0 and 0.0 <= y_lo < y_hi <= 1.0):
        raise ValueError(f"Box {box} must be nonempty and inside [0, 1]^2")
    return box


class SolverConfig(BaseModel):
    """Parameters shared by the Stokes and Stokes-Brinkman solvers."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    mu: float = Field(default=1.0, gt=0)
    mu_tilde: float = Field(default=1.0, gt=0)
    body_force: Tuple[float, float] = BODY_FORCE
    penalization_permeability: float = Field(default=PENALIZATION_PERMEABILITY, gt=0)
    linear_tolerance: float = Field(default=LINEAR_TOLERANCE, gt=0)
    permeability_stop: float = Field(default=PERMEABILITY_STOP, gt=0, lt=1)
    max_cycles: int = Field(default=20, gt=0)

    @field_validator("body_force", mode="before")
    @classmethod
    def parse_body_force(cls, v: Any) -> Any:
        return split_csv(v)

    @field_validator("body_force")
    @classmethod
    def validate_body_force(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        """Reject a zero forcing; Darcy inversion divides by it."""
        if v[0] == 0.0 and v[1] == 0.0:
            raise ValueError("body_force must be nonzero")
        return v


class GeometryConfig(BaseModel):
    """Benchmark cell layout and the grid resolutions used to solve it."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_side: int = Field(default=5, ge=0)
    radius: float = Field(default=2.75e-2, gt=0)
    tow_box: Tuple[float, float, float, float] = BENCHMARK_TOW_BOX
    porous_box: Tuple[float, float, float, float] = BENCHMARK_POROUS_BOX
    micro_grid_n: int = Field(default=256, ge=MIN_GRID_N)
    meso_grid_n: int = Field(default=128, ge=MIN_GRID_N)
    segments_x: int = Field(default=5, gt=0)
    segments_y: int = Field(default=5, gt=0)

    @field_validator("tow_box", "porous_box", mode="before")
    @classmethod
    def parse_box(cls, v: Any) -> Any:
        return split_csv(v)

    @field_validator("tow_box", "porous_box")
    @classmethod
    def validate_box(cls, v: Tuple[float, float, float, float]):
        return check_box(v)


class SamplingConfig(BaseModel):
    """Collocation counts.

    The interior budget is split between the buffered tow (`inside_split`)
    and its complement (`outside_split`); both are exposed independently.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    inside_split: int = Field(default=SPLIT_25[0], gt=0)
    outside_split: int = Field(default=SPLIT_25[1], gt=0)
    points_per_edge: int = Field(default=POINTS_PER_EDGE, gt=0)
    points_per_fiber: int = Field(default=POINTS_PER_FIBER, gt=0)
    split_box: Tuple[float, float, float, float] = BUFFER_BOX
    max_rounds: int = Field(default=MAX_REJECTION_ROUNDS, gt=0)

    @field_validator("split_box", mode="before")
    @classmethod
    def parse_box(cls, v: Any) -> Any:
        return split_csv(v)

    @field_validator("split_box")
    @classmethod
    def validate_box(cls, v: Tuple[float, float, float, float]):
        return check_box(v)

    @property
    def n_interior(self) -> int:
        return self.inside_split + self.outside_split
