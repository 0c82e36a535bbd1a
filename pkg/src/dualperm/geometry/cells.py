"""
Micro- and Mesoscale Cells.

A MicroCell is the periodic unit square perforated by circular fibers that sit
on a regular lattice inside the tow box. A MesoCell is the same square with the
tow replaced by a porous box carrying a piecewise-constant permeability field.

All geometry is dimensionless. MicroCell serializes to JSON with the fields
`domain`, `tow_box`, `fibers: [{cx, cy, r}]` and `seed`; Python floats
round-trip exactly through their JSON repr.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from dualperm.config.constants import BENCHMARK_POROUS_BOX
from dualperm.utils.exceptions import GeometryInfeasibleError, InvalidPermeabilityError

# Offsets of the cell and its 8 periodic neighbours
PERIODIC_OFFSETS = np.array(
    [[dx, dy] for dx in (-1.0, 0.0, 1.0) for dy in (-1.0, 0.0, 1.0)]
)

# Points per chunk in vectorized distance queries
_CHUNK = 8192


class Box(BaseModel):
    """Axis-aligned box [x_lo, x_hi] x [y_lo, y_hi]."""

    model_config = ConfigDict(frozen=True)

    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    @model_validator(mode="after")
    def validate_extent(self) -> "Box":
        if not (self.x_lo < self.x_hi and self.y_lo < self.y_hi):
            raise ValueError(f"Empty box: {self.as_tuple()}")
        return self

    @classmethod
    def from_tuple(cls, bounds: Sequence[float]) -> "Box":
        x_lo, x_hi, y_lo, y_hi = (float(b) for b in bounds)
        return cls(x_lo=x_lo, x_hi=x_hi, y_lo=y_lo, y_hi=y_hi)

    @classmethod
    def unit(cls) -> "Box":
        return cls(x_lo=0.0, x_hi=1.0, y_lo=0.0, y_hi=1.0)

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.x_lo, self.x_hi, self.y_lo, self.y_hi)

    @property
    def width(self) -> float:
        return self.x_hi - self.x_lo

    @property
    def height(self) -> float:
        return self.y_hi - self.y_lo

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, points: np.ndarray, closed: bool = True) -> np.ndarray:
        """Boolean mask of points (m, 2) inside the box."""
        points = np.atleast_2d(points)
        x, y = points[:, 0], points[:, 1]
        if closed:
            return (x >= self.x_lo) & (x <= self.x_hi) & (y >= self.y_lo) & (y <= self.y_hi)
        return (x > self.x_lo) & (x < self.x_hi) & (y > self.y_lo) & (y < self.y_hi)

    def inset(self, margin: float) -> "Box":
        """Shrink the box by margin on every side."""
        return Box(
            x_lo=self.x_lo + margin,
            x_hi=self.x_hi - margin,
            y_lo=self.y_lo + margin,
            y_hi=self.y_hi - margin,
        )

    def strictly_inside(self, other: "Box") -> bool:
        return (
            other.x_lo < self.x_lo
            and self.x_hi < other.x_hi
            and other.y_lo < self.y_lo
            and self.y_hi < other.y_hi
        )


class Fiber(BaseModel):
    """Circular fiber cross-section."""

    model_config = ConfigDict(frozen=True)

    cx: float
    cy: float
    r: float


class MicroCell(BaseModel):
    """Periodic unit cell with fiber perforations.

    Raises:
        GeometryInfeasibleError: On construction, if a fiber leaves the tow box,
            two fibers overlap (periodic images included), or the tow box is
            not strictly inside the domain.
    """

    model_config = ConfigDict(frozen=True)

    domain: Box = Box(x_lo=0.0, x_hi=1.0, y_lo=0.0, y_hi=1.0)
    tow_box: Box
    fibers: List[Fiber] = []
    periodic: bool = True
    seed: Optional[int] = None

    @model_validator(mode="after")
    def validate_layout(self) -> "MicroCell":
        if not self.tow_box.strictly_inside(self.domain):
            raise GeometryInfeasibleError(
                f"Tow box {self.tow_box.as_tuple()} is not strictly inside the domain"
            )

        box = self.tow_box
        for f in self.fibers:
            if f.r <= 0:
                raise GeometryInfeasibleError(f"Fiber at ({f.cx}, {f.cy}) has radius {f.r}")
            slack = min(f.cx - box.x_lo, box.x_hi - f.cx, f.cy - box.y_lo, box.y_hi - f.cy)
            if slack < f.r - 1e-14:
                raise GeometryInfeasibleError(
                    f"Fiber at ({f.cx}, {f.cy}) with r={f.r} protrudes from the tow box"
                )

        centers, radii = self.centers, self.radii
        for i in range(len(self.fibers)):
            for j in range(i + 1, len(self.fibers)):
                d = np.abs(centers[i] - centers[j])
                d = np.minimum(d, 1.0 - d)
                if math.hypot(d[0], d[1]) < radii[i] + radii[j] - 1e-14:
                    raise GeometryInfeasibleError(f"Fibers {i} and {j} overlap")
        return self

    @property
    def centers(self) -> np.ndarray:
        return np.array([[f.cx, f.cy] for f in self.fibers], dtype=float).reshape(-1, 2)

    @property
    def radii(self) -> np.ndarray:
        return np.array([f.r for f in self.fibers], dtype=float)

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.write_text(self.to_json(), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "MicroCell":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class MesoCell:
    """Unit square with a porous box carrying segment-wise permeability tensors.

    Attributes:
        porous_box: The porous region Z^P; the rest of the domain is fluid.
        tensors: Array (n_y, n_x, 2, 2) of SPD tensors, one per segment of a
            regular n_x by n_y tiling of porous_box.
    """

    porous_box: Box
    tensors: np.ndarray
    domain: Box = field(default_factory=Box.unit)

    def __post_init__(self):
        tensors = np.asarray(self.tensors, dtype=float)
        if tensors.ndim != 4 or tensors.shape[2:] != (2, 2):
            raise InvalidPermeabilityError(
                f"Permeability field must have shape (n_y, n_x, 2, 2), got {tensors.shape}"
            )
        for idx in np.ndindex(tensors.shape[:2]):
            check_spd(tensors[idx], label=f"segment {idx}")
        object.__setattr__(self, "tensors", tensors)

    @property
    def n_x(self) -> int:
        return self.tensors.shape[1]

    @property
    def n_y(self) -> int:
        return self.tensors.shape[0]

    def segment_index(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Map points to (inside_mask, ix, iy) segment indices."""
        points = np.atleast_2d(points)
        box = self.porous_box
        inside = box.contains(points, closed=False)
        ix = np.floor((points[:, 0] - box.x_lo) / box.width * self.n_x).astype(int)
        iy = np.floor((points[:, 1] - box.y_lo) / box.height * self.n_y).astype(int)
        return inside, np.clip(ix, 0, self.n_x - 1), np.clip(iy, 0, self.n_y - 1)

    def drag_at(self, points: np.ndarray, mu: float) -> np.ndarray:
        """Brinkman drag mu * K^-1 at points, zero in the fluid region.

        Returns:
            Array (m, 2, 2).
        """
        inside, ix, iy = self.segment_index(points)
        inverse = np.linalg.inv(self.tensors)
        drag = np.zeros((len(inside), 2, 2))
        drag[inside] = mu * inverse[iy[inside], ix[inside]]
        return drag


def check_spd(tensor: np.ndarray, label: str = "tensor") -> None:
    """Raise InvalidPermeabilityError unless tensor is symmetric positive definite."""
    tensor = np.asarray(tensor, dtype=float)
    if not np.all(np.isfinite(tensor)):
        raise InvalidPermeabilityError(f"{label} has non-finite entries")
    if not np.allclose(tensor, tensor.T, rtol=1e-10, atol=0.0):
        raise InvalidPermeabilityError(f"{label} is not symmetric: {tensor.tolist()}")
    if np.linalg.eigvalsh(tensor).min() <= 0.0:
        raise InvalidPermeabilityError(f"{label} is not positive definite: {tensor.tolist()}")


# ------------------------------
# Construction
# ------------------------------


def build_micro_cell(
    n_side: int, radius: float, tow_box: Union[Box, Sequence[float]], seed: Optional[int] = None
) -> MicroCell:
    """Place n_side^2 fibers on a regular lattice centered in the tow box.

    The lattice pitch is tow_width / n_side; fiber i sits at the center of
    lattice cell i, so the layout is mirror symmetric about the tow midlines.

    Args:
        n_side: Fibers per lattice row (0 gives an empty cell).
        radius: Fiber radius.
        tow_box: Box or (x_lo, x_hi, y_lo, y_hi).
        seed: Recorded with the geometry for run provenance.

    Returns:
        The MicroCell.

    Raises:
        GeometryInfeasibleError: If the pitch does not exceed 2 * radius.
    """
    box = tow_box if isinstance(tow_box, Box) else Box.from_tuple(tow_box)
    if n_side < 0:
        raise GeometryInfeasibleError(f"n_side must be >= 0, got {n_side}")

    fibers: List[Fiber] = []
    if n_side > 0:
        pitch_x, pitch_y = box.width / n_side, box.height / n_side
        if min(pitch_x, pitch_y) <= 2.0 * radius:
            raise GeometryInfeasibleError(
                f"Lattice pitch {min(pitch_x, pitch_y):.4g} does not exceed 2r = {2 * radius:.4g}"
            )
        for j in range(n_side):
            for i in range(n_side):
                fibers.append(
                    Fiber(
                        cx=box.x_lo + (i + 0.5) * pitch_x,
                        cy=box.y_lo + (j + 0.5) * pitch_y,
                        r=radius,
                    )
                )
    return MicroCell(tow_box=box, fibers=fibers, seed=seed)


def lattice_for_fvc(fvc: float, radius: float, n_side: int) -> MicroCell:
    """Build a lattice cell whose tow box realizes (fvc, radius) exactly.

    The tow box is the centered square of side n_side * radius * sqrt(pi / fvc).

    Raises:
        GeometryInfeasibleError: If the box would not fit in the domain or the
            fibers would touch.
    """
    if not (0.0 < fvc < 1.0) or n_side <= 0:
        raise GeometryInfeasibleError(f"Cannot realize fvc={fvc} with n_side={n_side}")
    side = n_side * radius * math.sqrt(math.pi / fvc)
    if side >= 1.0:
        raise GeometryInfeasibleError(
            f"Tow box side {side:.4g} for fvc={fvc}, r={radius}, n_side={n_side} exceeds the domain"
        )
    half = 0.5 * side
    return build_micro_cell(n_side, radius, Box(x_lo=0.5 - half, x_hi=0.5 + half, y_lo=0.5 - half, y_hi=0.5 + half))


def n_side_for(fvc: float, radius: float, target_width: float = 0.44) -> int:
    """Lattice size whose realizing tow box is closest to target_width."""
    return max(1, int(round(target_width * math.sqrt(fvc / math.pi) / radius)))


def build_meso_cell(
    porous_box: Union[Box, Sequence[float]] = BENCHMARK_POROUS_BOX,
    permeability: Union[float, np.ndarray] = 1.0,
) -> MesoCell:
    """Build a MesoCell with a uniform or segment-wise permeability field.

    Args:
        porous_box: Box or (x_lo, x_hi, y_lo, y_hi).
        permeability: A scalar K (gives K * I), a 2x2 tensor, or an
            (n_y, n_x, 2, 2) field.

    Raises:
        InvalidPermeabilityError: If a tensor is not SPD.
    """
    box = porous_box if isinstance(porous_box, Box) else Box.from_tuple(porous_box)
    field_ = np.asarray(permeability, dtype=float)
    if field_.ndim == 0:
        field_ = float(field_) * np.eye(2)
    if field_.ndim == 2:
        field_ = field_.reshape(1, 1, 2, 2)
    return MesoCell(porous_box=box, tensors=field_)


# ------------------------------
# Queries
# ------------------------------


def signed_distance(cell: MicroCell, x: np.ndarray) -> Union[float, np.ndarray]:
    """Distance to the nearest fiber surface, negative inside a fiber.

    Minimum over all fibers and their 8 periodic images of |x - c| - r.

    Args:
        cell: The MicroCell.
        x: One point (2,) or an array of points (m, 2).

    Returns:
        A float for a single point, else an array (m,). +inf for an empty cell.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    points = np.atleast_2d(x)

    if not cell.fibers:
        out = np.full(len(points), np.inf)
        return float(out[0]) if single else out

    images = (cell.centers[:, None, :] + PERIODIC_OFFSETS[None, :, :]).reshape(-1, 2)
    image_radii = np.repeat(cell.radii, len(PERIODIC_OFFSETS))

    out = np.empty(len(points))
    for start in range(0, len(points), _CHUNK):
        chunk = points[start : start + _CHUNK]
        diff = chunk[:, None, :] - images[None, :, :]
        dist = np.hypot(diff[..., 0], diff[..., 1]) - image_radii[None, :]
        out[start : start + _CHUNK] = dist.min(axis=1)
    return float(out[0]) if single else out


def tow_fvc(cell: MicroCell) -> float:
    """Fiber area fraction of the tow box."""
    if not cell.fibers:
        return 0.0
    return float(np.sum(np.pi * cell.radii**2) / cell.tow_box.area)
