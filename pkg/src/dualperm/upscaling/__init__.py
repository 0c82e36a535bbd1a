"""Volume averaging and Darcy inversion.

Segment-wise bridging lives in dualperm.upscaling.bridging, which depends on
the surrogate package and is imported from there directly.
"""

from dualperm.upscaling.averaging import (
    AveragingWindow,
    averaging_box_for,
    fluid_mask,
    pressure_drop,
    volume_average_velocity,
)
from dualperm.upscaling.darcy import (
    DarcyMatrices,
    PermeabilityEstimate,
    darcy_scalar,
    darcy_tensor,
    meso_permeability,
    permeability_with_band,
)

__all__ = [
    "AveragingWindow",
    "averaging_box_for",
    "fluid_mask",
    "pressure_drop",
    "volume_average_velocity",
    "DarcyMatrices",
    "PermeabilityEstimate",
    "darcy_scalar",
    "darcy_tensor",
    "meso_permeability",
    "permeability_with_band",
]
