"""
Network and Training Schemas.

Pydantic models for the physics-informed networks and the hybrid training loop.

Key Models:
    - ArchitectureConfig: Fourier feature width, hidden layers, embeddings and
      output constraints
    - AdamSchedule: Adam moments and the exponential learning-rate decay
    - LossWeights: initial weights of the five loss terms
    - HybridConfig: coupling cadence, annealing rates and permeability bounds
"""

from typing import Any, List, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from dualperm.config.constants import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_DECAY_EVERY,
    ADAM_DECAY_RATE,
    ADAM_EPS,
    ADAM_L0,
    COUPLING_EVERY,
    D_E,
    GAMMA_P,
    GAMMA_U,
    HIDDEN_WIDTHS,
    K_C,
    K_INIT,
    K_LB,
    K_MAX,
    K_UB,
    WEIGHT_SCALING_ALPHA,
)
from dualperm.config.solver_schemas import split_csv


class ArchitectureConfig(BaseModel):
    """Shape of the velocity and pressure networks.

    `velocity_embedding` / `pressure_embedding` select the input map applied
    before the Fourier feature layer. `pressure_multiplier` selects the
    factor that forces the pressure to vanish on the inlet and outlet.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    d_e: int = Field(default=D_E, gt=0)
    hidden_widths: List[int] = Field(default_factory=lambda: list(HIDDEN_WIDTHS))
    activation: Literal["tanh"] = "tanh"
    velocity_embedding: Literal["periodic_uv", "fourier"] = "periodic_uv"
    pressure_embedding: Literal["periodic_p", "fourier"] = "periodic_p"
    pressure_multiplier: Literal["inlet_outlet", "literal"] = "inlet_outlet"
    fourier_scale: float = Field(default=1.0, gt=0)

    @field_validator("hidden_widths", mode="before")
    @classmethod
    def parse_widths(cls, v: Any) -> Any:
        return split_csv(v)

    @field_validator("hidden_widths")
    @classmethod
    def validate_widths(cls, v: List[int]) -> List[int]:
        if not v or any(w <= 0 for w in v):
            raise ValueError("hidden_widths must be a nonempty list of positive integers")
        return v

    @field_validator("d_e")
    @classmethod
    def validate_d_e(cls, v: int) -> int:
        """The feature layer emits sin and cos halves, so d_E must be even."""
        if v % 2:
            raise ValueError(f"d_e must be even, got {v}")
        return v


class AdamSchedule(BaseModel):
    """Adam hyperparameters with l_k = l0 * decay_rate ** (k / decay_every)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    l0: float = Field(default=ADAM_L0, gt=0)
    beta1: float = Field(default=ADAM_BETA1, ge=0, lt=1)
    beta2: float = Field(default=ADAM_BETA2, ge=0, lt=1)
    eps: float = Field(default=ADAM_EPS, gt=0)
    decay_rate: float = Field(default=ADAM_DECAY_RATE, gt=0, le=1)
    decay_every: int = Field(default=ADAM_DECAY_EVERY, gt=0)


class LossWeights(BaseModel):
    """Weights of the residual, divergence, no-slip and coupling terms."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    lambda_r: float = Field(default=1.0, gt=0)
    lambda_div: float = Field(default=1.0, gt=0)
    lambda_b: float = Field(default=1.0, gt=0)
    lambda_u: float = Field(default=1.0, gt=0)
    lambda_p: float = Field(default=1.0, gt=0)

    def as_dict(self) -> dict:
        return {
            "r": self.lambda_r,
            "div": self.lambda_div,
            "b": self.lambda_b,
            "u": self.lambda_u,
            "p": self.lambda_p,
        }

    @classmethod
    def from_dict(cls, weights: dict) -> "LossWeights":
        return cls(**{f"lambda_{name}": float(value) for name, value in weights.items()})


class HybridConfig(BaseModel):
    """Hyperparameters of the hybrid dual-scale training loop."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    k_max: int = Field(default=K_MAX, ge=0)
    k_c: int = Field(default=K_C, ge=0)
    coupling_every: int = Field(default=COUPLING_EVERY, gt=0)
    gamma_u: float = Field(default=GAMMA_U, gt=0)
    gamma_p: float = Field(default=GAMMA_P, gt=0)
    k_init: float = Field(default=K_INIT, gt=0)
    k_lb: float = Field(default=K_LB, gt=0)
    k_ub: float = Field(default=K_UB, gt=0)
    adam: AdamSchedule = Field(default_factory=AdamSchedule)
    weights: LossWeights = Field(default_factory=LossWeights)
    weight_scaling_alpha: float = Field(default=WEIGHT_SCALING_ALPHA, ge=0, le=1)
    anchor_residual_weight: bool = True
    exact_pressure_drop: bool = False

    @model_validator(mode="after")
    def validate_bounds(self) -> "HybridConfig":
        """Check K_LB <= K_init <= K_UB and that T divides k_c."""
        if not (self.k_lb <= self.k_init <= self.k_ub):
            raise ValueError(
                f"Expected k_lb <= k_init <= k_ub, got {self.k_lb}, {self.k_init}, {self.k_ub}"
            )
        if self.k_c % self.coupling_every:
            raise ValueError(
                f"coupling_every ({self.coupling_every}) must divide k_c ({self.k_c})"
            )
        return self
