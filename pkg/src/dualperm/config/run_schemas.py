"""
Run Configuration Schemas and Loader.

This module defines the top-level RunConfig and the loader for flat run files.
A run file is a list of dotted `key = value` lines:

    method = hybrid
    seeds = 0,1,2
    geometry.n_side = 5
    hybrid.k_max = 25000
    hybrid.adam.l0 = 1e-3

Run files are read with python-dotenv's `dotenv_values`, un-flattened on dots,
and validated by RunConfig. JSON documents with the same nesting are accepted
as well.

Key Models:
    - SurrogateConfig: dataset grids and emulator fit settings
    - SweepConfig: methods and fvc levels of a seed sweep
    - RunConfig: one run of one methodology
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Union

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from dualperm.config.network_schemas import ArchitectureConfig, HybridConfig
from dualperm.config.solver_schemas import (
    GeometryConfig,
    SamplingConfig,
    SolverConfig,
    split_csv,
)
from dualperm.utils.exceptions import RunConfigError

METHODS = ("num", "sbm", "frm", "pinn", "hybrid", "reference")


class SurrogateConfig(BaseModel):
    """Dataset grids and emulator settings."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    fvc_grid: List[float] = Field(
        default_factory=lambda: [0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45]
    )
    radius_grid: List[float] = Field(default_factory=lambda: [0.02, 0.025, 0.03])
    grid_n: int = Field(default=128, ge=16)
    degree: int = Field(default=2, ge=1, le=2)
    folds: int = Field(default=5, ge=2)
    dataset_path: Optional[str] = None
    model_path: Optional[str] = None

    @field_validator("fvc_grid", "radius_grid", mode="before")
    @classmethod
    def parse_grid(cls, v: Any) -> Any:
        return split_csv(v)


class SweepConfig(BaseModel):
    """Seed sweep over methods and fvc levels (n_side at fixed radius)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    methods: List[Literal["num", "sbm", "frm"]] = Field(
        default_factory=lambda: ["num", "sbm", "frm"]
    )
    n_side_levels: List[int] = Field(default_factory=lambda: [4, 5, 6, 7])
    radius_jitter: float = Field(default=0.05, ge=0, lt=0.5)

    @field_validator("methods", "n_side_levels", mode="before")
    @classmethod
    def parse_list(cls, v: Any) -> Any:
        return split_csv(v)


class RunConfig(BaseModel):
    """One run of one methodology.

    Sub-configs that only some methods need are optional here; the pipeline
    checks them with `require` and raises RunConfigError when one is missing.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    method: Literal["num", "sbm", "frm", "pinn", "hybrid", "reference"]
    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    sampling: Optional[SamplingConfig] = None
    arch: Optional[ArchitectureConfig] = None
    hybrid: Optional[HybridConfig] = None
    surrogate: Optional[SurrogateConfig] = None
    sweep: Optional[SweepConfig] = None
    seeds: List[int] = Field(default_factory=lambda: [0])
    micro_k: Optional[float] = Field(default=None, gt=0)
    two_directions: bool = False
    reference_path: Optional[str] = None
    output_dir: Optional[str] = None

    @field_validator("seeds", mode="before")
    @classmethod
    def parse_seeds(cls, v: Any) -> Any:
        return split_csv(v)

    @field_validator("seeds")
    @classmethod
    def validate_seeds(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("seeds must contain at least one seed")
        return v

    def require(self, *sections: str) -> None:
        """Raise RunConfigError if any named sub-config is missing.

        Args:
            *sections: Names of optional sub-configs ("arch", "hybrid", ...).

        Raises:
            RunConfigError: If a section is None.
        """
        missing = [name for name in sections if getattr(self, name) is None]
        if missing:
            raise RunConfigError(
                f"Method '{self.method}' requires config section(s): {', '.join(missing)}"
            )


# ------------------------------
# Loading
# ------------------------------


def unflatten(flat: Mapping[str, Any]) -> Dict[str, Any]:
    """Turn {"a.b.c": v} into {"a": {"b": {"c": v}}}.

    Raises:
        RunConfigError: If a key is used both as a value and as a section.
    """
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        parts = key.strip().split(".")
        node = nested
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise RunConfigError(f"Key '{key}' conflicts with value of '{part}'")
            node = child
        if isinstance(node.get(parts[-1]), dict):
            raise RunConfigError(f"Key '{key}' conflicts with section '{parts[-1]}'")
        node[parts[-1]] = value
    return nested


def parse_run_config(data: Mapping[str, Any]) -> RunConfig:
    """Validate a nested mapping as a RunConfig.

    Raises:
        RunConfigError: With the pydantic error list folded into the message.
    """
    try:
        return RunConfig.model_validate(dict(data))
    except ValidationError as e:
        details = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise RunConfigError(f"Invalid run configuration: {details}") from e


def load_run_config(
    path: Union[str, Path],
    overrides: Optional[Mapping[str, Any]] = None,
    defaults: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """Read and validate a run file.

    Args:
        path: A dotted `key = value` file, or a `.json` document.
        overrides: Dotted keys applied on top of the file (e.g. from CLI flags).
        defaults: Dotted keys used only where the file leaves them unset.

    Returns:
        The validated RunConfig.

    Raises:
        RunConfigError: If the file is missing or does not validate.
    """
    path = Path(path)
    if not path.is_file():
        raise RunConfigError(f"Run config not found: {path}")

    if path.suffix == ".json":
        data = json.loads(path.read_text(encoding="utf-8"))
    else:
        flat = {k: v for k, v in dotenv_values(path).items() if v is not None}
        data = unflatten(flat)

    for key, value in unflatten(defaults or {}).items():
        data.setdefault(key, value)

    if overrides:
        for key, value in unflatten(overrides).items():
            if isinstance(value, dict) and isinstance(data.get(key), dict):
                data[key] = {**data[key], **value}
            else:
                data[key] = value

    return parse_run_config(data)
