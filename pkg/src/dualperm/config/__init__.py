"""
Configuration Module for dualperm.

Re-exports the pydantic schemas so callers can write
`from dualperm.config import RunConfig, HybridConfig`.

- solver_schemas.py: SolverConfig, GeometryConfig, SamplingConfig
- network_schemas.py: ArchitectureConfig, AdamSchedule, LossWeights, HybridConfig
- run_schemas.py: SurrogateConfig, SweepConfig, RunConfig and the run-file loader
- constants.py: benchmark geometry, reference values and default hyperparameters
- paths.py: output directory layout
"""

from dualperm.config.solver_schemas import (
    SolverConfig,
    GeometryConfig,
    SamplingConfig,
)

from dualperm.config.network_schemas import (
    ArchitectureConfig,
    AdamSchedule,
    LossWeights,
    HybridConfig,
)

from dualperm.config.run_schemas import (
    SurrogateConfig,
    SweepConfig,
    RunConfig,
    METHODS,
    load_run_config,
    parse_run_config,
)

__all__ = [
    # Solver schemas
    "SolverConfig",
    "GeometryConfig",
    "SamplingConfig",
    # Network schemas
    "ArchitectureConfig",
    "AdamSchedule",
    "LossWeights",
    "HybridConfig",
    # Run schemas
    "SurrogateConfig",
    "SweepConfig",
    "RunConfig",
    "METHODS",
    "load_run_config",
    "parse_run_config",
]
