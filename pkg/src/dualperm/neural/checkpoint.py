"""
Parameter Checkpoints.

A checkpoint is one torch.save blob holding a format tag, a version, the
architecture header and the state dict. Reloading rebuilds the ansatz from
the header so forward outputs are reproduced bit-exactly.
"""

import pickle
from pathlib import Path
from typing import Union

import torch

from dualperm.config.network_schemas import ArchitectureConfig
from dualperm.neural.ansatz import PinnAnsatz

CHECKPOINT_FORMAT = "dualperm-params"
CHECKPOINT_VERSION = 1


def save_checkpoint(params: PinnAnsatz, path: Union[str, Path]) -> Path:
    path = Path(path)
    torch.save(
        {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "architecture": params.config.model_dump(mode="json"),
            "state_dict": params.state_dict(),
        },
        path,
    )
    return path


def load_checkpoint(path: Union[str, Path]) -> PinnAnsatz:
    """Rebuild the ansatz stored at path.

    Raises:
        ValueError: If the file is not a checkpoint of a supported version, or
            pickles arbitrary objects.
    """
    try:
        blob = torch.load(Path(path), map_location="cpu", weights_only=True)
    except pickle.UnpicklingError as e:
        raise ValueError(f"{path} holds objects other than tensors and plain containers") from e
    if not isinstance(blob, dict) or blob.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a parameter checkpoint")
    if blob.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"Unsupported checkpoint version {blob.get('version')}")
    params = PinnAnsatz(ArchitectureConfig(**blob["architecture"]))
    params.load_state_dict(blob["state_dict"])
    return params
