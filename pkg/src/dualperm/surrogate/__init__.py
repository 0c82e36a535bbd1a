"""Feature-based micropermeability emulator and its training data."""

from dualperm.surrogate.dataset import Dataset, DatasetRow, FeatureVector, generate_dataset
from dualperm.surrogate.emulator import (
    EmulatorModel,
    gebart_baseline,
    predict_permeability,
    train_emulator,
)

__all__ = [
    "Dataset",
    "DatasetRow",
    "FeatureVector",
    "generate_dataset",
    "EmulatorModel",
    "gebart_baseline",
    "predict_permeability",
    "train_emulator",
]
