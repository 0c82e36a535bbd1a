# ---------- TESTS FOR SURROGATE DATASET AND EMULATOR ----------

import itertools
import math
from unittest.mock import patch

import numpy as np
import pytest
from pydantic import ValidationError

from dualperm.surrogate.dataset import Dataset, DatasetRow, FeatureVector, generate_dataset
from dualperm.surrogate.emulator import (
    EmulatorModel,
    gebart_baseline,
    predict_permeability,
    train_emulator,
)
from dualperm.utils.exceptions import (
    CancellationError,
    EmulatorFitError,
    ExtrapolationWarning,
    FeatureDomainError,
)

# --- MOCK DATA ---

FVC_GRID = [0.2, 0.25, 0.3, 0.35]
RADIUS_GRID = [0.02, 0.025, 0.03]
OFFSET = 0.1


def synthetic_dataset(offset: float = OFFSET, n_rows: int = 12) -> Dataset:
    """Rows whose K11 is the square-packing correlation scaled by exp(offset)."""
    pairs = list(itertools.product(FVC_GRID, RADIUS_GRID))[:n_rows]
    return Dataset(
        rows=[
            DatasetRow(
                features=FeatureVector(fvc=fvc, radius=r),
                k11=gebart_baseline(fvc, r) * math.exp(offset),
            )
            for fvc, r in pairs
        ],
        seed=3,
    )


@pytest.fixture
def dataset():
    """Twelve synthetic rows."""
    return synthetic_dataset()


@pytest.fixture
def model(dataset):
    """Emulator trained on the synthetic rows."""
    return train_emulator(dataset)


# --- TESTS ---


def test_gebart_baseline_value():
    """Test the closed form at a hand-computed point."""
    c = 16.0 / (9.0 * math.pi * math.sqrt(2.0))
    expected = c * (math.sqrt((math.pi / 4) / 0.3) - 1.0) ** 2.5 * 0.025**2
    assert gebart_baseline(0.3, 0.025) == pytest.approx(expected, rel=1e-12)


def test_gebart_baseline_decreasing_in_fvc():
    """Test monotone decrease in fvc."""
    values = [gebart_baseline(f, 0.025) for f in (0.1, 0.2, 0.3, 0.5, 0.7)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_gebart_baseline_domain():
    """Test the feature domain checks."""
    with pytest.raises(FeatureDomainError):
        gebart_baseline(0.0, 0.025)
    with pytest.raises(FeatureDomainError):
        gebart_baseline(math.pi / 4, 0.025)
    with pytest.raises(FeatureDomainError):
        gebart_baseline(0.3, 0.0)


def test_feature_vector_bounds():
    """Test that fvc outside (0, pi/4) is rejected."""
    with pytest.raises(ValidationError):
        FeatureVector(fvc=0.8, radius=0.02)


def test_dataset_rejects_duplicates():
    """Test that repeated feature tuples are rejected."""
    row = DatasetRow(features=FeatureVector(fvc=0.3, radius=0.02), k11=1e-4)
    with pytest.raises(ValidationError):
        Dataset(rows=[row, row])


def test_dataset_save_load(dataset, tmp_path):
    """Test that a saved dataset reloads with the same hash."""
    loaded = Dataset.load(dataset.save(tmp_path / "dataset.json"))
    assert loaded.dataset_hash == dataset.dataset_hash
    assert len(loaded) == 12
    frame = loaded.to_frame()
    assert list(frame.columns[:4]) == ["fvc", "radius", "orientation", "k11"]


def test_dataset_hash_changes_with_labels(dataset):
    """Test that the hash tracks the labels."""
    assert synthetic_dataset(offset=0.2).dataset_hash != dataset.dataset_hash


def test_train_emulator_recovers_offset(model, dataset):
    """Test that a constant log offset is learned exactly."""
    for row in dataset.rows:
        k = predict_permeability(model, row.features)
        assert k[0, 0] == pytest.approx(row.k11, rel=1e-8)
        assert k[0, 1] == 0.0
    assert model.holdout_median_error == pytest.approx(0.0, abs=1e-8)
    assert model.fvc_bounds == (0.2, 0.35)
    assert model.radius_bounds == (0.02, 0.03)
    assert model.dataset_hash == dataset.dataset_hash
    assert model.seed == 3


def test_train_emulator_monotone_in_fvc(model):
    """Test that predictions decrease in fvc across the hull."""
    fvc = np.linspace(0.2, 0.35, 20)
    log_k = model.log_k(fvc, np.full(20, 0.025))
    assert np.all(np.diff(log_k) < 0)


def test_train_emulator_too_few_rows():
    """Test that fewer than ten rows cannot be fitted."""
    with pytest.raises(EmulatorFitError):
        train_emulator(synthetic_dataset(n_rows=9))


def test_train_emulator_bad_degree(dataset):
    """Test that degrees above 2 are rejected."""
    with pytest.raises(EmulatorFitError):
        train_emulator(dataset, degree=3)


def test_predict_clamps_outside_hull(model):
    """Test hull clamping with an ExtrapolationWarning."""
    with pytest.warns(ExtrapolationWarning):
        k = predict_permeability(model, FeatureVector(fvc=0.6, radius=0.025))
    at_edge = predict_permeability(model, FeatureVector(fvc=0.35, radius=0.025))
    assert np.allclose(k, at_edge)


def test_emulator_save_load(model, tmp_path):
    """Test that a saved emulator predicts the same values."""
    loaded = EmulatorModel.load(model.save(tmp_path / "emulator.json"))
    features = FeatureVector(fvc=0.27, radius=0.022)
    assert np.allclose(loaded.predict(features), model.predict(features), rtol=1e-12)


def test_generate_dataset_mocked_solves():
    """Test row labelling and infeasible-pair skipping with mocked estimates."""

    class Estimate:
        k11 = 1e-4
        band_low = 0.9e-4
        band_high = 1.1e-4

    with patch("dualperm.surrogate.dataset.permeability_with_band", return_value=Estimate()):
        result = generate_dataset([0.3], [0.025, 0.4], grid_n=32, seed=5)
    assert len(result) == 1
    row = result.rows[0]
    assert row.features.fvc == 0.3
    assert row.k11 == 1e-4
    assert row.metadata["grid_n"] == 32
    assert result.seed == 5


def test_generate_dataset_cancellation():
    """Test that a positive cancellation check stops generation."""
    with pytest.raises(CancellationError):
        generate_dataset([0.3], [0.025], grid_n=32, cancellation_check=lambda: True)


def test_emulator_stays_near_baseline_over_hull():
    """Test |log(model / baseline)| <= log 3 on a dense grid over the training hull."""
    rows = [
        DatasetRow(
            features=FeatureVector(fvc=fvc, radius=r),
            k11=gebart_baseline(fvc, r) * math.exp(0.6 + 2.0 * (fvc - 0.275)),
        )
        for fvc, r in itertools.product(FVC_GRID, RADIUS_GRID)
    ]
    model = train_emulator(Dataset(rows=rows, seed=3))

    fvc, radius = np.meshgrid(
        np.linspace(*model.fvc_bounds, 25), np.linspace(*model.radius_bounds, 25), indexing="ij"
    )
    baseline = np.array([gebart_baseline(f, r) for f, r in zip(fvc.ravel(), radius.ravel())])
    assert np.all(np.abs(model.log_k(fvc.ravel(), radius.ravel()) - np.log(baseline)) <= math.log(3.0))

    tensor = predict_permeability(model, FeatureVector(fvc=0.3, radius=0.025))
    assert abs(math.log(tensor[0, 0] / gebart_baseline(0.3, 0.025))) <= math.log(3.0)
