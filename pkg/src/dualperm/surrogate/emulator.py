"""
Feature-Based Permeability Emulator.

The emulator predicts K11 from (fvc, radius). It works in the coordinates of
the transverse-flow correlation

    z1 = log(sqrt(fvc_max / fvc) - 1)     (log headroom, decreasing in fvc)
    z2 = log(radius)

where the correlation itself reads log K = log C + 5/2 z1 + 2 z2. The emulator
fits the residual log K - log K_gebart with a polynomial of degree <= 2 in the
normalized (z1, z2) and adds it back, so

    log K = log K_gebart(fvc, r) + poly(z1, z2)

K decreases in fvc iff d(log K)/d z1 = 5/2 + d poly/d z1 > 0. That condition is
checked on a dense scan of the training hull; a degree that violates it is
replaced by a lower one (degree 0 is a constant offset and always monotone).

Inputs outside the training hull are clamped to it with an ExtrapolationWarning.
"""

import math
import warnings
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from dualperm.config.constants import FVC_MAX, GEBART_C, GEBART_EXPONENT, MIN_DATASET_ROWS
from dualperm.surrogate.dataset import Dataset, FeatureVector
from dualperm.utils.exceptions import EmulatorFitError, ExtrapolationWarning, FeatureDomainError
from dualperm.utils.logger import get_logger

logger = get_logger(__name__)

# Points per axis of the monotonicity scan
_SCAN = 64


def gebart_baseline(fvc: float, radius: float) -> float:
    """Transverse permeability of a square fiber packing.

    K = C (sqrt(fvc_max / fvc) - 1)^(5/2) r^2 with fvc_max = pi/4 and
    C = 16 / (9 pi sqrt(2)).

    Raises:
        FeatureDomainError: If fvc is not in (0, fvc_max) or radius <= 0.
    """
    if not (0.0 < fvc < FVC_MAX):
        raise FeatureDomainError(f"fvc={fvc} outside (0, {FVC_MAX:.6f})")
    if radius <= 0:
        raise FeatureDomainError(f"radius must be positive, got {radius}")
    return GEBART_C * (math.sqrt(FVC_MAX / fvc) - 1.0) ** GEBART_EXPONENT * radius**2


def _z(fvc: np.ndarray, radius: np.ndarray) -> np.ndarray:
    fvc = np.asarray(fvc, dtype=float)
    radius = np.asarray(radius, dtype=float)
    return np.stack([np.log(np.sqrt(FVC_MAX / fvc) - 1.0), np.log(radius)], axis=-1)


def _log_gebart(fvc: np.ndarray, radius: np.ndarray) -> np.ndarray:
    z = _z(fvc, radius)
    return math.log(GEBART_C) + GEBART_EXPONENT * z[..., 0] + 2.0 * z[..., 1]


def _design(zn: np.ndarray, degree: int) -> np.ndarray:
    """Polynomial terms of normalized coordinates (m, 2)."""
    a, b = zn[:, 0], zn[:, 1]
    terms = [np.ones_like(a)]
    if degree >= 1:
        terms += [a, b]
    if degree >= 2:
        terms += [a * a, a * b, b * b]
    return np.stack(terms, axis=1)


def _d_design_da(zn: np.ndarray, degree: int) -> np.ndarray:
    """Derivative of the design terms with respect to the first coordinate."""
    a, b = zn[:, 0], zn[:, 1]
    zero, one = np.zeros_like(a), np.ones_like(a)
    terms = [zero]
    if degree >= 1:
        terms += [one, zero]
    if degree >= 2:
        terms += [2.0 * a, b, zero]
    return np.stack(terms, axis=1)


class EmulatorModel(BaseModel):
    """Fitted emulator with its training hull and provenance."""

    degree: int
    coefficients: List[float]
    z_mean: Tuple[float, float]
    z_scale: Tuple[float, float]
    fvc_bounds: Tuple[float, float]
    radius_bounds: Tuple[float, float]
    training_points: List[Tuple[float, float]] = Field(default_factory=list)
    training_residuals: List[float] = Field(default_factory=list)
    holdout_median_error: Optional[float] = None
    dataset_hash: str = ""
    seed: int = 0

    def _normalize(self, z: np.ndarray) -> np.ndarray:
        return (z - np.asarray(self.z_mean)) / np.asarray(self.z_scale)

    def log_k(self, fvc: np.ndarray, radius: np.ndarray) -> np.ndarray:
        """log K11 without hull clamping."""
        fvc = np.atleast_1d(np.asarray(fvc, dtype=float))
        radius = np.atleast_1d(np.asarray(radius, dtype=float))
        zn = self._normalize(_z(fvc, radius))
        return _log_gebart(fvc, radius) + _design(zn, self.degree) @ np.asarray(self.coefficients)

    def clamp(self, features: FeatureVector) -> Tuple[float, float, bool]:
        """Clamp features to the hull; returns (fvc, radius, clamped)."""
        fvc = min(max(features.fvc, self.fvc_bounds[0]), self.fvc_bounds[1])
        radius = min(max(features.radius, self.radius_bounds[0]), self.radius_bounds[1])
        return fvc, radius, (fvc != features.fvc or radius != features.radius)

    def predict(self, features: FeatureVector) -> np.ndarray:
        return predict_permeability(self, features)

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.write_text(self.model_dump_json(indent=2), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "EmulatorModel":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))


def _is_monotone(
    coefficients: np.ndarray,
    degree: int,
    z_mean: np.ndarray,
    z_scale: np.ndarray,
    fvc_bounds: Tuple[float, float],
    radius_bounds: Tuple[float, float],
) -> bool:
    fvc = np.linspace(fvc_bounds[0], fvc_bounds[1], _SCAN)
    radius = np.linspace(radius_bounds[0], radius_bounds[1], _SCAN)
    F, R = np.meshgrid(fvc, radius, indexing="ij")
    zn = (_z(F.ravel(), R.ravel()) - z_mean) / z_scale
    slope = GEBART_EXPONENT + (_d_design_da(zn, degree) @ coefficients) / z_scale[0]
    return bool(np.all(slope > 0.0))


def _fit(
    fvc: np.ndarray, radius: np.ndarray, log_k: np.ndarray, max_degree: int
) -> Tuple[int, np.ndarray, np.ndarray, np.ndarray]:
    """Least-squares fit with monotone degree fallback.

    Returns:
        (degree, coefficients, z_mean, z_scale).
    """
    z = _z(fvc, radius)
    z_mean = z.mean(axis=0)
    z_scale = z.std(axis=0)
    z_scale[z_scale == 0.0] = 1.0
    zn = (z - z_mean) / z_scale
    residual = log_k - _log_gebart(fvc, radius)
    fvc_bounds = (float(fvc.min()), float(fvc.max()))
    radius_bounds = (float(radius.min()), float(radius.max()))

    for degree in range(max_degree, -1, -1):
        design = _design(zn, degree)
        if design.shape[0] < design.shape[1]:
            continue
        coefficients, *_ = np.linalg.lstsq(design, residual, rcond=None)
        if _is_monotone(coefficients, degree, z_mean, z_scale, fvc_bounds, radius_bounds):
            return degree, coefficients, z_mean, z_scale
        logger.info(
            "Emulator degree rejected as non-monotone",
            extra={"extra_fields": {"degree": degree}},
        )
    raise EmulatorFitError("No monotone emulator fit found")


def train_emulator(
    dataset: Dataset, degree: int = 2, folds: int = 5, seed: Optional[int] = None
) -> EmulatorModel:
    """Fit the emulator in log-K space and report held-out error.

    Args:
        dataset: At least 10 rows with distinct features.
        degree: Maximum polynomial degree (<= 2).
        folds: Number of cross-validation folds for the held-out error.
        seed: Fold shuffling seed; defaults to dataset.seed.

    Returns:
        The EmulatorModel; holdout_median_error is the median relative error of
        the held-out predictions over all folds.

    Raises:
        EmulatorFitError: If the dataset has fewer than 10 rows or the fit is
            under-determined.
    """
    if len(dataset) < MIN_DATASET_ROWS:
        raise EmulatorFitError(
            f"Emulator needs at least {MIN_DATASET_ROWS} rows, got {len(dataset)}"
        )
    if not 0 <= degree <= 2:
        raise EmulatorFitError(f"Degree must be 0, 1 or 2, got {degree}")
    seed = dataset.seed if seed is None else seed

    fvc = np.array([r.features.fvc for r in dataset.rows])
    radius = np.array([r.features.radius for r in dataset.rows])
    log_k = np.log(np.array([r.k11 for r in dataset.rows]))

    chosen, coefficients, z_mean, z_scale = _fit(fvc, radius, log_k, degree)
    model = EmulatorModel(
        degree=chosen,
        coefficients=coefficients.tolist(),
        z_mean=tuple(z_mean.tolist()),
        z_scale=tuple(z_scale.tolist()),
        fvc_bounds=(float(fvc.min()), float(fvc.max())),
        radius_bounds=(float(radius.min()), float(radius.max())),
        dataset_hash=dataset.dataset_hash,
        seed=seed,
    )
    residuals = model.log_k(fvc, radius) - log_k
    model = model.model_copy(
        update={
            "training_points": list(zip(fvc.tolist(), radius.tolist())),
            "training_residuals": residuals.tolist(),
        }
    )

    # k-fold held-out error
    order = np.random.default_rng(seed).permutation(len(dataset))
    errors: List[float] = []
    for fold in np.array_split(order, folds):
        train = np.setdiff1d(order, fold)
        try:
            d, c, m, s = _fit(fvc[train], radius[train], log_k[train], chosen)
        except EmulatorFitError:
            continue
        held = EmulatorModel(
            degree=d,
            coefficients=c.tolist(),
            z_mean=tuple(m.tolist()),
            z_scale=tuple(s.tolist()),
            fvc_bounds=model.fvc_bounds,
            radius_bounds=model.radius_bounds,
        )
        predicted = np.exp(held.log_k(fvc[fold], radius[fold]))
        truth = np.exp(log_k[fold])
        errors.extend((np.abs(predicted - truth) / truth).tolist())

    holdout = float(np.median(errors)) if errors else None
    model = model.model_copy(update={"holdout_median_error": holdout})
    logger.info(
        "Emulator trained",
        extra={
            "extra_fields": {
                "rows": len(dataset),
                "degree": chosen,
                "holdout_median_error": holdout,
                "max_abs_log_residual": float(np.abs(residuals).max()),
            }
        },
    )
    return model


def predict_permeability(model: EmulatorModel, features: FeatureVector) -> np.ndarray:
    """Isotropic tensor K11 * I predicted at features.

    Features outside the training hull are clamped to it; the clamp is
    reported with an ExtrapolationWarning.
    """
    fvc, radius, clamped = model.clamp(features)
    if clamped:
        message = (
            f"Features (fvc={features.fvc}, r={features.radius}) clamped to hull "
            f"fvc {model.fvc_bounds}, r {model.radius_bounds}"
        )
        logger.warning(message)
        warnings.warn(message, ExtrapolationWarning, stacklevel=2)
    k11 = float(np.exp(model.log_k(fvc, radius))[0])
    return k11 * np.eye(2)
