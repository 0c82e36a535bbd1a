"""
Loss Balancing and Permeability Projection.

- weight_scaling: moving-average inverse-gradient-norm weights, applied at
  every coupling checkpoint while k <= k_c
- anneal_coupling_weights: exponential decay of lambda_u, lambda_p after k_c
- project_permeability: clamp of the predicted permeability to [K_LB, K_UB]
"""

import math
import warnings
from typing import Dict, Mapping, Optional, Tuple

from dualperm.utils.logger import get_logger

logger = get_logger(__name__)


def weight_scaling(
    norms: Mapping[str, float],
    weights: Mapping[str, float],
    alpha: float,
    anchor: Optional[str] = "r",
) -> Dict[str, float]:
    """Rebalance loss weights from per-term gradient norms.

    lambda'_i = (1 - alpha) lambda_i + alpha * sum_j |grad J_j| / |grad J_i|

    Terms with a zero norm are skipped (their weight is kept). When anchor
    names a rebalanced term, all weights are divided by its new value so
    that weight is 1.

    Args:
        norms: Term name -> gradient norm.
        weights: Current weights; keys not in norms are passed through.
        alpha: Moving-average factor in [0, 1].
        anchor: Term normalized to 1, or None.

    Returns:
        New weights.
    """
    updated = dict(weights)
    if alpha == 0.0:
        return updated

    active = {name: float(value) for name, value in norms.items() if value > 0.0}
    if not active:
        logger.warning("All gradient norms are zero; loss weights unchanged")
        warnings.warn("All gradient norms are zero; loss weights unchanged", RuntimeWarning, stacklevel=2)
        return updated

    total = sum(active.values())
    for name, value in active.items():
        updated[name] = (1.0 - alpha) * weights[name] + alpha * total / value

    if anchor is not None and anchor in active:
        scale = updated[anchor]
        updated = {name: value / scale for name, value in updated.items()}
    return updated


def anneal_coupling_weights(
    k: int,
    k_c: int,
    gamma_u: float,
    gamma_p: float,
    weights_at_kc: Tuple[float, float],
) -> Tuple[float, float]:
    """Coupling weights exp(gamma (k_c - k)) * lambda_{k_c} for k >= k_c."""
    if k < k_c:
        raise ValueError(f"Annealing starts at k_c={k_c}, got k={k}")
    lam_u, lam_p = weights_at_kc
    return lam_u * math.exp(gamma_u * (k_c - k)), lam_p * math.exp(gamma_p * (k_c - k))


def project_permeability(k_hat: float, k_lb: float, k_ub: float) -> float:
    """max(K_LB, min(k_hat, K_UB))."""
    if k_lb > k_ub:
        raise ValueError(f"Bounds out of order: {k_lb} > {k_ub}")
    return max(k_lb, min(k_hat, k_ub))
