"""
Parameter Gradients.

Exact gradients of individual loss terms with respect to the velocity
parameters (theta) and the pressure parameters (psi). Weight scaling needs
one gradient set per term, so each term is differentiated separately on a
shared graph.
"""

from dataclasses import dataclass
from typing import Dict, List, Mapping

import torch

from dualperm.neural.ansatz import PinnAnsatz
from dualperm.utils.exceptions import NonFiniteGradientError
from dualperm.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass
class GradientSet:
    """Gradients of one scalar with respect to theta and psi."""

    theta: List[torch.Tensor]
    psi: List[torch.Tensor]

    def tensors(self) -> List[torch.Tensor]:
        return self.theta + self.psi

    def norm(self) -> float:
        """Euclidean norm over all parameters."""
        return float(torch.sqrt(sum((g * g).sum() for g in self.tensors())))

    def flat(self) -> torch.Tensor:
        return torch.cat([g.reshape(-1) for g in self.tensors()])

    def is_finite(self) -> bool:
        return all(bool(torch.isfinite(g).all()) for g in self.tensors())


def gradient_set(params: PinnAnsatz, loss: torch.Tensor, retain_graph: bool = False) -> GradientSet:
    """Gradient of one scalar loss; unused parameters get zero gradients."""
    theta, psi = params.theta(), params.psi()
    grads = torch.autograd.grad(loss, theta + psi, retain_graph=retain_graph, allow_unused=True)
    grads = [torch.zeros_like(p) if g is None else g for p, g in zip(theta + psi, grads)]
    return GradientSet(theta=grads[: len(theta)], psi=grads[len(theta) :])


def param_gradients(
    params: PinnAnsatz, terms: Mapping[str, torch.Tensor]
) -> Dict[str, GradientSet]:
    """Separate parameter gradients of each loss term.

    Args:
        params: Network whose parameters the terms depend on.
        terms: Loss name -> scalar tensor, all built from one forward pass.

    Returns:
        Loss name -> GradientSet.

    Raises:
        NonFiniteGradientError: If any gradient entry is NaN or infinite. The
            offending term and the norms of all terms computed so far are
            logged first.
    """
    result: Dict[str, GradientSet] = {}
    names = list(terms)
    for index, name in enumerate(names):
        grads = gradient_set(params, terms[name], retain_graph=index < len(names) - 1)
        if not grads.is_finite():
            logger.error(
                "Non-finite parameter gradient",
                extra={
                    "extra_fields": {
                        "term": name,
                        "loss_values": {n: float(terms[n].detach()) for n in names},
                        "finite_norms": {n: g.norm() for n, g in result.items()},
                    }
                },
            )
            raise NonFiniteGradientError(f"Gradient of loss term '{name}' is not finite", term=name)
        result[name] = grads
    return result
