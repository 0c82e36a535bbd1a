"""
Adam with Exponential Learning-Rate Decay.

The update is written out explicitly so that the step at iteration k uses
l_k = l0 * decay_rate ** (k / decay_every) and the moment buffers can be
inspected, checkpointed and compared between runs.
"""

from dataclasses import dataclass, field
from typing import List, Sequence

import torch

from dualperm.config.network_schemas import AdamSchedule


@dataclass
class AdamState:
    """First and second moment buffers and the number of steps taken."""

    m: List[torch.Tensor] = field(default_factory=list)
    v: List[torch.Tensor] = field(default_factory=list)
    step: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[torch.Tensor]) -> "AdamState":
        return cls(
            m=[torch.zeros_like(p, requires_grad=False) for p in params],
            v=[torch.zeros_like(p, requires_grad=False) for p in params],
        )


def learning_rate(k: int, schedule: AdamSchedule) -> float:
    return schedule.l0 * schedule.decay_rate ** (k / schedule.decay_every)


def adam_step(
    params: Sequence[torch.Tensor],
    grads: Sequence[torch.Tensor],
    state: AdamState,
    iteration: int,
    schedule: AdamSchedule,
) -> Sequence[torch.Tensor]:
    """Update params in place with one bias-corrected Adam step.

    Args:
        params: Parameter tensors.
        grads: Gradients aligned with params.
        state: Moment buffers, updated in place.
        iteration: Zero-based iteration index k for the learning rate.
        schedule: Adam hyperparameters.

    Returns:
        params.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and optimizer state must align")

    state.step += 1
    lr = learning_rate(iteration, schedule)
    b1, b2 = schedule.beta1, schedule.beta2
    correction1 = 1.0 - b1**state.step
    correction2 = 1.0 - b2**state.step
    with torch.no_grad():
        for p, g, m, v in zip(params, grads, state.m, state.v):
            m.mul_(b1).add_(g, alpha=1.0 - b1)
            v.mul_(b2).addcmul_(g, g, value=1.0 - b2)
            denom = (v / correction2).sqrt_().add_(schedule.eps)
            p.addcdiv_(m / correction1, denom, value=-lr)
    return params
