"""Loss functions for the four self-supervised tasks.

All four accept either torch tensors or numpy arrays and return a scalar
tensor (or float for numpy inputs), so the same code path serves training
and the scripted-input oracle tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch

NUM_TASKS = 4
TASK_NAMES = ("middle", "irreg", "jigsaw", "social")


def _as_tensor(x) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x
    return torch.as_tensor(x, dtype=torch.float64)


def middle_frame_loss(predicted, target) -> torch.Tensor:
    """Mean absolute deviation between predicted and true middle frame."""
    predicted, target = _as_tensor(predicted), _as_tensor(target)
    return (predicted - target).abs().mean()


def irregularity_loss(probabilities, labels) -> torch.Tensor:
    """Mean negative log-probability of the true motion class.

    probabilities: (N, C) rows summing to 1; labels: (N,) class indices.
    """
    probabilities = _as_tensor(probabilities)
    labels = torch.as_tensor(labels, dtype=torch.long)
    true_p = probabilities[torch.arange(probabilities.shape[0]), labels]
    return -(true_p.log()).mean()


def jigsaw_loss(probabilities, permutation) -> torch.Tensor:
    """Average negative log-probability of each patch's true position.

    probabilities: (4, 4) or (N, 4, 4); row i is the position distribution
    for the patch shown in slot i. permutation: the true original position
    of each slot's patch, (4,) or (N, 4).
    """
    probabilities = _as_tensor(probabilities)
    permutation = torch.as_tensor(permutation, dtype=torch.long)
    if probabilities.dim() == 2:
        probabilities = probabilities.unsqueeze(0)
        permutation = permutation.unsqueeze(0)
    true_p = torch.gather(probabilities, 2, permutation.unsqueeze(-1)).squeeze(-1)
    per_sample = -(true_p.log()).mean(dim=1)
    return per_sample.mean()


def social_loss(predicted, target) -> torch.Tensor:
    """Squared Euclidean error between predicted and true next positions,
    summed over the batch."""
    predicted, target = _as_tensor(predicted), _as_tensor(target)
    if predicted.dim() == 1:
        predicted, target = predicted.unsqueeze(0), target.unsqueeze(0)
    return ((predicted - target) ** 2).sum()


LOSS_FUNCTIONS = {
    "middle": middle_frame_loss,
    "irreg": irregularity_loss,
    "jigsaw": jigsaw_loss,
    "social": social_loss,
}


@dataclass
class TaskLossReport:
    """Per-task losses, current task weights, and the weighted total."""

    l_middle: float
    l_irreg: float
    l_jigsaw: float
    l_social: float
    weights: dict[str, float] = field(
        default_factory=lambda: {name: 1.0 for name in TASK_NAMES}
    )

    def __post_init__(self):
        for name, value in self.losses.items():
            if not math.isfinite(value):
                raise ValueError(f"non-finite loss for task {name!r}: {value}")
            if value < 0:
                raise ValueError(f"negative loss for task {name!r}: {value}")

    @property
    def losses(self) -> dict[str, float]:
        return {
            "middle": self.l_middle,
            "irreg": self.l_irreg,
            "jigsaw": self.l_jigsaw,
            "social": self.l_social,
        }

    @property
    def total(self) -> float:
        return sum(self.weights[name] * value for name, value in self.losses.items())

    def to_dict(self) -> dict:
        return {
            "losses": self.losses,
            "weights": dict(self.weights),
            "total": self.total,
        }


def weighted_total(losses: dict[str, torch.Tensor], weights: dict[str, float]) -> torch.Tensor:
    """Weighted sum of task losses; weights are treated as constants."""
    total = None
    for name, loss in losses.items():
        term = float(weights[name]) * loss
        total = term if total is None else total + term
    assert total is not None, "no task losses provided"
    return total
