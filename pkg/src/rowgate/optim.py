"""SGD with momentum, grouped weight decay, and the polynomial LR schedule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .tensor import Tensor


@dataclass
class ParamGroup:
    """Named parameters sharing one weight-decay coefficient."""

    name: str
    params: list[tuple[str, Tensor]]
    weight_decay: float


@dataclass
class SGDMomentum:
    """Heavy-ball SGD: v <- mu v + (g + wd p); p <- p - lr v."""

    groups: Sequence[ParamGroup]
    momentum: float = 0.9
    _velocity: dict[int, np.ndarray] = field(default_factory=dict)

    def step(self, lr: float) -> None:
        for group in self.groups:
            for _, p in group.params:
                g = p.grad if p.grad is not None else np.zeros_like(p.data)
                update = g + group.weight_decay * p.data
                v = self._velocity.get(id(p))
                if v is None:
                    v = np.zeros_like(p.data)
                    self._velocity[id(p)] = v
                v *= self.momentum
                v += update
                p.data -= lr * v

    def zero_grad(self) -> None:
        for group in self.groups:
            for _, p in group.params:
                p.grad = None


def poly_lr(iteration: int, base_lr: float, max_iteration: int, power: float) -> float:
    """base_lr * (1 - iteration / max_iteration) ** power."""
    if not 0 <= iteration <= max_iteration:
        raise ConfigError(f"iteration {iteration} outside [0, {max_iteration}]")
    return base_lr * (1.0 - iteration / max_iteration) ** power
