"""Adam with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError


@dataclass
class OptimizerState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first_moment: list = field(default_factory=list)
    second_moment: list = field(default_factory=list)


class Adam:
    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.state = OptimizerState(
            learning_rate=lr,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
            first_moment=[np.zeros_like(p.data) for p in self.params],
            second_moment=[np.zeros_like(p.data) for p in self.params],
        )

    def step(self) -> None:
        """Apply one update from the accumulated grads, then clear them.

        Parameters that received no gradient in this step are treated as
        having a zero gradient.
        """
        if all(p.grad is None for p in self.params):
            raise ContractError("optimizer step called before any backward pass")
        s = self.state
        s.step_count += 1
        t = s.step_count
        c1 = 1.0 - s.beta1**t
        c2 = 1.0 - s.beta2**t
        for p, m, v in zip(self.params, s.first_moment, s.second_moment):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m *= s.beta1
            m += (1.0 - s.beta1) * g
            v *= s.beta2
            v += (1.0 - s.beta2) * g * g
            p.data = p.data - s.learning_rate * (m / c1) / (np.sqrt(v / c2) + s.eps)
            p.grad = None

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def adam_step(params, state: OptimizerState) -> None:
    """Functional form of :meth:`Adam.step` over an explicit state."""
    opt = Adam.__new__(Adam)
    opt.params = list(params)
    if not state.first_moment:
        state.first_moment = [np.zeros_like(p.data) for p in opt.params]
        state.second_moment = [np.zeros_like(p.data) for p in opt.params]
    opt.state = state
    opt.step()
