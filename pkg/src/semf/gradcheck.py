"""Central-difference gradient checking against the autodiff engine."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .tensor import Tensor


@dataclass
class GradcheckResult:
    max_error: float
    per_input: dict  # name -> max relative error for that input

    def __float__(self) -> float:
        return self.max_error


# Central differences at step 1e-5 carry roughly 1e-11 of rounding noise for
# O(1) losses; gradients that are exactly zero (e.g. key biases under softmax)
# would otherwise report noise/1e-8 as a relative error.
DENOM_FLOOR = 1e-6


def relative_error(g_ad: np.ndarray, g_fd: np.ndarray, floor: float = DENOM_FLOOR) -> np.ndarray:
    return np.abs(g_ad - g_fd) / np.maximum(np.maximum(np.abs(g_ad), np.abs(g_fd)), floor)


def gradcheck(f, inputs, step: float = 1e-5, names=None) -> GradcheckResult:
    """Compare autodiff gradients of scalar ``f(*inputs)`` with central differences.

    Every element of every input is perturbed. Inputs are modified in place
    during the check and restored afterwards.
    """
    inputs = list(inputs)
    names = list(names) if names is not None else [t.name or f"input{i}" for i, t in enumerate(inputs)]
    for t in inputs:
        t.grad = None
        t.requires_grad = True

    out = f(*inputs)
    if not isinstance(out, Tensor) or out.data.size != 1:
        shape = getattr(out, "shape", type(out).__name__)
        raise ContractError(f"gradcheck needs a scalar-valued function, got {shape}")
    out.backward()
    analytic = [t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in inputs]

    per_input = {}
    worst = 0.0
    for name, t, g_ad in zip(names, inputs, analytic):
        g_fd = np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        fd_flat = g_fd.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            plus = float(f(*inputs).data)
            flat[i] = orig - step
            minus = float(f(*inputs).data)
            flat[i] = orig
            fd_flat[i] = (plus - minus) / (2.0 * step)
        err = float(relative_error(g_ad, g_fd).max()) if t.data.size else 0.0
        per_input[name] = err
        worst = max(worst, err)
    for t in inputs:
        t.grad = None
    return GradcheckResult(worst, per_input)
