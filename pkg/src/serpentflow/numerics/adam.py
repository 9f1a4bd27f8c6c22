"""Adam with bias correction, operating on named parameter arrays."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


class NonFiniteGradient(FloatingPointError):
    def __init__(self, name: str):
        super().__init__(f"non-finite gradient for parameter {name!r}; step rejected")
        self.parameter = name


@dataclass
class AdamState:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def _array(p) -> np.ndarray:
    return p.data if isinstance(p, Tensor) else p


def adam_step(state: AdamState, params: dict, grads: dict) -> dict:
    """Apply one Adam update in place and return ``params``.

    Every gradient is validated before any parameter moves, so a rejected step
    leaves parameters and moments untouched.
    """
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if np.shape(g) != _array(p).shape:
            raise ValueError(f"gradient for {name!r} has shape {np.shape(g)}, "
                             f"parameter has {_array(p).shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(name)

    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        arr = _array(p)
        m = state.m.setdefault(name, np.zeros_like(arr))
        v = state.v.setdefault(name, np.zeros_like(arr))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        arr -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
    return params
