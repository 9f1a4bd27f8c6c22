"""Central finite-difference oracle for reverse-mode gradients."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .tensor import Tensor, no_grad


def finite_difference_check(
    f: Callable[[Tensor], Tensor],
    theta: Tensor,
    h: float = 1e-5,
    coords: np.ndarray | None = None,
) -> float:
    """Max over coordinates of ``|analytic - central| / (|analytic| + 1e-8)``.

    ``f`` maps ``theta`` (a leaf with ``requires_grad``) to a scalar tensor and
    may close over other parameters.  ``coords`` restricts the check to a subset
    of flat indices.  A non-finite function value yields ``inf``.
    """
    if not theta.requires_grad:
        raise ValueError("theta must require gradients")
    theta.grad = None
    loss = f(theta)
    if not np.isfinite(loss.data).all():
        return math.inf
    loss.backward()
    analytic = np.zeros(theta.shape) if theta.grad is None else theta.grad.copy()

    flat = theta.data.reshape(-1)
    idx = np.arange(flat.size) if coords is None else np.asarray(coords)
    worst = 0.0
    with no_grad():
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            fp = f(theta).item()
            flat[i] = orig - h
            fm = f(theta).item()
            flat[i] = orig
            if not (math.isfinite(fp) and math.isfinite(fm)):
                return math.inf
            numeric = (fp - fm) / (2.0 * h)
            a = analytic.reshape(-1)[i]
            worst = max(worst, abs(a - numeric) / (abs(a) + 1e-8))
    return worst
