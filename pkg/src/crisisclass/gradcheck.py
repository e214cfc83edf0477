"""Finite-difference gradient verification for layers and whole models."""

from typing import Callable, Dict, Mapping

import numpy as np


def grad_check(
    loss_fn: Callable[[Mapping[str, np.ndarray]], float],
    params: Dict[str, np.ndarray],
    analytic: Mapping[str, np.ndarray],
    epsilon: float = 1e-5,
) -> float:
    """Compare analytic gradients against central finite differences.

    loss_fn maps a name->array dict to a scalar loss; `analytic` holds the
    gradient arrays to verify, keyed like `params`. For every scalar entry,
    numeric = (L(th+eps) - L(th-eps)) / (2 eps) and the relative error is
    |analytic - numeric| / max(1, |analytic|, |numeric|). Returns the max.
    """
    max_err = 0.0
    work = {name: np.array(p, dtype=np.float64, copy=True) for name, p in params.items()}
    for name, grad in analytic.items():
        arr = work[name]
        flat = arr.reshape(-1)
        gflat = np.asarray(grad).reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + epsilon
            lp = loss_fn(work)
            flat[j] = orig - epsilon
            lm = loss_fn(work)
            flat[j] = orig
            numeric = (lp - lm) / (2.0 * epsilon)
            a = gflat[j]
            err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            if err > max_err:
                max_err = err
    return max_err
