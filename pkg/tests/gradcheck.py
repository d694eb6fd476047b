"""Central finite-difference oracle used by the gradient tests.

Kept independent of the autodiff implementation: it only re-evaluates a
scalar-valued closure while nudging raw numpy arrays in place.
"""

import numpy as np


def central_difference(f, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Numerical gradient of scalar f() w.r.t. array ``x`` (mutated in place)."""
    grad = np.zeros_like(x)
    flat, gflat = x.ravel(), grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = f()
        flat[i] = orig - step
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * step)
    return grad


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max elementwise |a - n| / max(|a|, |n|, 1)."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1.0)
    return float(np.max(np.abs(analytic - numeric) / denom))
