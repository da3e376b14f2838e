"""Discrete Hoelder seminorms of periodic samples."""
from __future__ import annotations

import numpy as np


def holder_seminorm(values, alpha, positions=None, period=None, block=512) -> float:
    """``max |f(x_i) - f(x_j)| / d(x_i, x_j)^alpha`` over all sample pairs.

    ``d`` is the circular distance on ``[0, period)``.  Vector-valued samples
    use the Euclidean norm of the difference.  Defaults: uniform samples on
    ``[0, 2 pi)``.
    """
    f = np.asarray(values, dtype=float)
    n = f.shape[0]
    if f.ndim == 1:
        f = f[:, None]
    if period is None:
        period = 2 * np.pi
    if positions is None:
        # uniform samples: scan the lags, each lag has one circular distance
        best = 0.0
        for lag in range(1, n // 2 + 1):
            diff = np.linalg.norm(f - np.roll(f, lag, axis=0), axis=1)
            best = max(best, float(diff.max()) / (lag * period / n) ** alpha)
        return best
    x = np.asarray(positions, dtype=float)
    best = 0.0
    for start in range(0, n, block):
        sl = slice(start, min(start + block, n))
        d = np.abs(x[sl, None] - x[None, :])
        d = np.minimum(d, period - d)
        diff = np.linalg.norm(f[sl, None, :] - f[None, :, :], axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(d > 0, diff / d ** alpha, 0.0)
        best = max(best, float(q.max()))
    return best
