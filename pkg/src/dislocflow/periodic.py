"""Cyclic tridiagonal systems."""
from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded


def cyclic_tridiagonal_solve(sub, diag, sup, rhs):
    """Solve ``sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`` with wraparound.

    The corner couplings become a rank-one update (Sherman-Morrison) of an
    ordinary tridiagonal matrix, which ``scipy.linalg.solve_banded`` handles.
    ``rhs`` may carry trailing dimensions.
    """
    sub, diag, sup = (np.asarray(v, dtype=float) for v in (sub, diag, sup))
    rhs = np.asarray(rhs, dtype=float)
    n = diag.shape[0]
    gamma = -diag[0]
    u = np.zeros(n)
    u[0], u[-1] = gamma, sup[-1]
    v = np.zeros(n)
    v[0], v[-1] = 1.0, sub[0] / gamma
    d = diag.copy()
    d[0] -= gamma
    d[-1] -= sup[-1] * sub[0] / gamma
    ab = np.zeros((3, n))
    ab[0, 1:] = sup[:-1]
    ab[1] = d
    ab[2, :-1] = sub[1:]
    flat = rhs.reshape(n, -1)
    y = solve_banded((1, 1), ab, flat)
    q = solve_banded((1, 1), ab, u)
    corr = (v @ y) / (1.0 + v @ q)
    return (y - np.outer(q, corr)).reshape(rhs.shape)


def cyclic_tridiagonal_apply(sub, diag, sup, x):
    x = np.asarray(x, dtype=float)
    shape = (-1,) + (1,) * (x.ndim - 1)
    return (np.reshape(sub, shape) * np.roll(x, 1, axis=0) + np.reshape(diag, shape) * x
            + np.reshape(sup, shape) * np.roll(x, -1, axis=0))
