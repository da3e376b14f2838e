"""Fourier laboratory for ``(1 - delta Delta) u_t = Delta u`` and the resolvent ``(delta L + 1)``.

Mode ``n`` of the model problem decays like ``exp(-n^2 t / (1 + delta n^2))``.
The rate saturates at ``1/delta``, so for ``delta > 0`` the flow damps high
modes only by a bounded factor and never smooths.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .holder import holder_seminorm
from .periodic import cyclic_tridiagonal_apply, cyclic_tridiagonal_solve


@dataclass(frozen=True)
class FourierState:
    """``u(x) = sum_n a_n sin(n x) + b_n cos(n x)`` for ``n = 0..M`` at time ``time``.

    The coefficients are kept as the initial data plus elapsed time, so
    composing evolutions is exact to the last bit.
    """

    a0: np.ndarray
    b0: np.ndarray
    delta: float = 0.0
    time: float = 0.0

    def __post_init__(self):
        a0 = np.asarray(self.a0, dtype=float)
        b0 = np.asarray(self.b0, dtype=float)
        if a0.shape != b0.shape or a0.ndim != 1:
            raise ValueError("a and b must be 1-d arrays of equal length")
        if self.delta < 0 or self.time < 0:
            raise ValueError("delta and time must be nonnegative")
        object.__setattr__(self, "a0", a0)
        object.__setattr__(self, "b0", b0)

    @classmethod
    def from_coefficients(cls, a, b, delta=0.0):
        return cls(np.asarray(a, dtype=float), np.asarray(b, dtype=float), delta, 0.0)

    @property
    def modes(self) -> np.ndarray:
        return np.arange(len(self.a0))

    def factors(self, t=None) -> np.ndarray:
        t = self.time if t is None else t
        n2 = self.modes.astype(float) ** 2
        return np.exp(-n2 * t / (1.0 + self.delta * n2))

    @property
    def a(self) -> np.ndarray:
        return self.a0 * self.factors()

    @property
    def b(self) -> np.ndarray:
        return self.b0 * self.factors()

    def with_delta(self, delta) -> "FourierState":
        return FourierState(self.a0, self.b0, delta, self.time)

    def samples(self, n_points) -> np.ndarray:
        x = 2 * np.pi * np.arange(n_points) / n_points
        nx = np.outer(x, self.modes)
        return np.sin(nx) @ self.a + np.cos(nx) @ self.b


def evolve_model(state: FourierState, t: float) -> FourierState:
    """Advance the model problem by ``t``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return FourierState(state.a0, state.b0, state.delta, state.time + t)


def hk_distance(s1: FourierState, s2: FourierState, k: float) -> float:
    n = s1.modes.astype(float)
    da, db = s1.a - s2.a, s1.b - s2.b
    return float(np.sqrt(np.sum(n ** (2 * k) * (da ** 2 + db ** 2))))


def hk_convergence(state0: FourierState, delta_list, t, k):
    """Distances in ``H^k`` between the ``delta`` evolution and the heat evolution at ``t``."""
    heat = evolve_model(state0.with_delta(0.0), t)
    return [(float(d), hk_distance(evolve_model(state0.with_delta(d), t), heat, k))
            for d in delta_list]


def _coefficient_arrays(a, b, n):
    a = np.broadcast_to(np.asarray(a, dtype=float), (n,))
    b = np.broadcast_to(np.asarray(b, dtype=float), (n,))
    return a, b


def resolvent_bands(n, delta, a=1.0, b=0.0):
    """Upwinded periodic finite-difference matrix of ``delta L + 1``, ``L u = -a u'' + b u'``."""
    a, b = _coefficient_arrays(a, b, n)
    if np.any(a <= 0):
        raise ValueError("operator is not elliptic: a must be positive at every sample")
    h = 2 * np.pi / n
    bp, bm = np.maximum(b, 0.0), np.maximum(-b, 0.0)
    sub = -delta * (a / h ** 2 + bp / h)
    sup = -delta * (a / h ** 2 + bm / h)
    diag = 1.0 + delta * (2 * a / h ** 2 + (bp + bm) / h)
    return sub, diag, sup


def resolvent_solve(f, delta, a=1.0, b=0.0, method="fd") -> np.ndarray:
    """Solve ``(delta L + 1) u = f`` for periodic samples on ``[0, 2 pi)``.

    Parameters
    ----------
    a, b : float or array_like
        Coefficients of ``L u = -a u'' + b u'``; arrays give variable coefficients.
    method : {"fd", "spectral"}
        ``"fd"`` is the upwinded M-matrix discretization, for which
        ``max|u| <= max|f|`` holds exactly.  ``"spectral"`` divides Fourier
        coefficients and needs constant coefficients.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    f = np.asarray(f, dtype=float)
    n = f.shape[0]
    if method == "spectral":
        if np.ndim(a) or np.ndim(b):
            raise ValueError("spectral solve needs constant coefficients")
        if a <= 0:
            raise ValueError("operator is not elliptic: a must be positive")
        k = np.fft.rfftfreq(n, 1.0 / n)
        sym = 1.0 + delta * (a * k ** 2 + 1j * b * k)
        return np.fft.irfft(np.fft.rfft(f, axis=0) / sym.reshape((-1,) + (1,) * (f.ndim - 1)),
                            n=n, axis=0)
    if method != "fd":
        raise ValueError(f"unknown method {method!r}")
    return cyclic_tridiagonal_solve(*resolvent_bands(n, delta, a, b), f)


def resolvent_residual(u, f, delta, a=1.0, b=0.0) -> float:
    n = np.shape(f)[0]
    return float(np.max(np.abs(cyclic_tridiagonal_apply(*resolvent_bands(n, delta, a, b), u) - f)))


def weierstrass(n_points, alpha, modes=512, phases=None, rng=None) -> np.ndarray:
    """Lacunary sum ``sum_k 2^(-k alpha) cos(2^k x + phase_k)`` over ``2^k <= modes``."""
    K = int(np.floor(np.log2(modes)))
    if phases is None:
        phases = np.zeros(K + 1) if rng is None else rng.uniform(0, 2 * np.pi, K + 1)
    x = 2 * np.pi * np.arange(n_points) / n_points
    k = np.arange(K + 1)
    return (2.0 ** (-k * alpha)) @ np.cos(np.outer(2.0 ** k, x) + np.asarray(phases)[:, None])


def rate_fit(f, deltas, alpha=None, **kw):
    """Sup error ``max|u_delta - f|`` per ``delta`` and the least-squares log-log slope."""
    deltas = np.asarray(deltas, dtype=float)
    errs = np.array([np.max(np.abs(resolvent_solve(f, d, **kw) - f)) for d in deltas])
    slope = float(np.polyfit(np.log(deltas), np.log(errs), 1)[0])
    return errs, slope


def resolvent_bounds(f, delta, alpha, **kw):
    """``(max|u|, max|f|, [u]_alpha, [f]_alpha)`` for one solve."""
    u = resolvent_solve(f, delta, **kw)
    return (float(np.max(np.abs(u))), float(np.max(np.abs(f))),
            holder_seminorm(u, alpha), holder_seminorm(f, alpha))


def write_rate_fit(path, deltas, errs, slope, config=None):
    """CSV ``delta,sup_error,fitted_exponent``."""
    with open(Path(path), "w", newline="") as fh:
        if config is not None:
            fh.write(f"# config: {config}\n")
        wr = csv.writer(fh)
        wr.writerow(["delta", "sup_error", "fitted_exponent"])
        for d, e in zip(deltas, errs):
            wr.writerow([f"{d:.17g}", f"{e:.17g}", f"{slope:.17g}"])
