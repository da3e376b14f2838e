"""Composite Gauss-Legendre rules for nearly singular line integrals.

Two rule builders live here:

* :func:`graded_offsets` builds one symmetric panel pattern around a
  parameter offset of zero.  Every node of a tube grid sits at the same
  distance from the curve, so a single pattern can be shared by all of them.
* :func:`adaptive_panels` refines panels for one arbitrary target point,
  splitting any panel that is long compared with its distance to the target.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class QuadratureSpec:
    """Resolution knobs shared by the line and surface integrators.

    Parameters
    ----------
    order : int
        Gauss-Legendre nodes per panel.
    panel_length : float or None
        Arclength of the coarse panels far from the target.  ``None`` picks
        ``min(L/16, embeddedness radius)``.
    n_theta : int
        Trapezoid nodes around each tube cross-section.
    n_s : int or None
        Samples along the curve for surface integrals.  ``None`` uses the
        curve's own node count.
    n_radial : int
        Gauss-Legendre nodes in ``log r`` for cylindrical volume integrals.
    innermost : float
        Length of the panels touching the near point, as a fraction of the
        target distance.
    max_levels : int
        Cap on adaptive bisection passes.
    """

    order: int = 16
    panel_length: float | None = None
    n_theta: int = 32
    n_s: int | None = None
    n_radial: int = 24
    innermost: float = 0.25
    max_levels: int = 60

    def __post_init__(self):
        if self.order < 2:
            raise ValueError("order must be at least 2")
        if self.n_theta < 4:
            raise ValueError("n_theta must be at least 4")
        if self.n_radial < 2:
            raise ValueError("n_radial must be at least 2")
        if not 0 < self.innermost <= 1:
            raise ValueError("innermost must lie in (0, 1]")


@lru_cache(maxsize=32)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1] (read-only, cached)."""
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_rule(edges: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Map a Gauss-Legendre rule onto consecutive panels ``edges[i]..edges[i+1]``."""
    x, w = gauss_legendre(order)
    a = edges[:-1, None]
    half = 0.5 * (edges[1:, None] - a)
    nodes = a + half * (x + 1.0)
    weights = half * w
    return nodes.ravel(), weights.ravel()


def _half_edges(first: float, half_period: float, coarse: float, ratio: float) -> np.ndarray:
    edges = [0.0]
    length = first
    while edges[-1] < half_period:
        nxt = edges[-1] + min(length, coarse)
        if nxt > half_period - 0.25 * min(length, coarse):
            nxt = half_period
        edges.append(nxt)
        length = (ratio - 1.0) * nxt if ratio > 1 else length
    return np.asarray(edges)


def graded_offsets(dist: float, period: float, coarse: float, order: int = 16,
                   innermost: float = 0.25, ratio: float = 2.0):
    """Offsets and weights of a periodic rule graded toward offset zero.

    The panels touching zero have length ``innermost * dist``; each following
    panel is ``ratio - 1`` times its distance from zero until it reaches
    ``coarse``, after which panels stay at ``coarse`` up to half the period.

    Returns
    -------
    offsets, weights : ndarray
        Both of shape ``(M,)``; offsets lie in ``[-period/2, period/2]``.
    """
    if dist <= 0 or period <= 0 or coarse <= 0:
        raise ValueError("dist, period and coarse must be positive")
    coarse = min(coarse, 0.5 * period)
    first = min(innermost * dist, coarse)
    half = _half_edges(first, 0.5 * period, coarse, ratio)
    edges = np.concatenate([-half[:0:-1], half])
    return panel_rule(edges, order)


def adaptive_panels(distance, a: float, b: float, *, order: int, start: int,
                    speed: float, near: float | None = None,
                    innermost: float = 0.25, max_levels: int = 60) -> np.ndarray:
    """Split ``[a, b]`` until every panel is short relative to its distance.

    Parameters
    ----------
    distance : callable
        Maps an array of parameters to distances from the target point.
    start : int
        Number of uniform panels to start from.
    speed : float
        Upper bound on ``|gamma'|`` so that parameter lengths convert to
        arclength.
    near : float or None
        Distance from the target to the curve.  When given, panels within
        ``2 * near`` of the target are split further until shorter than
        ``innermost * near``.

    Returns
    -------
    edges : ndarray
        Sorted panel edges.
    """
    x, _ = gauss_legendre(order)
    edges = np.linspace(a, b, start + 1)
    for _ in range(max_levels):
        lo, hi = edges[:-1], edges[1:]
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        nodes = mid[:, None] + half[:, None] * x
        probe = np.concatenate([nodes, lo[:, None], hi[:, None]], axis=1)
        dmin = distance(probe).min(axis=1)
        length = speed * (hi - lo)
        split = length > dmin
        if near is not None:
            split |= (dmin < 2.0 * near) & (length > innermost * near)
        if not split.any():
            return edges
        edges = np.sort(np.concatenate([edges, mid[split]]))
    raise RuntimeError("adaptive panel refinement did not settle; target too close to the curve")
