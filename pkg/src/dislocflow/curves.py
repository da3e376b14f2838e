"""Reference loops used by tests, demos and the command line."""
from __future__ import annotations

import numpy as np
from scipy import integrate

from .geometry import ClosedCurve, resample_arclength


def circle(radius=1.0, n=64, center=(0.0, 0.0, 0.0)) -> ClosedCurve:
    """Circle in the plane ``z = center[2]``, counterclockwise from ``+x``."""
    t = 2 * np.pi * np.arange(n) / n
    pts = np.stack([radius * np.cos(t), radius * np.sin(t), np.zeros(n)], axis=1)
    return ClosedCurve(pts + np.asarray(center, dtype=float))


def ellipse(a=2.0, b=1.0, n=128, arclength=True) -> ClosedCurve:
    """Planar ellipse with semi-axes ``a`` (along x) and ``b`` (along y)."""
    t = 2 * np.pi * np.arange(n) / n
    c = ClosedCurve(np.stack([a * np.cos(t), b * np.sin(t), np.zeros(n)], axis=1))
    return resample_arclength(c, n) if arclength else c


def _bump(x):
    """Smooth unit-mass profile on (0, 1)."""
    out = np.zeros_like(x)
    m = (x > 0) & (x < 1)
    y = 2 * x[m] - 1
    out[m] = np.exp(-1.0 / (1.0 - y * y))
    return out


_BUMP_MASS = integrate.quad(lambda x: float(_bump(np.array([x]))[0]), 0, 1, epsabs=1e-15)[0]


def stadium(straight=2.0, turn=np.pi, n=256) -> ClosedCurve:
    """Planar loop with two exactly straight sides joined by smooth half-turns.

    The curvature is a compactly supported smooth bump on each turn and zero
    on the straight sides, so the curve is smooth yet has vanishing curvature
    on open arcs.
    """
    L = 2 * (straight + turn)
    m = 1 << 16
    sig = (np.arange(m) + 0.5) * (L / m)
    local = np.mod(sig, straight + turn) - straight
    kappa = np.pi * _bump(local / turn) / (_BUMP_MASS * turn)
    angle = np.cumsum(kappa) * (L / m)
    angle -= 0.5 * kappa * (L / m)
    xy = np.cumsum(np.stack([np.cos(angle), np.sin(angle)], axis=1), axis=0) * (L / m)
    xy -= xy.mean(axis=0)
    idx = (np.arange(n) * m) // n
    pts = np.column_stack([xy[idx], np.zeros(n)])
    return ClosedCurve(pts)


def torus_knot(p=3, q=2, major=2.0, minor=0.8, n=256) -> ClosedCurve:
    """Smooth non-planar ``(p, q)`` torus knot, resampled to arclength."""
    t = 2 * np.pi * np.arange(4 * n) / (4 * n)
    r = major + minor * np.cos(p * t)
    pts = np.stack([r * np.cos(q * t), r * np.sin(q * t), minor * np.sin(p * t)], axis=1)
    return resample_arclength(ClosedCurve(pts), n)


def perturbed_circle(amplitude=0.05, modes=4, seed=0, n=128, radius=1.0) -> ClosedCurve:
    """Circle plus a random smooth displacement of the given sup amplitude."""
    rng = np.random.default_rng(seed)
    t = 2 * np.pi * np.arange(n) / n
    base = np.stack([np.cos(t), np.sin(t), np.zeros(n)], axis=1) * radius
    disp = np.zeros((n, 3))
    for k in range(1, modes + 1):
        a, b = rng.normal(size=(2, 3)) / k ** 2
        disp += np.outer(np.cos(k * t), a) + np.outer(np.sin(k * t), b)
    disp *= amplitude / np.max(np.linalg.norm(disp, axis=1))
    return ClosedCurve(base + disp)


def dumbbell(gap=0.3, width=2.0, lobe=1.0, n=256) -> ClosedCurve:
    """Planar two-lobed loop whose waist is ``gap`` wide.

    ``x = width cos t``, ``y = sin t (gap/2 + lobe cos^2 t)``: the waist
    points ``t = +-pi/2`` sit at ``(0, +-gap/2)``.
    """
    t = 2 * np.pi * np.arange(4 * n) / (4 * n)
    y = np.sin(t) * (0.5 * gap + lobe * np.cos(t) ** 2)
    pts = np.stack([width * np.cos(t), y, np.zeros_like(t)], axis=1)
    return resample_arclength(ClosedCurve(pts), n)


BUNDLED = {
    "circle": lambda: circle(1.0, 64),
    "ellipse": lambda: ellipse(2.0, 1.0, 128),
    "stadium": lambda: stadium(),
    "torus_knot": lambda: torus_knot(),
}


def bundled(name: str) -> ClosedCurve:
    try:
        return BUNDLED[name]()
    except KeyError:
        raise KeyError(f"unknown bundled curve {name!r}; choose from {sorted(BUNDLED)}") from None
