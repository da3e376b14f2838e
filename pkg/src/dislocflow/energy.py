"""Core-cutoff elastic energy of a loop and its first variation.

Outside the core the energy density is ``|S|^2 / 2 = |b|^2 |Shat|^2 / 2``.
With ``Shat = curl A`` and ``div (A x Shat) = |Shat|^2`` away from the curve,
the energy of the whole exterior of a tube collapses to a surface integral

    int_{|x - gamma| > r} |Shat|^2 dx = -int_{dist = r} <A x Shat, nu> dA,

because ``A`` and ``Shat`` decay like ``|x|^-2`` and ``|x|^-3``.  The far part
uses that identity on the split tube.  The tube part is integrated in
cylindrical coordinates, or by the same identity when ``method="surface"``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .geometry import adapted_frame, TubeChart
from .quadrature import QuadratureSpec, gauss_legendre
from .strain import Variation, _burgers
from .tube import TubeSurface


@dataclass
class EnergyBreakdown:
    """Energy split at the radius ``split_radius``.

    ``tail_bound`` bounds the share of ``far_part`` that lies beyond
    ``outer_radius`` (it is included, not dropped).
    """

    total: float
    tube_part: float
    far_part: float
    asymptote: float
    renormalized: float
    eps: float
    split_radius: float
    outer_radius: float | None = None
    tail_bound: float | None = None

    def as_dict(self):
        return asdict(self)


class CorrectionField:
    """Interface for a domain correction ``u`` added to the singular strain.

    Subclasses provide ``value(x)`` (shape ``(..., 3)``), ``gradient(x)``
    (shape ``(..., 3, 3)``) and ``energy()``, the term ``I(u)``.  ``checked``
    tells whether :func:`check_harmonic` must pass for the provider.
    """

    checked = True
    is_zero = False

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def energy(self) -> float:
        raise NotImplementedError


class ZeroCorrection(CorrectionField):
    is_zero = True

    def value(self, x):
        return np.zeros(np.shape(x))

    def gradient(self, x):
        return np.zeros(np.shape(x) + (3,))

    def energy(self):
        return 0.0


class ConstantCorrection(CorrectionField):
    """``u = c``.  Without a boundary its energy term is zero."""

    def __init__(self, c):
        self.c = np.asarray(c, dtype=float)

    def value(self, x):
        return np.broadcast_to(self.c, np.shape(x)).copy()

    def gradient(self, x):
        return np.zeros(np.shape(x) + (3,))

    def energy(self):
        return 0.0


class LinearCorrection(CorrectionField):
    """``u = A x`` on the box ``[lo, hi]``; energy ``|A|^2 vol / 2``."""

    def __init__(self, A, lo=(-2.0, -2.0, -2.0), hi=(2.0, 2.0, 2.0)):
        self.A = np.asarray(A, dtype=float)
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)

    def value(self, x):
        return np.asarray(x, dtype=float) @ self.A.T

    def gradient(self, x):
        return np.broadcast_to(self.A, np.shape(x) + (3,)).copy()

    def energy(self):
        return 0.5 * float(np.sum(self.A ** 2)) * float(np.prod(self.hi - self.lo))


def check_harmonic(provider: CorrectionField, centers, radius=0.05, n=16, tol=1e-4) -> bool:
    """Mean-value test on small spheres (Gauss-Legendre in ``cos``, trapezoid in angle)."""
    if not provider.checked:
        return True
    x, w = gauss_legendre(n)
    phi = 2 * np.pi * np.arange(2 * n) / (2 * n)
    st = np.sqrt(1 - x ** 2)
    dirs = np.stack([np.outer(st, np.cos(phi)), np.outer(st, np.sin(phi)),
                     np.outer(x, np.ones_like(phi))], axis=-1).reshape(-1, 3)
    wts = np.repeat(w, 2 * n) / (2.0 * 2 * n)
    for c in np.atleast_2d(centers):
        mean = wts @ provider.value(c + radius * dirs)
        if np.max(np.abs(mean - provider.value(c))) > tol:
            return False
    return True


def _chart(curve):
    if not getattr(curve, "closed", False):
        raise TypeError("energies are defined for closed loops only")
    return curve if isinstance(curve, TubeChart) else adapted_frame(curve)


def outside_energy(chart, b, radius, quad=None) -> float:
    """Whole-space energy outside the tube of the given radius."""
    surf = TubeSurface(chart, radius, quad)
    li = surf.line_integrals(strain=True, potential=True)
    flux = np.einsum("nti,nti->nt", np.cross(li["potential"], li["strain"]), surf.normals)
    return -0.5 * float(b @ b) * float(np.sum(flux * surf.weights))


def shell_energy(chart, b, inner, outer, quad=None) -> float:
    """Energy in ``inner < dist < outer`` by Gauss-Legendre in ``log r``."""
    quad = quad or QuadratureSpec()
    x, w = gauss_legendre(quad.n_radial)
    a, c = np.log(inner), np.log(outer)
    rho = 0.5 * (c - a) * (x + 1) + a
    wr = 0.5 * (c - a) * w
    total = 0.0
    for ri, wi in zip(np.exp(rho), wr):
        surf = TubeSurface(chart, ri, quad)
        S = surf.line_integrals(strain=True)["strain"]
        total += wi * ri * float(np.sum(np.einsum("nti,nti->nt", S, S) * surf.weights))
    return 0.5 * float(b @ b) * total


def far_tail_bound(curve, b, outer_radius) -> float:
    """Bound on the energy outside the ball of radius ``outer_radius`` about the centroid.

    Uses ``|S| <= |b| L / (4 pi dist^2)`` with ``dist >= |x| - a``.
    """
    center = curve.nodes.mean(axis=0)
    a = float(np.max(np.linalg.norm(curve.nodes - center, axis=1)))
    R = float(outer_radius)
    if R <= a:
        return np.inf
    d = R - a
    L = curve.length
    return float(b @ b) * L ** 2 / (8 * np.pi) * (1 / d + a / d ** 2 + a ** 2 / (3 * d ** 3))


def core_energy(curve, b, eps, outer_radius=None, quad=None, *, split_radius=None,
                method="cylindrical") -> EnergyBreakdown:
    """Energy of the singular strain outside the core tube of radius ``eps``.

    Parameters
    ----------
    method : {"cylindrical", "surface"}
        How the tube part ``eps < dist < split_radius`` is integrated.
    """
    b = _burgers(b)
    chart = _chart(curve)
    curve = chart.curve
    rstar = curve.embeddedness_radius
    rbar = 0.5 * rstar if split_radius is None else float(split_radius)
    if rbar > rstar:
        raise ValueError(f"split radius {rbar:.6g} exceeds the embeddedness radius {rstar:.6g}")
    if not 0 < eps < rbar:
        raise ValueError(f"eps={eps} must lie in (0, {rbar:.6g})")
    far = outside_energy(chart, b, rbar, quad)
    if method == "cylindrical":
        tube = shell_energy(chart, b, eps, rbar, quad)
    elif method == "surface":
        tube = outside_energy(chart, b, eps, quad) - far
    else:
        raise ValueError(f"unknown method {method!r}")
    total = tube + far
    asym = float(b @ b) * curve.length * abs(np.log(eps)) / (4 * np.pi)
    tail = None
    if outer_radius is not None:
        diam = curve.diameter
        if outer_radius < 4 * diam:
            raise ValueError(f"outer_radius must be at least 4 * diameter = {4 * diam:.6g}")
        tail = far_tail_bound(curve, b, outer_radius)
    return EnergyBreakdown(total=total, tube_part=tube, far_part=far, asymptote=asym,
                           renormalized=total - asym, eps=float(eps), split_radius=rbar,
                           outer_radius=outer_radius, tail_bound=tail)


def effective_energy(curve, b, eps, correction: CorrectionField | None = None, quad=None,
                     **kwargs) -> float:
    """Core energy plus the correction's own energy term."""
    correction = correction or ZeroCorrection()
    return core_energy(curve, b, eps, quad=quad, **kwargs).total + correction.energy()


def variation_integrand(surf: TubeSurface, b, phi, correction=None):
    """Pointwise density of the first variation on the core surface."""
    correction = correction or ZeroCorrection()
    li = surf.line_integrals(strain=True, normal_strain=True, phi=phi)
    bb = float(b @ b)
    nu = surf.normals
    phin = np.einsum("ni,nti->nt", phi, nu)
    dens = -0.5 * bb * np.einsum("nti,nti->nt", li["strain"], li["strain"]) * phin
    g = bb * li["normal_strain"]
    if not correction.is_zero:
        X = surf.points
        g = g + np.einsum("i,ntij,ntj->nt", b, correction.gradient(X), nu)
        ub = correction.value(X) @ b
        dens = dens - ub * np.einsum("nti,nti->nt", li["grad_w"], nu)
    dens = dens + li["w"] * g
    return dens


def energy_variation(curve, b, eps, variation: Variation, correction=None, quad=None) -> float:
    """Derivative of the effective energy along ``gamma + t phi`` at ``t = 0``."""
    b = _burgers(b)
    chart = _chart(curve)
    quad = quad or QuadratureSpec()
    if eps >= chart.curve.embeddedness_radius:
        raise ValueError("eps must be below the embeddedness radius")
    var = Variation(variation.phi if isinstance(variation, Variation) else variation)
    var.check(chart.curve)
    ns = quad.n_s or chart.curve.n
    surf = TubeSurface(chart, eps, quad)
    phi = var.refined(ns).phi
    return float(np.sum(variation_integrand(surf, b, phi, correction) * surf.weights))


def write_energy_sweep(path, rows, config=None):
    """CSV ``eps,total,tube_part,far_part,asymptote,renormalized``."""
    cols = ["eps", "total", "tube_part", "far_part", "asymptote", "renormalized"]
    with open(Path(path), "w", newline="") as fh:
        if config is not None:
            fh.write(f"# config: {config}\n")
        wr = csv.writer(fh)
        wr.writerow(cols)
        for r in rows:
            wr.writerow([f"{getattr(r, c):.17g}" for c in cols])
