"""Singular strain of a dislocation loop and its first variation.

The strain is rank one, ``S(x) = b (x) Shat(x)``, where

    Shat(x) = int_gamma k(x - y) x tau_y dH^1_y,    k(z) = -z / (4 pi |z|^3).

``Shat`` is the Biot-Savart field of a unit current along the loop.  Each
point evaluation uses composite Gauss-Legendre panels refined toward the
parts of the curve close to ``x``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import (ClosedCurve, StraightSegment, TubeError, _curvature_from_derivatives, _resize_spectrum,
                       _spectrum_weights, adapted_frame, closest_point_projection, tube_point)
from .quadrature import QuadratureSpec, adaptive_panels, panel_rule

FOUR_PI = 4.0 * np.pi


class SingularityError(ValueError):
    """Evaluation point lies on the curve."""


def newton_kernel(x) -> np.ndarray:
    """Gradient of the Newtonian potential, ``-x / (4 pi |x|^3)``."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(r == 0):
        raise SingularityError("kernel is singular at the origin")
    return -x / (FOUR_PI * r ** 3)


def kernel_jacobian(z) -> np.ndarray:
    """Jacobian of :func:`newton_kernel`, symmetric, shape ``(..., 3, 3)``."""
    z = np.asarray(z, dtype=float)
    r2 = np.einsum("...i,...i->...", z, z)
    inv3 = r2 ** -1.5
    inv5 = inv3 / r2
    out = 3.0 * inv5[..., None, None] * z[..., :, None] * z[..., None, :]
    out -= inv3[..., None, None] * np.eye(3)
    return out / FOUR_PI


def _jacobian_apply(z, v):
    """``Dk(z) v`` without forming the matrices."""
    r2 = np.einsum("...i,...i->...", z, z)
    inv3 = r2 ** -1.5
    zv = np.einsum("...i,...i->...", z, v)
    return (3.0 * (zv * inv3 / r2)[..., None] * z - inv3[..., None] * v) / FOUR_PI


@dataclass
class Variation:
    """Displacement field ``phi`` sampled at the nodes of a curve."""

    phi: np.ndarray

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        if self.phi.ndim != 2 or self.phi.shape[1] != 3:
            raise ValueError(f"variation must have shape (N, 3), got {self.phi.shape}")

    def check(self, curve):
        if self.phi.shape[0] != curve.n:
            raise ValueError(f"variation has {self.phi.shape[0]} samples, curve has {curve.n}")
        return self

    def refined(self, n):
        m = self.phi.shape[0]
        if n == m:
            return self
        coeffs = _resize_spectrum(np.fft.rfft(self.phi, axis=0) / m, m, n)
        return Variation(np.fft.irfft(coeffs, n=n, axis=0) * n)


@dataclass
class StrainEval:
    """Strain at one point with its near-curve decomposition.

    ``value = b (x) (leading_inverse / dist + |log dist| leading_log + remainder) / (2 pi)``
    whenever the decomposition fields are present.
    """

    value: np.ndarray
    dist: float
    point: np.ndarray
    error: float = 0.0
    leading_inverse: np.ndarray | None = None
    leading_log: np.ndarray | None = None
    remainder: np.ndarray | None = None
    foot: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def has_decomposition(self) -> bool:
        return self.remainder is not None

    def reconstruct(self, b) -> np.ndarray:
        if not self.has_decomposition:
            raise ValueError("decomposition is only available inside the tube")
        vec = (self.leading_inverse / self.dist + abs(np.log(self.dist)) * self.leading_log
               + self.remainder)
        return np.outer(b, vec) / (2 * np.pi)


def _burgers(b):
    b = np.asarray(b, dtype=float)
    if b.shape != (3,) or not np.linalg.norm(b) > 0:
        raise ValueError("Burgers vector must be a nonzero 3-vector")
    return b


def line_rule(curve, x, quad: QuadratureSpec | None = None, order=None):
    """Panel rule adapted to target ``x``.

    Returns
    -------
    s, w : ndarray
        Parameters and weights.
    near : float
        Smallest sampled distance from ``x`` to the curve.
    """
    quad = quad or QuadratureSpec()
    order = order or quad.order
    x = np.asarray(x, dtype=float)

    def distance(s):
        return np.linalg.norm(curve.evaluate(s) - x, axis=-1)

    if curve.closed:
        L = curve.length
        a, b = 0.0, L
        speed = 1.05 * float(np.max(curve.speed))
        coarse = quad.panel_length or min(L / 16, curve.embeddedness_radius)
        start = max(16, int(np.ceil(L / coarse)))
        dense = curve.refined(max(8 * curve.n, 512)).nodes
    else:
        a, b = -curve.half_length, curve.half_length
        speed = 1.0
        start = 8
        dense = curve.evaluate(np.linspace(a, b, 1025))
    near = float(np.min(np.linalg.norm(dense - x, axis=1)))
    floor = 1e-12 * curve.length
    if near < floor:
        raise SingularityError(f"point is within {floor:.3g} of the curve")
    edges = adaptive_panels(distance, a, b, order=order, start=start, speed=speed,
                            near=near, innermost=quad.innermost, max_levels=quad.max_levels)
    s, w = panel_rule(edges, order)
    return s, w, edges, near


def _strain_hat(curve, x, s, w):
    y = curve.evaluate(s)
    dy = curve.evaluate(s, 1)
    K = newton_kernel(x - y)
    return w @ np.cross(K, dy)


def strain_hat(curve, x, quad: QuadratureSpec | None = None):
    """Vector part ``Shat`` of the strain and an error estimate."""
    s, w, edges, near = line_rule(curve, x, quad)
    val = _strain_hat(curve, x, s, w)
    order = (quad or QuadratureSpec()).order
    s2, w2 = panel_rule(edges, max(2, order // 2))
    err = float(np.linalg.norm(val - _strain_hat(curve, x, s2, w2)))
    return val, err, near


def singular_strain(curve, b, x, quad: QuadratureSpec | None = None) -> StrainEval:
    """Strain ``S(x)`` of the loop ``curve`` with Burgers vector ``b``.

    Inside the tube of certified radius the result also carries the split into
    the ``1/dist`` term, the ``|log dist|`` term and the bounded remainder.
    The reported error compares against a half-order rule on the same panels,
    so it overestimates the true error.
    """
    b = _burgers(b)
    x = np.asarray(x, dtype=float)
    shat, err, near = strain_hat(curve, x, quad)
    ev = StrainEval(value=np.outer(b, shat), dist=near, point=x, error=err)
    if curve.closed:
        chart = adapted_frame(curve)
        try:
            s0, r, _ = closest_point_projection(chart, x)
        except TubeError:
            return ev
        ev.dist = r
        ev.foot = s0
        d1, d2 = curve.evaluate(s0, 1), curve.evaluate(s0, 2)
        tau = d1 / np.linalg.norm(d1)
        H = _curvature_from_derivatives(d1, d2)
        nu = (x - curve.evaluate(s0)) / r
    else:
        s0 = float(np.clip((x - curve.center) @ curve.direction, -curve.half_length,
                           curve.half_length))
        foot = curve.evaluate(s0)
        r = float(np.linalg.norm(x - foot))
        if abs(s0) >= curve.half_length:
            return ev
        ev.dist, ev.foot = r, s0
        tau, H, nu = curve.direction, np.zeros(3), (x - foot) / r
    _decompose(ev, shat, tau, H, nu, r)
    return ev


def _decompose(ev, shat, tau, H, nu, r):
    ev.leading_inverse = np.cross(tau, nu)
    ev.leading_log = 0.5 * np.cross(tau, H)
    ev.remainder = (2 * np.pi * shat - ev.leading_inverse / r
                    - abs(np.log(r)) * ev.leading_log)


def strain_expansion(chart, b, eps, s, theta, quad: QuadratureSpec | None = None) -> StrainEval:
    """Decomposition of the strain at ``psi_eps(s, theta)``.

    The remainder is what is left after subtracting the two leading terms from
    the fully resolved integral.
    """
    b = _burgers(b)
    curve = chart.curve
    if eps >= curve.embeddedness_radius:
        raise ValueError(f"eps={eps} is not below the embeddedness radius "
                         f"{curve.embeddedness_radius:.6g}")
    x = tube_point(chart, s, eps, theta)
    shat, err, _ = strain_hat(curve, x, quad)
    d1, d2 = curve.evaluate(s, 1), curve.evaluate(s, 2)
    tau, n1, n2 = chart.frame_from_velocity(d1)
    H = _curvature_from_derivatives(d1, d2)
    nu = chart.normal(n1, n2, np.asarray(theta, dtype=float))
    ev = StrainEval(value=np.outer(b, shat), dist=float(eps), point=x, error=err, foot=float(s))
    _decompose(ev, shat, tau, H, nu, eps)
    return ev


def strain_field(curve, b, points, quad: QuadratureSpec | None = None) -> np.ndarray:
    """Strain matrices at many points, shape ``(P, 3, 3)``."""
    b = _burgers(b)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty((len(pts), 3, 3))
    for i, x in enumerate(pts):
        out[i] = np.outer(b, strain_hat(curve, x, quad)[0])
    return out


def vector_potential(curve, x, quad: QuadratureSpec | None = None) -> np.ndarray:
    """``A(x) = (1/4pi) int tau_y / |x - y| dH^1_y``; its curl is ``Shat``."""
    s, w, _, _ = line_rule(curve, x, quad)
    z = np.asarray(x, dtype=float) - curve.evaluate(s)
    return (w / (FOUR_PI * np.linalg.norm(z, axis=1))) @ curve.evaluate(s, 1)


def _variation_samples(curve, variation, s):
    """Interpolated ``phi`` at parameters ``s``."""
    phi = variation.check(curve).phi
    n = curve.n
    hat = np.fft.rfft(phi, axis=0) / n
    k = np.arange(n // 2 + 1) * (2 * np.pi / curve.length)
    coef = _spectrum_weights(n)[:, None] * hat
    return (np.exp(1j * np.multiply.outer(s, k)) @ coef).real


def w_phi(curve, variation, x, quad: QuadratureSpec | None = None) -> float:
    """``w(x) = int <k(x - y) x tau_y, phi(y)> dH^1_y``."""
    if not curve.closed:
        raise TypeError("variations are defined on closed curves only")
    s, w, _, _ = line_rule(curve, x, quad)
    z = np.asarray(x, dtype=float) - curve.evaluate(s)
    c = np.cross(curve.evaluate(s, 1), _variation_samples(curve, variation, s))
    return float(w @ np.einsum("ij,ij->i", newton_kernel(z), c))


def grad_w_phi(curve, variation, x, quad: QuadratureSpec | None = None) -> np.ndarray:
    """Gradient of :func:`w_phi`, differentiating the kernel under the integral."""
    if not curve.closed:
        raise TypeError("variations are defined on closed curves only")
    s, w, _, _ = line_rule(curve, x, quad)
    z = np.asarray(x, dtype=float) - curve.evaluate(s)
    c = np.cross(curve.evaluate(s, 1), _variation_samples(curve, variation, s))
    return w @ _jacobian_apply(z, c)


def dot_S(curve, b, variation, x, quad: QuadratureSpec | None = None) -> np.ndarray:
    """Rate of change of ``S(x)`` along ``gamma + t phi``: ``-b (x) grad w``."""
    b = _burgers(b)
    return -np.outer(b, grad_w_phi(curve, variation, x, quad))


def export_strain_grid(path, points, values, dists):
    """CSV with columns ``x,y,z,S11..S33,dist``."""
    header = ["x", "y", "z"] + [f"S{i}{j}" for i in range(1, 4) for j in range(1, 4)] + ["dist"]
    with open(Path(path), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for p, S, d in zip(points, values, dists):
            wr.writerow([f"{v:.17g}" for v in (*p, *np.ravel(S), d)])
