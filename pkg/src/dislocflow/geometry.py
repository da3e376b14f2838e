"""Closed space curves, an adapted normal frame and tubular coordinates.

A :class:`ClosedCurve` is the trigonometric interpolant of its nodes, taken at
uniform parameter values ``s_k = k L / N`` where ``L`` is the arclength.  Every
derivative, shift and resampling below is exact for that interpolant, so a
curve built from arclength-equispaced nodes has unit speed up to
interpolation error.
"""
from __future__ import annotations

import json
import warnings
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import optimize

__all__ = [
    "GeometryError", "DegenerateCurveError", "FrameError", "TubeError",
    "EmbeddednessError", "TubeWarning", "ClosedCurve", "StraightSegment",
    "TubeChart", "resample_arclength", "tangent", "curvature_vector",
    "adapted_frame", "tube_point", "area_element", "embeddedness_radius",
    "closest_point_projection", "fourier_shift", "load_curve", "save_curve",
]


class GeometryError(ValueError):
    """Base class for invalid geometric input."""


class DegenerateCurveError(GeometryError):
    """Raised for curves with repeated nodes or too few samples."""


class FrameError(GeometryError):
    """No reference direction keeps clear of the tangent image."""

    def __init__(self, message, clearance):
        super().__init__(message)
        self.clearance = clearance


class TubeError(GeometryError):
    """A point lies outside the tubular neighbourhood."""

    def __init__(self, message, candidate):
        super().__init__(message)
        self.candidate = candidate


class EmbeddednessError(GeometryError):
    """The sampled curve touches or crosses itself."""


class TubeWarning(UserWarning):
    """Tube radius at or beyond the certified embeddedness radius."""


def _spectrum_weights(n):
    """Multiplicity of each rfft mode in the real interpolant."""
    w = np.full(n // 2 + 1, 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    return w


def _resize_spectrum(hat, n_old, n_new):
    """Coefficients for evaluating the same interpolant on ``n_new`` points."""
    out = np.zeros((n_new // 2 + 1,) + hat.shape[1:], dtype=complex)
    keep = min(n_old // 2, n_new // 2) + 1
    out[:keep] = hat[:keep]
    if n_old % 2 == 0 and n_new > n_old:
        # the old Nyquist mode is an ordinary mode on the finer grid
        out[n_old // 2] *= 0.5
    if n_new % 2 == 0 and n_new < n_old:
        out[n_new // 2] = 2.0 * out[n_new // 2].real
    return out


def fourier_shift(values, offsets, period, deriv=0):
    """Evaluate a sampled periodic field at every sample shifted by each offset.

    Parameters
    ----------
    values : array_like, shape (n, ...)
        Samples at ``k * period / n``.
    offsets : array_like, shape (m,)
        Parameter shifts.
    deriv : int
        Derivative order of the interpolant to evaluate.

    Returns
    -------
    ndarray, shape (m, n, ...)
        ``out[i, k] = f^(deriv)(k * period / n + offsets[i])``.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    hat = np.fft.rfft(values, axis=0)
    k = np.arange(n // 2 + 1) * (2.0 * np.pi / period)
    mult = (1j * k) ** deriv
    phase = np.exp(1j * np.multiply.outer(np.asarray(offsets, dtype=float), k)) * mult
    extra = (1,) * (values.ndim - 1)
    coeffs = hat[None] * phase.reshape(phase.shape + extra)
    return np.fft.irfft(coeffs, n=n, axis=1)


class ClosedCurve:
    """Periodic curve in R^3 represented by its trigonometric interpolant.

    Parameters
    ----------
    nodes : array_like, shape (N, 3)
        Samples at uniform parameter values, without repeating the first node.
        ``N >= 8``.
    """

    closed = True

    def __init__(self, nodes):
        pts = np.array(nodes, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise DegenerateCurveError(f"nodes must have shape (N, 3), got {pts.shape}")
        if pts.shape[0] < 8:
            raise DegenerateCurveError(f"a closed curve needs at least 8 nodes, got {pts.shape[0]}")
        if not np.all(np.isfinite(pts)):
            raise DegenerateCurveError("nodes contain non-finite values")
        seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        scale = max(float(np.ptp(pts, axis=0).max()), np.finfo(float).tiny)
        bad = np.flatnonzero(seg <= 1e-12 * scale)
        if bad.size:
            raise DegenerateCurveError(
                f"zero-length segment between nodes {bad[0]} and {(bad[0] + 1) % len(pts)}")
        pts.setflags(write=False)
        self._nodes = pts
        self._hat = np.fft.rfft(pts, axis=0) / len(pts)

    def __repr__(self):
        return f"ClosedCurve(n={self.n}, length={self.length:.6g})"

    # basic data
    @property
    def nodes(self) -> np.ndarray:
        return self._nodes

    @property
    def n(self) -> int:
        return self._nodes.shape[0]

    @cached_property
    def length(self) -> float:
        """Arclength, by the trapezoid rule on an upsampled speed (spectrally accurate)."""
        n = self.n
        m = max(4 * n, 256)
        k = np.arange(n // 2 + 1)
        dhat = _resize_spectrum(self._hat * (1j * k)[:, None], n, m)
        du = np.fft.irfft(dhat, n=m, axis=0) * m
        return float(np.linalg.norm(du, axis=1).mean() * 2.0 * np.pi)

    @property
    def period(self) -> float:
        return self.length

    @property
    def params(self) -> np.ndarray:
        """Parameter values of the nodes."""
        return np.arange(self.n) * (self.length / self.n)

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @property
    def _omega(self):
        return 2.0 * np.pi / self.length

    def evaluate(self, s, deriv=0) -> np.ndarray:
        """Interpolant (or its ``deriv``-th derivative) at arbitrary parameters."""
        s = np.asarray(s, dtype=float)
        k = np.arange(self.n // 2 + 1) * self._omega
        coef = (_spectrum_weights(self.n) * (1j * k) ** deriv)[:, None] * self._hat
        phase = np.exp(1j * np.multiply.outer(s, k))
        return (phase @ coef).real

    def derivative(self, deriv=1) -> np.ndarray:
        """Spectral derivative at the nodes."""
        if deriv == 0:
            return self._nodes.copy()
        cache = self.__dict__.setdefault("_derivs", {})
        if deriv not in cache:
            k = np.arange(self.n // 2 + 1) * self._omega
            d = np.fft.irfft(self._hat * ((1j * k) ** deriv)[:, None], n=self.n, axis=0) * self.n
            d.setflags(write=False)
            cache[deriv] = d
        return cache[deriv]

    def shifted(self, offsets, deriv=0) -> np.ndarray:
        """Values at ``params + offset`` for every offset, shape (m, N, 3)."""
        return fourier_shift(self._nodes, offsets, self.length, deriv)

    # differential geometry at the nodes
    @cached_property
    def speed(self) -> np.ndarray:
        return np.linalg.norm(self.derivative(1), axis=1)

    @cached_property
    def tangent(self) -> np.ndarray:
        return self.derivative(1) / self.speed[:, None]

    @cached_property
    def curvature(self) -> np.ndarray:
        """Curvature vector with respect to arclength."""
        return _curvature_from_derivatives(self.derivative(1), self.derivative(2))

    @cached_property
    def embeddedness_radius(self) -> float:
        return _embeddedness_radius(self)

    @property
    def diameter(self) -> float:
        p = self._nodes
        return float(np.max(np.linalg.norm(p[:, None] - p[None], axis=-1)))

    # derived curves
    def refined(self, n: int) -> "ClosedCurve":
        """Same interpolant sampled at ``n`` uniform parameters (truncated if fewer)."""
        if n == self.n:
            return self
        coeffs = _resize_spectrum(self._hat, self.n, n)
        return ClosedCurve(np.fft.irfft(coeffs, n=n, axis=0) * n)

    def displaced(self, phi, t=1.0) -> "ClosedCurve":
        """The curve ``gamma + t * phi`` with ``phi`` sampled at the nodes."""
        phi = np.asarray(phi, dtype=float)
        if phi.shape != self._nodes.shape:
            raise ValueError(f"displacement has shape {phi.shape}, expected {self._nodes.shape}")
        return ClosedCurve(self._nodes + t * phi)

    def transformed(self, rotation=None, shift=None) -> "ClosedCurve":
        pts = self._nodes
        if rotation is not None:
            pts = pts @ np.asarray(rotation, dtype=float).T
        if shift is not None:
            pts = pts + np.asarray(shift, dtype=float)
        return ClosedCurve(pts)

    def arclength_at(self, s) -> np.ndarray:
        """Arclength from parameter 0 to ``s`` (``s`` in one period)."""
        return self._arclength_map(np.asarray(s, dtype=float))

    def _arclength_map(self, s):
        n = self.n
        m = max(4 * n, 256)
        k = np.arange(n // 2 + 1)
        dhat = _resize_spectrum(self._hat * (1j * k * self._omega)[:, None], n, m)
        speed = np.linalg.norm(np.fft.irfft(dhat, n=m, axis=0) * m, axis=1)
        shat = np.fft.rfft(speed) / m
        mean = shat[0].real
        kk = np.arange(1, m // 2 + 1) * self._omega
        coef = _spectrum_weights(m)[1:] * shat[1:] / (1j * kk)
        phase = np.exp(1j * np.multiply.outer(s, kk)) - 1.0
        return mean * s + (phase @ coef).real


class StraightSegment:
    """Open straight segment ``center + s * direction`` for ``|s| <= half_length``.

    Only the strain evaluators accept it.  Energies and forces need closed loops.
    """

    closed = False

    def __init__(self, direction=(0.0, 0.0, 1.0), half_length=1.0, center=(0.0, 0.0, 0.0), n=64):
        d = np.asarray(direction, dtype=float)
        if np.linalg.norm(d) == 0:
            raise DegenerateCurveError("direction must be nonzero")
        if half_length <= 0:
            raise DegenerateCurveError("half_length must be positive")
        self.direction = d / np.linalg.norm(d)
        self.half_length = float(half_length)
        self.center = np.asarray(center, dtype=float)
        self.n = int(n)

    @property
    def length(self):
        return 2.0 * self.half_length

    @property
    def params(self):
        return np.linspace(-self.half_length, self.half_length, self.n)

    @property
    def nodes(self):
        return self.evaluate(self.params)

    def evaluate(self, s, deriv=0):
        s = np.asarray(s, dtype=float)
        if deriv == 0:
            return self.center + s[..., None] * self.direction
        if deriv == 1:
            return np.broadcast_to(self.direction, s.shape + (3,)).copy()
        return np.zeros(s.shape + (3,))

    @property
    def speed(self):
        return np.ones(self.n)

    @property
    def tangent(self):
        return np.tile(self.direction, (self.n, 1))

    @property
    def curvature(self):
        return np.zeros((self.n, 3))

    @property
    def embeddedness_radius(self):
        return np.inf


def _curvature_from_derivatives(d1, d2):
    sp2 = np.einsum("...i,...i->...", d1, d1)
    tau = d1 / np.sqrt(sp2)[..., None]
    along = np.einsum("...i,...i->...", d2, tau)
    return (d2 - along[..., None] * tau) / sp2[..., None]


def resample_arclength(curve: ClosedCurve, n: int) -> ClosedCurve:
    """Nodes equispaced in arclength along the interpolant of ``curve``.

    The parameter values are found by Newton iteration on the spectrally
    integrated arclength map.
    """
    if n < 8:
        raise DegenerateCurveError(f"need at least 8 nodes, got {n}")
    L = curve.length
    target = np.arange(n) * (L / n)
    s = target.copy()
    for _ in range(50):
        g = curve._arclength_map(s) - target
        sp = np.linalg.norm(curve.evaluate(s, 1), axis=1)
        if np.any(sp <= 0):
            raise DegenerateCurveError("curve has a stationary point; cannot resample")
        step = g / sp
        s = s - step
        if np.max(np.abs(step)) < 1e-14 * L:
            break
    return ClosedCurve(curve.evaluate(s))


def tangent(curve) -> np.ndarray:
    """Unit tangent at the nodes."""
    return curve.tangent


def curvature_vector(curve) -> np.ndarray:
    """Curvature vector (second arclength derivative) at the nodes."""
    return curve.curvature


class TubeChart:
    """Adapted orthonormal frame and the cylindrical coordinates it induces.

    ``n1`` is the normalized projection of the fixed direction ``N`` onto the
    normal plane and ``n2 = tau x n1``.  Because only the first derivative
    enters, the frame stays smooth through inflection points.
    """

    def __init__(self, curve, reference_direction, clearance):
        N = np.asarray(reference_direction, dtype=float)
        self.curve = curve
        self.reference_direction = N / np.linalg.norm(N)
        self.clearance = float(clearance)

    def frame_from_velocity(self, d1):
        """``(tau, n1, n2)`` for velocity vectors ``d1`` of any shape ``(..., 3)``."""
        tau = d1 / np.linalg.norm(d1, axis=-1, keepdims=True)
        N = self.reference_direction
        p = N - np.einsum("...i,i->...", tau, N)[..., None] * tau
        n1 = p / np.linalg.norm(p, axis=-1, keepdims=True)
        n2 = np.cross(tau, n1)
        return tau, n1, n2

    def frame(self, s):
        return self.frame_from_velocity(self.curve.evaluate(s, 1))

    @cached_property
    def _node_frame(self):
        return self.frame_from_velocity(self.curve.derivative(1) if self.curve.closed
                                        else self.curve.tangent)

    @property
    def n1(self):
        return self._node_frame[1]

    @property
    def n2(self):
        return self._node_frame[2]

    def normal(self, n1, n2, theta):
        """``cos(theta) n1 + sin(theta) n2`` broadcasting over ``theta``."""
        c = np.cos(theta)[..., None]
        s = np.sin(theta)[..., None]
        return c * n1 + s * n2


def _icosahedron():
    phi = 0.5 * (1 + np.sqrt(5.0))
    v = []
    for a in (-1.0, 1.0):
        for b in (-phi, phi):
            v += [(0.0, a, b), (a, b, 0.0), (b, 0.0, a)]
    v = np.asarray(v)
    return v / np.linalg.norm(v, axis=1, keepdims=True)


_CANDIDATES = np.vstack([np.eye(3)[[2, 0, 1]], _icosahedron()])


def _tangent_samples(curve):
    if not curve.closed:
        return curve.tangent
    m = max(4 * curve.n, 256)
    d1 = curve.refined(m).derivative(1)
    return d1 / np.linalg.norm(d1, axis=1, keepdims=True)


def _clearance(N, taus):
    N = N / np.linalg.norm(N)
    c = np.max(np.abs(taus @ N))
    return float(np.sqrt(max(0.0, 2.0 - 2.0 * c)))


def adapted_frame(curve, reference_direction=None, min_clearance=1e-3) -> TubeChart:
    """Build the adapted frame.

    The clearance of ``N`` is its distance to the set ``{tau, -tau}``.  Without
    an explicit ``reference_direction`` the coordinate axes and the twelve
    icosahedron vertices are scored, and the best is polished by a local
    Nelder-Mead search over spherical angles.
    """
    taus = _tangent_samples(curve)
    if reference_direction is not None:
        N = np.asarray(reference_direction, dtype=float)
        best = _clearance(N, taus)
        if best < min_clearance:
            raise FrameError(f"reference direction has clearance {best:.3g}", best)
        return TubeChart(curve, N, best)

    scores = np.array([_clearance(c, taus) for c in _CANDIDATES])
    i = int(np.argmax(scores))
    N, best = _CANDIDATES[i], scores[i]
    if best < np.sqrt(2.0) - 1e-12:
        def loss(a):
            v = np.array([np.sin(a[0]) * np.cos(a[1]), np.sin(a[0]) * np.sin(a[1]), np.cos(a[0])])
            return np.max(np.abs(taus @ v))

        a0 = np.array([np.arccos(np.clip(N[2], -1, 1)), np.arctan2(N[1], N[0])])
        res = optimize.minimize(loss, a0, method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 2000})
        v = np.array([np.sin(res.x[0]) * np.cos(res.x[1]),
                      np.sin(res.x[0]) * np.sin(res.x[1]), np.cos(res.x[0])])
        c = _clearance(v, taus)
        if c > best:
            N, best = v, c
    if best < min_clearance:
        raise FrameError(f"no admissible reference direction; best clearance {best:.3g}", best)
    return TubeChart(curve, N, best)


def _check_radius(chart, r):
    rstar = chart.curve.embeddedness_radius
    if np.any(np.asarray(r) >= rstar):
        warnings.warn(f"tube radius {np.max(r):.3g} reaches the embeddedness radius {rstar:.3g}; "
                      "coordinates may overlap", TubeWarning, stacklevel=3)


def tube_point(chart: TubeChart, s, r, theta) -> np.ndarray:
    """``gamma(s) + r (cos(theta) n1(s) + sin(theta) n2(s))``."""
    s, r, theta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (s, r, theta)))
    if np.any(r < 0):
        raise GeometryError("tube radius must be nonnegative")
    _check_radius(chart, r)
    _, n1, n2 = chart.frame(s)
    return chart.curve.evaluate(s) + r[..., None] * chart.normal(n1, n2, theta)


def area_element(chart: TubeChart, s, r, theta):
    """Area density ``r (1 - r <H, nu>)`` of the tube surface (unit-speed parametrization)."""
    s, r, theta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (s, r, theta)))
    curve = chart.curve
    d1, d2 = curve.evaluate(s, 1), curve.evaluate(s, 2)
    H = _curvature_from_derivatives(d1, d2)
    _, n1, n2 = chart.frame_from_velocity(d1)
    nu = chart.normal(n1, n2, theta)
    val = r * (1.0 - r * np.einsum("...i,...i->...", H, nu))
    bad = (r > 0) & (val <= 0)
    if np.any(bad):
        j = np.argwhere(bad)[0]
        raise GeometryError(f"nonpositive area element at s={s[tuple(j)]:.6g}, "
                            f"theta={theta[tuple(j)]:.6g}")
    return val[()] if val.ndim == 0 else val


def _embeddedness_radius(curve, polish=True) -> float:
    """See :func:`embeddedness_radius`; ``polish=False`` is a cheaper grid-only estimate."""
    if not curve.closed:
        return np.inf
    n = curve.n
    L = curve.length
    if polish:
        m = min(max(2 * n, 256), 2048)
        fine = curve.refined(m)
        d1, d2 = curve.evaluate(fine.params, 1), curve.evaluate(fine.params, 2)
        sigma = curve._arclength_map(fine.params)
    else:
        m, fine = n, curve
        sp = curve.speed
        sigma = np.concatenate([[0.0], np.cumsum(0.5 * (sp[1:] + sp[:-1]))]) * curve.spacing
    H = curve.curvature if not polish else _curvature_from_derivatives(d1, d2)
    kmax = float(np.max(np.linalg.norm(H, axis=1)))
    r_curv = np.inf if kmax == 0 else 1.0 / kmax
    gap = np.abs(sigma[:, None] - sigma[None])
    gap = np.minimum(gap, L - gap)
    far = gap >= min(np.pi * r_curv, 0.5 * L) * (1 - 1e-9)
    p = fine.nodes - fine.nodes.mean(axis=0)
    sq = np.einsum("ij,ij->i", p, p)
    D = np.sqrt(np.maximum(sq[:, None] + sq[None] - 2 * p @ p.T, 0.0))
    np.fill_diagonal(D, np.inf)
    if D.min() <= 1e-12 * L:
        raise EmbeddednessError("curve samples coincide; the curve self-intersects")
    if not far.any():
        return r_curv
    Df = np.where(far, D, np.inf)
    i, j = np.unravel_index(np.argmin(Df), D.shape)
    best = Df[i, j]
    if not polish:
        return float(min(r_curv, 0.5 * best))
    # polish the closest well-separated pair without leaving the separated set
    def f(x):
        d = curve.evaluate(x[0]) - curve.evaluate(x[1])
        return float(d @ d)

    res = optimize.minimize(f, [fine.params[i], fine.params[j]], method="Nelder-Mead",
                            options={"xatol": 1e-12, "fatol": 1e-16})
    a, b = curve._arclength_map(np.mod(res.x, L))
    sep = min(abs(a - b), L - abs(a - b))
    if sep >= min(np.pi * r_curv, 0.5 * L) * (1 - 1e-9):
        best = min(best, np.sqrt(res.fun))
    rstar = min(r_curv, 0.5 * best)
    if rstar <= 0:
        raise EmbeddednessError("embeddedness radius is not positive")
    return float(rstar)


def embeddedness_radius(curve) -> float:
    """Certified lower bound on the tube radius with injective coordinates.

    ``min(1 / max|H|, D / 2)`` where ``D`` is the smallest distance between
    points whose arclength separation is at least ``pi / max|H|``.  Any pair
    of points closer along the curve is kept apart by the curvature bound.
    """
    return curve.embeddedness_radius


def closest_point_projection(chart: TubeChart, x, tol=1e-14):
    """Cylindrical coordinates ``(s, r, theta)`` of a point inside the tube."""
    curve = chart.curve
    x = np.asarray(x, dtype=float)
    m = max(8 * curve.n, 512)
    fine = curve.refined(m)
    d2 = np.sum((fine.nodes - x) ** 2, axis=1)
    k = int(np.argmin(d2))
    L = curve.length
    s = fine.params[k]
    for _ in range(60):
        g, d1, dd = curve.evaluate(s), curve.evaluate(s, 1), curve.evaluate(s, 2)
        diff = x - g
        fp = -diff @ d1
        fpp = d1 @ d1 - diff @ dd
        if fpp <= 0:
            fpp = d1 @ d1
        step = fp / fpp
        s -= step
        if abs(step) < tol * L:
            break
    s = float(np.mod(s, L))
    if s >= L:
        s = 0.0
    g = curve.evaluate(s)
    r = float(np.linalg.norm(x - g))
    if r <= 1e-14 * L:
        theta = 0.0
        r = 0.0
    else:
        _, n1, n2 = chart.frame(s)
        nu = (x - g) / r
        theta = float(np.mod(np.arctan2(nu @ n2, nu @ n1), 2 * np.pi))
    if r >= curve.embeddedness_radius:
        raise TubeError(f"point at distance {r:.6g} is outside the tube of radius "
                        f"{curve.embeddedness_radius:.6g}", (s, r, theta))
    return s, r, theta


def load_curve(path) -> ClosedCurve:
    """Read ``{"nodes": [[x, y, z], ...], "closed": true}``."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise GeometryError(f"cannot read curve file {path}: {exc}") from exc
    if not isinstance(doc, dict) or "nodes" not in doc:
        raise GeometryError(f"curve file {path} has no 'nodes' list")
    if doc.get("closed", True) is not True:
        raise GeometryError("only closed curves are supported")
    try:
        nodes = np.asarray(doc["nodes"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise GeometryError(f"curve file {path}: nodes are not numeric") from exc
    return ClosedCurve(nodes)


def save_curve(curve, path):
    doc = {"nodes": [[float(f"{v:.17g}") for v in p] for p in curve.nodes], "closed": True}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")
