"""Line integrals evaluated on a whole tube surface ``dist(x, gamma) = r`` at once.

Every grid point ``psi(s_j, theta_l)`` has its nearest curve point at ``s_j``
and sits at the same distance ``r``.  One graded panel pattern in the offset
``s - s_j`` therefore serves all of them, and the curve values at the shifted
parameters come from a single FFT per offset.
"""
from __future__ import annotations

import numpy as np

from .geometry import (TubeChart, _curvature_from_derivatives, fourier_shift)
from .quadrature import QuadratureSpec, graded_offsets
from .strain import FOUR_PI, _jacobian_apply

_CHUNK = 2_000_000


class TubeSurface:
    """Tensor grid on the tube of radius ``radius`` with surface weights.

    Attributes
    ----------
    s, theta : ndarray
        Grid parameters, shapes ``(Ns,)`` and ``(Nt,)``.
    points, normals : ndarray
        Shape ``(Ns, Nt, 3)``.
    jac : ndarray
        Area density ``r (1 - r <H, nu>)``, shape ``(Ns, Nt)``.
    weights : ndarray
        Surface quadrature weights ``|gamma'| jac ds dtheta``.
    """

    def __init__(self, chart: TubeChart, radius: float, quad: QuadratureSpec | None = None):
        quad = quad or QuadratureSpec()
        curve = chart.curve
        if not curve.closed:
            raise TypeError("tube surfaces need a closed curve")
        ns = quad.n_s or curve.n
        if ns != curve.n:
            curve = curve.refined(ns)
            chart = TubeChart(curve, chart.reference_direction, chart.clearance)
        self.chart, self.curve, self.quad = chart, curve, quad
        self.radius = r = float(radius)
        if r <= 0:
            raise ValueError("tube radius must be positive")
        nt = quad.n_theta
        self.s = curve.params
        self.theta = 2 * np.pi * np.arange(nt) / nt
        d1, d2 = curve.derivative(1), curve.derivative(2)
        self.speed = np.linalg.norm(d1, axis=1)
        self.tau, n1, n2 = chart.frame_from_velocity(d1)
        self.curvature = _curvature_from_derivatives(d1, d2)
        self.normals = chart.normal(n1[:, None], n2[:, None], self.theta[None, :])
        self.points = curve.nodes[:, None, :] + r * self.normals
        self.jac = r * (1.0 - r * np.einsum("ni,nti->nt", self.curvature, self.normals))
        if np.any(self.jac <= 0):
            raise ValueError(f"tube radius {r} exceeds the local curvature radius")
        self.ds = curve.length / curve.n
        self.dtheta = 2 * np.pi / nt
        self.weights = self.speed[:, None] * self.jac * (self.ds * self.dtheta)

        vmax = float(np.max(self.speed))
        coarse = quad.panel_length or min(curve.length / 16, curve.embeddedness_radius)
        self.offsets, self.offset_weights = graded_offsets(
            r / vmax, curve.length, coarse / vmax, quad.order, quad.innermost)

    @property
    def area(self) -> float:
        return float(self.weights.sum())

    def _shift(self, values, deriv=0):
        return fourier_shift(values, self.offsets, self.curve.length, deriv)

    def _theta_blocks(self):
        m, ns = len(self.offsets), self.curve.n
        step = max(1, _CHUNK // (m * ns * 3))
        for start in range(0, len(self.theta), step):
            yield slice(start, min(start + step, len(self.theta)))

    def line_integrals(self, *, strain=True, normal_strain=False, potential=False, phi=None):
        """Curve integrals at every grid point.

        Returns a dict with some of

        ``strain``         ``Shat``, shape ``(Ns, Nt, 3)``
        ``normal_strain``  ``<Shat, nu>`` via the triple product ``<k, gamma' x nu>``
        ``potential``      ``A = (1/4pi) int gamma' / |x - y|``
        ``w``, ``grad_w``  the variation potential and its gradient, if ``phi`` is given
        """
        w = self.offset_weights
        Y = self.curve.shifted(self.offsets, 0)
        DY = self.curve.shifted(self.offsets, 1)
        C = None
        if phi is not None:
            phi = np.asarray(phi, dtype=float)
            if phi.shape[0] != self.curve.n:
                raise ValueError("variation must be sampled on the surface grid")
            C = np.cross(DY, self._shift(phi))
        ns, nt = self.points.shape[:2]
        out = {}
        if strain:
            out["strain"] = np.empty((ns, nt, 3))
        if normal_strain:
            out["normal_strain"] = np.empty((ns, nt))
        if potential:
            out["potential"] = np.empty((ns, nt, 3))
        if C is not None:
            out["w"] = np.empty((ns, nt))
            out["grad_w"] = np.empty((ns, nt, 3))
        for blk in self._theta_blocks():
            X = self.points[:, blk]                        # (ns, b, 3)
            Z = X[None] - Y[:, :, None]                    # (m, ns, b, 3)
            r2 = np.einsum("mnbi,mnbi->mnb", Z, Z)
            inv = 1.0 / np.sqrt(r2)
            K = Z * (-(inv ** 3) / FOUR_PI)[..., None]
            if strain:
                out["strain"][:, blk] = np.einsum("m,mnbi->nbi", w, np.cross(K, DY[:, :, None]))
            if normal_strain:
                tn = np.cross(DY[:, :, None], self.normals[None, :, blk])
                out["normal_strain"][:, blk] = np.einsum("m,mnbi,mnbi->nb", w, K, tn)
            if potential:
                out["potential"][:, blk] = np.einsum("m,mnb,mni->nbi", w, inv, DY) / FOUR_PI
            if C is not None:
                Cb = np.broadcast_to(C[:, :, None], Z.shape)
                out["w"][:, blk] = np.einsum("m,mnbi,mnbi->nb", w, K, Cb)
                out["grad_w"][:, blk] = np.einsum("m,mnbi->nbi", w, _jacobian_apply(Z, Cb))
        return out

    def node_integrals(self, g, kernel="k"):
        """``int g(x) K(x - gamma(s_j)) dA_x`` for every node ``s_j``.

        ``kernel="k"`` uses the Newton kernel, ``kernel="dk_nu"`` uses
        ``Dk(x - y) nu_x``.  ``g`` is sampled on the grid, shape ``(Ns, Nt)``,
        and is interpolated spectrally along ``s``.
        """
        g = np.asarray(g, dtype=float)
        r = self.radius
        Y = self.curve.shifted(self.offsets, 0)
        DY = self.curve.shifted(self.offsets, 1)
        DDY = self.curve.shifted(self.offsets, 2)
        _, n1, n2 = self.chart.frame_from_velocity(DY)
        H = _curvature_from_derivatives(DY, DDY)
        sp = np.linalg.norm(DY, axis=-1)
        G = self._shift(g)                                  # (m, ns, nt)
        target = self.curve.nodes
        out = np.zeros((self.curve.n, 3))
        wm = self.offset_weights[:, None, None] * self.dtheta
        for blk in self._theta_blocks():
            th = self.theta[blk]
            nu = (np.cos(th)[None, None, :, None] * n1[:, :, None]
                  + np.sin(th)[None, None, :, None] * n2[:, :, None])   # (m, ns, b, 3)
            X = Y[:, :, None] + r * nu
            Z = X - target[None, :, None]
            jac = r * (1.0 - r * np.einsum("mni,mnbi->mnb", H, nu)) * sp[:, :, None]
            dens = G[:, :, blk] * jac * wm
            if kernel == "k":
                r2 = np.einsum("mnbi,mnbi->mnb", Z, Z)
                vals = Z * (-(r2 ** -1.5) / FOUR_PI)[..., None]
            elif kernel == "dk_nu":
                vals = _jacobian_apply(Z, nu)
            else:
                raise ValueError(f"unknown kernel {kernel!r}")
            out += np.einsum("mnb,mnbi->ni", dens, vals)
        return out
