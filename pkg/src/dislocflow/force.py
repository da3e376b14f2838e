"""Renormalized Peach-Koehler force on the loop.

The negative first variation of the energy splits into three surface
integrals over the core tube.  Dividing by ``|log eps|`` gives a force that
tends to ``|b|^2 H / (4 pi)`` as the core shrinks.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .energy import ZeroCorrection, _chart
from .geometry import TubeChart, adapted_frame
from .holder import holder_seminorm
from .quadrature import QuadratureSpec
from .strain import _burgers
from .tube import TubeSurface


@dataclass
class ForceField:
    """Force samples at the curve nodes, with each term kept separately."""

    s: np.ndarray
    nodes: np.ndarray
    term1: np.ndarray
    term2: np.ndarray
    term3: np.ndarray
    leading: np.ndarray
    remainder: np.ndarray
    eps: float
    sup_remainder: float
    holder_remainder: float
    alpha: float

    @property
    def relative_remainder(self) -> float:
        return self.sup_remainder / float(np.max(np.linalg.norm(self.leading, axis=1)))


def _surface(chart, eps, quad):
    quad = quad or QuadratureSpec()
    n = chart.curve.n
    ns = quad.n_s or n
    if ns % n:
        raise ValueError(f"n_s={ns} must be a multiple of the node count {n}")
    if eps >= chart.curve.embeddedness_radius:
        raise ValueError(f"eps={eps} is not below the embeddedness radius "
                         f"{chart.curve.embeddedness_radius:.6g}")
    return TubeSurface(chart, eps, quad), ns // n


def _as_chart(curve_or_chart):
    if isinstance(curve_or_chart, TubeChart):
        return curve_or_chart
    return _chart(curve_or_chart)


def pk_term1(chart, b, eps, quad=None, *, surface=None, strain=None):
    """``-1/2 int |S|^2 r(1 - r<H,nu>) nu dtheta`` at every node."""
    b = _burgers(b)
    chart = _as_chart(chart)
    surf, stride = (surface, 1) if surface is not None else _surface(chart, eps, quad)
    if strain is None:
        strain = surf.line_integrals(strain=True)["strain"]
    dens = float(b @ b) * np.einsum("nti,nti->nt", strain, strain) * surf.jac
    out = -0.5 * np.einsum("nt,nti->ni", dens, surf.normals) * surf.dtheta
    return out[::stride]


def pk_term2(chart, b, eps, correction=None, quad=None, *, surface=None, normal_strain=None):
    """``[int <b, (S + grad u) nu> k(x - y) dA] x tau_y`` at every node."""
    b = _burgers(b)
    chart = _as_chart(chart)
    correction = correction or ZeroCorrection()
    surf, stride = (surface, 1) if surface is not None else _surface(chart, eps, quad)
    if normal_strain is None:
        normal_strain = surf.line_integrals(strain=False, normal_strain=True)["normal_strain"]
    g = float(b @ b) * normal_strain
    if not correction.is_zero:
        g = g + np.einsum("i,ntij,ntj->nt", b, correction.gradient(surf.points), surf.normals)
    out = np.cross(surf.node_integrals(g, "k"), surf.tau)
    return out[::stride]


def pk_term3(chart, b, eps, correction=None, quad=None, *, surface=None):
    """``-[int <u, b> Dk(x - y) nu dA] x tau_y``; exactly zero for the zero provider."""
    b = _burgers(b)
    chart = _as_chart(chart)
    correction = correction or ZeroCorrection()
    if correction.is_zero:
        return np.zeros((chart.curve.n, 3))
    surf, stride = (surface, 1) if surface is not None else _surface(chart, eps, quad)
    ub = correction.value(surf.points) @ b
    out = -np.cross(surf.node_integrals(ub, "dk_nu"), surf.tau)
    return out[::stride]


def pk_force(chart, b, eps, correction=None, quad=None, alpha=0.5) -> ForceField:
    """Assemble ``F = -(f1 + f2 + f3) / |log eps|`` and its split ``|b|^2 H / 4pi + R``."""
    b = _burgers(b)
    chart = _as_chart(chart)
    correction = correction or ZeroCorrection()
    surf, stride = _surface(chart, eps, quad)
    li = surf.line_integrals(strain=True, normal_strain=True)
    t1 = pk_term1(chart, b, eps, surface=surf, strain=li["strain"])[::stride]
    t2 = pk_term2(chart, b, eps, correction, surface=surf,
                  normal_strain=li["normal_strain"])[::stride]
    t3 = pk_term3(chart, b, eps, correction, surface=surf)
    t3 = t3[::stride] if not correction.is_zero else t3
    F = -(t1 + t2 + t3) / abs(np.log(eps))
    curve = chart.curve
    leading = float(b @ b) / (4 * np.pi) * curve.curvature
    rem = F - leading
    sig = curve.arclength_at(curve.params)
    return ForceField(
        s=curve.params, nodes=F, term1=t1, term2=t2, term3=t3, leading=leading,
        remainder=rem, eps=float(eps),
        sup_remainder=float(np.max(np.linalg.norm(rem, axis=1))),
        holder_remainder=holder_seminorm(rem, alpha, positions=sig, period=curve.length),
        alpha=alpha)


def l2_pairing(curve, f, phi) -> float:
    """``int <f, phi> dH^1`` by the trapezoid rule in the curve parameter."""
    return float(np.sum(np.einsum("ni,ni->n", f, phi) * curve.speed) * curve.spacing)


def write_force(path, ff: ForceField, config=None):
    """CSV with ``s``, then three columns each for F, the terms, leading and remainder."""
    groups = [("F", ff.nodes), ("term1", ff.term1), ("term2", ff.term2), ("term3", ff.term3),
              ("leading", ff.leading), ("remainder", ff.remainder)]
    header = ["s"] + [f"{g}_{c}" for g, _ in groups for c in "xyz"]
    with open(Path(path), "w", newline="") as fh:
        if config is not None:
            fh.write(f"# config: {config}\n")
        wr = csv.writer(fh)
        wr.writerow(header)
        for j, s in enumerate(ff.s):
            row = [s] + [v for _, arr in groups for v in arr[j]]
            wr.writerow([f"{v:.17g}" for v in row])
