"""Curve evolution: curve shortening, the L2 and H1 force flows, and a mobility law."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Callable

import numpy as np

from .energy import effective_energy
from .force import pk_force
from .geometry import ClosedCurve, resample_arclength, _embeddedness_radius, GeometryError
from .periodic import cyclic_tridiagonal_apply, cyclic_tridiagonal_solve
from .quadrature import QuadratureSpec

LAWS = ("csf", "l2_pk", "h1_pk", "mobility_pk", "h1_csf")
LAW_ALIASES = {"l2": "l2_pk", "h1": "h1_pk", "mobility": "mobility_pk"}


class FlowAbort(RuntimeError):
    """Step size underflow; carries the last accepted state."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class StepRejected(RuntimeError):
    """The trial step would leave the embedded regime."""


def cos2_blend(z):
    """``cos^2(pi z / 2)``: one at zero, zero at plus and minus one."""
    return np.cos(0.5 * np.pi * np.asarray(z, dtype=float)) ** 2


@dataclass(frozen=True)
class MobilityLaw:
    """Blend of edge glide along ``b^tau`` and slip along preferred directions.

    ``m = beta(z) <b^tau, f> b^tau + (1 - beta(z)) sum_i |a_i|^p a_i s_i / sum_j |a_j|^p``
    with ``z = <tau, b/|b|>`` and ``a_i = <f, s_i>``.
    """

    slip_directions: np.ndarray
    p: float = 16.0
    blend: Callable = cos2_blend

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.slip_directions, dtype=float))
        if s.shape[1] != 3 or len(s) == 0:
            raise ValueError("slip directions must be a nonempty list of 3-vectors")
        if np.any(np.abs(np.linalg.norm(s, axis=1) - 1) > 1e-12):
            raise ValueError("slip directions must be unit vectors")
        if self.p < 2:
            raise ValueError("exponent p must be at least 2")
        ends = [float(self.blend(v)) for v in (0.0, 1.0, -1.0)]
        if abs(ends[0] - 1) > 1e-12 or abs(ends[1]) > 1e-12 or abs(ends[2]) > 1e-12:
            raise ValueError(f"blend must satisfy beta(0)=1, beta(+-1)=0; got {ends}")
        object.__setattr__(self, "slip_directions", s)

    def __call__(self, tau, b, f):
        tau = np.atleast_2d(np.asarray(tau, dtype=float))
        f = np.atleast_2d(np.asarray(f, dtype=float))
        b = np.asarray(b, dtype=float)
        bn = b / np.linalg.norm(b)
        z = np.clip(tau @ bn, -1.0, 1.0)
        beta = np.asarray(self.blend(z), dtype=float)
        bt = bn[None, :] - z[:, None] * tau
        nbt = np.linalg.norm(bt, axis=1)
        edge = np.zeros_like(f)
        ok = nbt > 1e-12
        bt[ok] /= nbt[ok, None]
        edge[ok] = np.einsum("ni,ni->n", bt[ok], f[ok])[:, None] * bt[ok]
        a = f @ self.slip_directions.T                      # (n, k)
        amax = np.max(np.abs(a), axis=1, keepdims=True)
        slip = np.zeros_like(f)
        nz = amax[:, 0] > 0
        w = (np.abs(a[nz]) / amax[nz]) ** self.p
        slip[nz] = ((w * a[nz]) @ self.slip_directions) / w.sum(axis=1, keepdims=True)
        return beta[:, None] * edge + (1 - beta)[:, None] * slip


@dataclass
class FlowConfig:
    law: str = "csf"
    eps: float = 1e-3
    delta: float = 1e-2
    dt: float = 1e-3
    t_end: float = 0.1
    redistribution: bool = False
    mobility: MobilityLaw | None = None
    burgers: tuple = (0.0, 0.0, 1.0)
    integrator: str = "rk4"
    record_every: int = 1
    track_energy: bool = False
    quad: QuadratureSpec | None = None

    def __post_init__(self):
        self.law = LAW_ALIASES.get(self.law, self.law)
        if self.law not in LAWS:
            raise ValueError(f"unknown law {self.law!r}; choose from {LAWS}")
        if self.law.startswith("h1") and not self.delta > 0:
            raise ValueError("h1 laws need delta > 0")
        if not self.dt > 0 or not self.t_end >= 0 or not self.eps > 0:
            raise ValueError("dt and eps must be positive and t_end nonnegative")
        if self.integrator not in ("euler", "rk4"):
            raise ValueError("integrator must be 'euler' or 'rk4'")
        if self.law == "mobility_pk" and self.mobility is None:
            raise ValueError("mobility_pk needs a MobilityLaw")
        self.burgers = tuple(float(v) for v in self.burgers)

    def echo(self) -> dict:
        d = asdict(self)
        d["mobility"] = None if self.mobility is None else {
            "slip_directions": self.mobility.slip_directions.tolist(), "p": self.mobility.p}
        d["quad"] = None if self.quad is None else asdict(self.quad)
        return d


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    config: dict | None = None

    def append(self, t, curve):
        if self.times and t <= self.times[-1]:
            raise ValueError("snapshot times must increase")
        self.times.append(float(t))
        self.snapshots.append(curve)

    @property
    def final(self) -> ClosedCurve:
        return self.snapshots[-1]


def _laplacian_bands(curve):
    """Tridiagonal coefficients of the chord-length Laplacian (cyclic)."""
    p = curve.nodes
    h = np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)     # h[i] = |p[i+1] - p[i]|
    hm = np.roll(h, 1)                                           # |p[i] - p[i-1]|
    scale = 2.0 / (h + hm)
    upper = scale / h
    lower = scale / hm
    return lower, upper


def _resolvent_bands(curve, delta):
    lower, upper = _laplacian_bands(curve)
    return -delta * lower, 1.0 + delta * (lower + upper), -delta * upper


def curve_laplacian_solve(curve, f, delta) -> np.ndarray:
    """Solve ``(1 - delta Delta) v = f`` on the closed curve, componentwise.

    ``Delta`` is the second difference in chord length, so the matrix is a
    strictly diagonally dominant M-matrix and ``max|v| <= max|f|`` holds for
    every component.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    return cyclic_tridiagonal_solve(*_resolvent_bands(curve, delta), f)


def apply_resolvent_operator(curve, v, delta) -> np.ndarray:
    """``(1 - delta Delta) v`` with the same discretization, for residual checks."""
    return cyclic_tridiagonal_apply(*_resolvent_bands(curve, delta), v)


def _pk(curve, config):
    return pk_force(curve, np.asarray(config.burgers), config.eps, quad=config.quad).nodes


def velocity(curve, config: FlowConfig, force_fn=None) -> np.ndarray:
    """Velocity of every node under the configured law.

    ``force_fn(curve, config)`` replaces the built-in force evaluation.
    """
    b = np.asarray(config.burgers)
    law = config.law
    if law in ("csf", "h1_csf"):
        v = float(b @ b) / (4 * np.pi) * curve.curvature
        return curve_laplacian_solve(curve, v, config.delta) if law == "h1_csf" else v
    if config.eps >= curve.embeddedness_radius:
        raise StepRejected("eps is not below the embeddedness radius")
    F = (force_fn or _pk)(curve, config)
    if law == "l2_pk":
        return F
    if law == "h1_pk":
        return curve_laplacian_solve(curve, F, config.delta)
    if config.delta > 0:
        F = curve_laplacian_solve(curve, F, config.delta)
    return config.mobility(curve.tangent, b, F)


def _stage(curve, k, a):
    return ClosedCurve(curve.nodes + a * k)


def _advance(curve, config, dt, force_fn):
    vel = lambda c: velocity(c, config, force_fn)
    try:
        k1 = vel(curve)
        if config.integrator == "euler":
            new = _stage(curve, k1, dt)
        else:
            k2 = vel(_stage(curve, k1, 0.5 * dt))
            k3 = vel(_stage(curve, k2, 0.5 * dt))
            k4 = vel(_stage(curve, k3, dt))
            new = _stage(curve, k1 + 2 * k2 + 2 * k3 + k4, dt / 6)
        if config.redistribution:
            new = resample_arclength(new, curve.n)
        reach = _embeddedness_radius(new, polish=False)
    except (GeometryError, StepRejected, ValueError) as exc:
        raise StepRejected(str(exc)) from exc
    if reach < 2 * config.eps:
        raise StepRejected(f"embeddedness radius {reach:.3g} below 2 eps")
    return new, k1, reach


def _try_step(curve, config, dt, force_fn):
    last = None
    for _ in range(21):
        try:
            new, k1, reach = _advance(curve, config, dt, force_fn)
            return new, k1, reach, dt
        except StepRejected as exc:
            last = exc
            dt *= 0.5
    raise FlowAbort(f"step size underflow after 20 halvings: {last}")


def step(curve, config: FlowConfig, force_fn=None, dt=None):
    """One accepted step; halves ``dt`` on rejection, at most 20 times.

    Returns the new curve and the step size actually used.
    """
    new, _, _, dt = _try_step(curve, config, config.dt if dt is None else dt, force_fn)
    return new, dt


def _dissipation(curve, v, delta):
    """``|v|^2 + delta |v'|^2`` summed with the cell weights of the discrete Laplacian.

    With these weights it equals ``sum w <(1 - delta Delta) v, v>`` exactly.
    """
    dv = np.roll(v, -1, axis=0) - v
    h = np.linalg.norm(np.roll(curve.nodes, -1, axis=0) - curve.nodes, axis=1)
    w = 0.5 * (h + np.roll(h, 1))
    return float(np.sum(np.einsum("ni,ni->n", v, v) * w)
                 + delta * np.sum(np.einsum("ni,ni->n", dv, dv) / h))


def run_flow(initial: ClosedCurve, config: FlowConfig, force_fn=None) -> Trajectory:
    """Integrate from ``0`` to ``t_end`` and record snapshots and diagnostics."""
    reach0 = initial.embeddedness_radius
    if reach0 <= 2 * config.eps:
        raise ValueError(f"initial embeddedness radius {reach0:.3g} must exceed 2 eps")
    traj = Trajectory(config=config.echo())
    curve, t = initial, 0.0
    traj.append(t, curve)
    nsteps = 0
    tol = 1e-12 * max(1.0, config.t_end)
    while t < config.t_end - tol:
        dt = min(config.dt, config.t_end - t)
        try:
            new, k1, reach, dt = _try_step(curve, config, dt, force_fn)
        except FlowAbort as exc:
            raise FlowAbort(f"{exc} (t={t:.6g})", traj) from exc
        diag = {"t": t + dt, "dt": dt, "length": new.length,
                "max_speed": float(np.max(np.linalg.norm(k1, axis=1))), "min_reach": reach}
        if config.law.startswith("h1"):
            diag["dissipation"] = _dissipation(curve, k1, config.delta)
        if config.track_energy:
            diag["energy"] = effective_energy(new, np.asarray(config.burgers), config.eps,
                                              quad=config.quad, method="surface")
        traj.diagnostics.append(diag)
        curve, t = new, t + dt
        nsteps += 1
        if nsteps % config.record_every == 0 or t >= config.t_end - tol:
            traj.append(t, curve)
    return traj


def write_trajectory(path, traj: Trajectory):
    doc = {"config": traj.config,
           "snapshots": [{"t": float(f"{t:.17g}"),
                          "nodes": [[float(f"{v:.17g}") for v in p] for p in c.nodes]}
                         for t, c in zip(traj.times, traj.snapshots)]}
    Path(path).write_text(json.dumps(doc) + "\n")


def write_diagnostics(path, traj: Trajectory):
    keys = ["t", "dt", "length", "max_speed", "min_reach", "dissipation", "energy"]
    keys = [k for k in keys if traj.diagnostics and k in traj.diagnostics[0]]
    with open(Path(path), "w", newline="") as fh:
        fh.write(f"# config: {json.dumps(traj.config, sort_keys=True)}\n")
        wr = csv.writer(fh)
        wr.writerow(keys)
        for d in traj.diagnostics:
            wr.writerow([f"{d[k]:.17g}" for k in keys])
