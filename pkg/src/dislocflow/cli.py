"""Experiment runner: ``python -m dislocflow <command> [options]``.

Settings are resolved in three layers: built-in defaults, then an optional
``key = value`` config file (``--config``), then command-line flags.  Every
artifact embeds the resolved settings.  Nothing is written unless the whole
run succeeds.

Config keys: curve, burgers, eps, eps_list, delta, dt, t_end, law, alpha,
deltas, mode, order, n_theta, grid, seed, out, diagnostics.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field, asdict, fields
from pathlib import Path

import numpy as np

from . import curves as _curves
from .energy import core_energy
from .flow import FlowConfig, run_flow, LAWS, LAW_ALIASES
from .force import pk_force
from .geometry import GeometryError, load_curve
from .quadrature import QuadratureSpec
from .spectral import rate_fit, weierstrass
from .strain import SingularityError, strain_field

COMMANDS = ("field", "energy", "force", "flow", "converge", "spectral")
EXIT = {"ok": 0, "invalid-input": 2, "io-error": 3, "numerical-error": 4}


class RunError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _floats(text, n=None):
    if isinstance(text, (list, tuple)):
        vals = [float(v) for v in text]
    else:
        vals = [float(v) for v in str(text).replace(" ", "").split(",") if v]
    if n is not None and len(vals) != n:
        raise ValueError(f"expected {n} comma-separated numbers, got {text!r}")
    return vals


@dataclass
class RunConfig:
    command: str = "energy"
    curve: str = "circle"
    burgers: tuple = (0.0, 0.0, 1.0)
    eps: float = 1e-3
    eps_list: tuple = (1e-2, 1e-3, 1e-4)
    delta: float = 1e-2
    dt: float = 1e-3
    t_end: float = 0.1
    law: str = "csf"
    alpha: float = 0.5
    deltas: tuple = (1e-1, 1e-2, 1e-3, 1e-4)
    mode: str = "energy"
    order: int = 16
    n_theta: int = 32
    grid: str = "-1.5:1.5:7,-1.5:1.5:7,0.5:0.5:1"
    seed: int = 0
    out: str | None = None
    diagnostics: str | None = None

    def validate(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        self.burgers = tuple(_floats(self.burgers, 3))
        if not np.linalg.norm(self.burgers) > 0:
            raise ValueError("Burgers vector must be nonzero")
        self.eps_list = tuple(_floats(self.eps_list))
        self.deltas = tuple(_floats(self.deltas))
        for name in ("eps", "delta", "dt", "alpha"):
            setattr(self, name, float(getattr(self, name)))
        self.t_end = float(self.t_end)
        self.order, self.n_theta, self.seed = int(self.order), int(self.n_theta), int(self.seed)
        if not 0 < self.eps < 1 or any(not 0 < e < 1 for e in self.eps_list):
            raise ValueError("core radii must lie in (0, 1)")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.dt <= 0 or self.t_end < 0 or self.delta < 0:
            raise ValueError("dt must be positive, t_end and delta nonnegative")
        if any(d <= 0 for d in self.deltas):
            raise ValueError("deltas must be positive")
        law = LAW_ALIASES.get(self.law, self.law)
        if law not in LAWS:
            raise ValueError(f"unknown law {self.law!r}")
        self.law = law
        if self.mode not in ("energy", "force", "flow"):
            raise ValueError(f"unknown converge mode {self.mode!r}")
        if self.order < 2 or self.n_theta < 4:
            raise ValueError("order must be >= 2 and n_theta >= 4")
        return self

    def echo(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @property
    def quad(self) -> QuadratureSpec:
        return QuadratureSpec(order=self.order, n_theta=self.n_theta)


def read_config_file(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment; an optional ``[run]`` header."""
    text = Path(path).read_text()
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.read_string(text)
    known = {f.name for f in fields(RunConfig)}
    out = {}
    for key, val in cp["run"].items():
        key = key.replace("-", "_")
        if key not in known or key == "command":
            raise ValueError(f"unknown config key {key!r}")
        out[key] = val
    return out


def _load(cfg):
    if cfg.curve in _curves.BUNDLED:
        return _curves.bundled(cfg.curve)
    if not Path(cfg.curve).is_file():
        raise RunError("invalid-input", f"curve file {cfg.curve!r} not found")
    return load_curve(cfg.curve)


def _grid(text):
    axes = []
    for part in text.split(","):
        lo, hi, n = part.split(":")
        axes.append(np.linspace(float(lo), float(hi), int(n)))
    if len(axes) != 3:
        raise ValueError("grid needs three lo:hi:n ranges")
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)


def _fmt(v):
    return f"{v:.17g}"


def _csv(header, rows, cfg):
    buf = io.StringIO()
    buf.write(f"# config: {cfg.echo()}\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _slope(x, y):
    return float(np.polyfit(x, y, 1)[0])


def cmd_field(cfg):
    curve = _load(cfg)
    pts = _grid(cfg.grid)
    d = np.array([np.min(np.linalg.norm(curve.refined(max(8 * curve.n, 512)).nodes - p, axis=1))
                  for p in pts])
    keep = d > 1e-9
    S = strain_field(curve, np.asarray(cfg.burgers), pts[keep], cfg.quad)
    rows = [(*p, *s.ravel(), di) for p, s, di in zip(pts[keep], S, d[keep])]
    header = ["x", "y", "z"] + [f"S{i}{j}" for i in range(1, 4) for j in range(1, 4)] + ["dist"]
    return _csv(header, rows, cfg), f"field: {len(rows)} points, max|S| = {np.abs(S).max():.6g}"


def _energy_rows(cfg, curve):
    b = np.asarray(cfg.burgers)
    return [core_energy(curve, b, e, quad=cfg.quad) for e in cfg.eps_list]


def cmd_energy(cfg):
    curve = _load(cfg)
    rows = _energy_rows(cfg, curve)
    cols = ["eps", "total", "tube_part", "far_part", "asymptote", "renormalized"]
    body = _csv(cols, [[getattr(r, c) for c in cols] for r in rows], cfg)
    return body, f"energy: {len(rows)} radii, renormalized = {rows[-1].renormalized:.10g}"


def cmd_force(cfg):
    curve = _load(cfg)
    ff = pk_force(curve, np.asarray(cfg.burgers), cfg.eps, quad=cfg.quad, alpha=cfg.alpha)
    groups = [ff.nodes, ff.term1, ff.term2, ff.term3, ff.leading, ff.remainder]
    names = ["F", "term1", "term2", "term3", "leading", "remainder"]
    header = ["s"] + [f"{g}_{c}" for g in names for c in "xyz"]
    rows = [[ff.s[j]] + [v for arr in groups for v in arr[j]] for j in range(len(ff.s))]
    msg = (f"force: eps = {cfg.eps:g}, relative remainder = {ff.relative_remainder:.6g}, "
           f"holder seminorm = {ff.holder_remainder:.6g}")
    return _csv(header, rows, cfg), msg


def _flow_config(cfg, law=None, eps=None):
    return FlowConfig(law=law or cfg.law, eps=eps or cfg.eps, delta=cfg.delta, dt=cfg.dt,
                      t_end=cfg.t_end, burgers=cfg.burgers,
                      quad=QuadratureSpec(order=cfg.order, n_theta=cfg.n_theta))


def cmd_flow(cfg):
    curve = _load(cfg)
    if cfg.law == "mobility_pk":
        raise RunError("invalid-input", "mobility_pk needs slip directions; use the library API")
    traj = run_flow(curve, _flow_config(cfg))
    doc = {"config": json.loads(cfg.echo()), "flow": traj.config,
           "snapshots": [{"t": float(_fmt(t)), "nodes": [[float(_fmt(v)) for v in p]
                                                         for p in c.nodes]}
                         for t, c in zip(traj.times, traj.snapshots)]}
    extra = {}
    if cfg.diagnostics:
        keys = [k for k in ("t", "dt", "length", "max_speed", "min_reach", "dissipation")
                if traj.diagnostics and k in traj.diagnostics[0]]
        extra[cfg.diagnostics] = _csv(keys, [[d[k] for k in keys] for d in traj.diagnostics], cfg)
    rho = np.mean(np.linalg.norm(traj.final.nodes - traj.final.nodes.mean(axis=0), axis=1))
    msg = (f"flow: law = {cfg.law}, t = {traj.times[-1]:.6g}, length = {traj.final.length:.10g}, "
           f"mean radius = {rho:.10g}")
    return json.dumps(doc) + "\n", msg, extra


def cmd_converge(cfg):
    curve = _load(cfg)
    b = np.asarray(cfg.burgers)
    logs = [abs(np.log(e)) for e in cfg.eps_list]
    if cfg.mode == "energy":
        rows = _energy_rows(cfg, curve)
        slope = _slope(logs, [r.total for r in rows])
        target = float(b @ b) * curve.length / (4 * np.pi)
        body = _csv(["eps", "abs_log_eps", "total", "renormalized", "slope", "predicted_slope"],
                    [[r.eps, lg, r.total, r.renormalized, slope, target]
                     for r, lg in zip(rows, logs)], cfg)
        return body, f"converge energy: slope = {slope:.10g}, predicted = {target:.10g}"
    if cfg.mode == "force":
        rows = []
        for e in cfg.eps_list:
            ff = pk_force(curve, b, e, quad=cfg.quad, alpha=cfg.alpha)
            rows.append([e, ff.relative_remainder, ff.sup_remainder, ff.holder_remainder])
        body = _csv(["eps", "relative_remainder", "sup_remainder", "holder_remainder"], rows, cfg)
        return body, f"converge force: relative remainders {[f'{r[1]:.4g}' for r in rows]}"
    limit = {"l2_pk": "csf", "h1_pk": "h1_csf", "csf": "csf", "h1_csf": "h1_csf"}.get(cfg.law)
    if limit is None:
        raise RunError("invalid-input", f"no limit law for {cfg.law}")
    pk_law = {"csf": "l2_pk", "h1_csf": "h1_pk"}.get(cfg.law, cfg.law)
    ref = run_flow(curve, _flow_config(cfg, law=limit)).final
    rows = []
    for e in cfg.eps_list:
        fin = run_flow(curve, _flow_config(cfg, law=pk_law, eps=e)).final
        rows.append([e, float(np.max(np.linalg.norm(fin.nodes - ref.nodes, axis=1)))])
    body = _csv(["eps", "sup_distance"], rows, cfg)
    return body, f"converge flow: distances {[f'{r[1]:.4g}' for r in rows]}"


def cmd_spectral(cfg):
    rng = np.random.default_rng(cfg.seed)
    f = weierstrass(1024, cfg.alpha, rng=rng)
    errs, slope = rate_fit(f, cfg.deltas)
    body = _csv(["delta", "sup_error", "fitted_exponent"],
                [[d, e, slope] for d, e in zip(cfg.deltas, errs)], cfg)
    return body, f"spectral: fitted exponent = {slope:.6g} (alpha/2 = {cfg.alpha / 2:g})"


HANDLERS = {"field": cmd_field, "energy": cmd_energy, "force": cmd_force, "flow": cmd_flow,
            "converge": cmd_converge, "spectral": cmd_spectral}
DEFAULT_OUT = {"field": "field.csv", "energy": "energy.csv", "force": "force.csv",
               "flow": "trajectory.json", "converge": "converge.csv", "spectral": "rates.csv"}


def _write_all(artifacts):
    """Write each file via a temporary sibling and rename, after every artifact is ready."""
    staged = []
    try:
        for path, text in artifacts.items():
            path = Path(path)
            fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".",
                                       prefix=f".{path.name}.")
            with os.fdopen(fd, "w") as fh:
                fh.write(text)
            staged.append((tmp, path))
        for tmp, path in staged:
            os.replace(tmp, path)
    except OSError:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.remove(tmp)
        raise


def run(config: RunConfig):
    """Execute one command; returns ``(exit_status, summary_line)``."""
    try:
        config.validate()
        res = HANDLERS[config.command](config)
        body, msg = res[0], res[1]
        extra = res[2] if len(res) > 2 else {}
        out = config.out or DEFAULT_OUT[config.command]
        _write_all({out: body, **extra})
        return EXIT["ok"], msg
    except RunError as exc:
        return EXIT[exc.code], _error(exc.code, str(exc))
    except (GeometryError, KeyError, ValueError, TypeError) as exc:
        if isinstance(exc, SingularityError):
            return EXIT["numerical-error"], _error("numerical-error", str(exc))
        return EXIT["invalid-input"], _error("invalid-input", str(exc))
    except OSError as exc:
        return EXIT["io-error"], _error("io-error", str(exc))
    except (RuntimeError, ArithmeticError) as exc:
        return EXIT["numerical-error"], _error("numerical-error", str(exc))


def _error(code, message):
    return json.dumps({"error": code, "message": message})


def build_parser():
    p = argparse.ArgumentParser(prog="python -m dislocflow",
                                description="Dislocation loop energies, forces and flows.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key = value settings file")
        sp.add_argument("--curve", help="curve JSON file or bundled name "
                        f"({', '.join(sorted(_curves.BUNDLED))})")
        sp.add_argument("--b", dest="burgers", help="Burgers vector x,y,z")
        sp.add_argument("--order", type=int, help="Gauss-Legendre nodes per panel")
        sp.add_argument("--n-theta", dest="n_theta", type=int, help="angular nodes on the tube")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output file")

    sp = sub.add_parser("field", help="strain on a grid")
    common(sp)
    sp.add_argument("--grid", help="xlo:xhi:n,ylo:yhi:n,zlo:zhi:n")
    sp = sub.add_parser("energy", help="energy breakdown per core radius")
    common(sp)
    sp.add_argument("--eps-list", dest="eps_list")
    sp = sub.add_parser("force", help="force samples along the curve")
    common(sp)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--alpha", type=float, help="Hoelder exponent for the remainder")
    sp = sub.add_parser("flow", help="integrate a curve flow")
    common(sp)
    sp.add_argument("--law", choices=sorted(set(LAWS) | set(LAW_ALIASES)))
    sp.add_argument("--eps", type=float)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--t-end", dest="t_end", type=float)
    sp.add_argument("--diagnostics", help="per-step CSV")
    sp = sub.add_parser("converge", help="convergence tables over core radii")
    common(sp)
    sp.add_argument("--mode", choices=["energy", "force", "flow"])
    sp.add_argument("--eps-list", dest="eps_list")
    sp.add_argument("--law", choices=sorted(set(LAWS) | set(LAW_ALIASES)))
    sp.add_argument("--delta", type=float)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--t-end", dest="t_end", type=float)
    sp.add_argument("--alpha", type=float)
    sp = sub.add_parser("spectral", help="resolvent rate fit")
    common(sp)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--deltas")
    return p


def resolve(argv) -> RunConfig:
    args = vars(build_parser().parse_args(argv))
    settings = {}
    path = args.pop("config", None)
    if path:
        settings.update(read_config_file(path))
    settings.update({k: v for k, v in args.items() if v is not None})
    return RunConfig(**settings).validate()


def main(argv=None) -> int:
    try:
        cfg = resolve(argv)
    except (OSError, ValueError, configparser.Error) as exc:
        print(_error("invalid-input", str(exc)), file=sys.stderr)
        return EXIT["invalid-input"]
    status, msg = run(cfg)
    print(msg, file=sys.stdout if status == 0 else sys.stderr)
    return status
