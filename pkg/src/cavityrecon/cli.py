"""Command-line front end: ``cavityrecon {reconstruct,snapshot,validate}``.

Configs are YAML documents. Times are given in units of ``1/gamma`` and the
probe coupling ``lam`` in units of ``gamma``; the physical plan is derived
from them, so results do not depend on the value of ``gamma`` itself.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import shutil
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .channel import (
    DecayParams,
    DriveParams,
    damp,
    damp_diagonal,
    drive_and_decay,
    effective_drive_amplitude,
    integrate_master,
)
from .exceptions import ConfigError, GridError, ReconError
from .fockspace import PhotonDistribution, displacement_margin, pad, support_size
from .probe import ProbeConfig
from .quasiprob import NOISE_TOL, SMOOTHING, QuasiprobGrid, series_weight, wigner_direct
from .recon import ReconPlan, StateSpec, axis, initial_state, reconstruct_grid, reconstruct_point, snapshot_series

FORMATS = ("csv", "json")
EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2
VALIDATE_MAX_DIM = 32


@dataclass(frozen=True)
class AxisSpec:
    start: float = -3.5
    stop: float = 3.5
    step: float = 0.25

    def values(self) -> tuple:
        return axis(self.start, self.stop, self.step)


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs, in the dimensionless units of the config file."""

    state: StateSpec = field(default_factory=StateSpec)
    dim: int = 64
    gamma: float = 1.0
    t_d: float = 0.01
    t_meas: float = 0.1
    x: AxisSpec = field(default_factory=AxisSpec)
    y: AxisSpec = field(default_factory=AxisSpec)
    s: float = 0.0
    path: str = "analytic"
    lam: float = 100.0
    delta: float = 0.0
    stark: float = 0.0
    tau_samples: int = 256
    noise_sigma: float = 0.0
    model: str = "simplified"
    noise_tol: float = NOISE_TOL
    smoothing: int = SMOOTHING
    delays: tuple = ()
    seed: int = 0
    format: str = "csv"
    traces: bool = False
    out: str = "out"

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got {self.format!r}")
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if int(self.seed) != self.seed or self.seed < 0 or self.seed >= 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        object.__setattr__(self, "delays", tuple(float(d) for d in self.delays))

    def plan(self) -> ReconPlan:
        g = self.gamma
        try:
            probe = ProbeConfig(
                lam=self.lam * g, delta=self.delta * g, stark=self.stark * g,
                tau_samples=self.tau_samples, noise_sigma=self.noise_sigma,
                seed=int(self.seed), model=self.model,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return ReconPlan(
            state=self.state, dim=self.dim, gamma=g, t_d=self.t_d / g, t_meas=self.t_meas / g,
            x_axis=self.x.values(), y_axis=self.y.values(), s=self.s, path=self.path,
            probe=probe, noise_tol=self.noise_tol, smoothing=self.smoothing,
        )

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        a = complex(self.state.alpha)
        d["state"]["alpha"] = a.real if a.imag == 0 else [a.real, a.imag]
        d["delays"] = list(self.delays)
        return d

    @classmethod
    def from_dict(cls, raw) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(raw)
        try:
            if "state" in kw:
                st = dict(kw["state"])
                if isinstance(st.get("alpha"), (list, tuple)):
                    re_, im_ = st["alpha"]
                    st["alpha"] = complex(re_, im_)
                kw["state"] = StateSpec(**st)
            for name in ("x", "y"):
                if name in kw:
                    kw[name] = AxisSpec(**{k: float(v) for k, v in kw[name].items()})
            return cls(**kw)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed config: {exc}") from None

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    @classmethod
    def load(cls, text: str) -> "RunConfig":
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from None
        return cls.from_dict(raw or {})


# Wigner function of cat(2, 0) at t = 0. The y axis steps by pi/16 so the
# central fringe minimum at y = pi/8 lies on the grid.
_FRINGE_AXIS = AxisSpec(-9 * math.pi / 8, 9 * math.pi / 8, math.pi / 16)
PRESETS = {
    "cat-wigner": RunConfig(t_d=0.01, t_meas=0.0, y=_FRINGE_AXIS),
    # Same field read out through the noisy probe after gamma*t_meas = 0.1.
    # The tighter noise budget keeps the worst of ~1000 points within 0.05.
    "cat-probe": RunConfig(t_d=0.01, t_meas=0.1, y=_FRINGE_AXIS, path="probe",
                      noise_sigma=0.01, tau_samples=1024, noise_tol=0.01),
}


# ---------------------------------------------------------------- output files

def _fmt(v: float) -> str:
    return "%.17g" % v


def grid_header(grid: QuasiprobGrid) -> str:
    m = grid.meta
    return (f"# s={_fmt(grid.s)} gamma={_fmt(m['gamma'])} t_d={_fmt(m['t_d'])} "
            f"t_meas={_fmt(m['t_meas'])} dim={m['dim']} seed={m['seed']}")


def grid_to_csv(grid: QuasiprobGrid) -> str:
    lines = [grid_header(grid), "x,y,value"]
    for iy, y in enumerate(grid.y_axis):
        for ix, x in enumerate(grid.x_axis):
            lines.append(f"{_fmt(x)},{_fmt(y)},{_fmt(grid.values[iy, ix])}")
    return "\n".join(lines) + "\n"


def grid_to_json(grid: QuasiprobGrid) -> str:
    meta = {k: v for k, v in grid.meta.items() if k != "traces"}
    doc = {"s": grid.s, "meta": meta, "x": grid.x_axis.tolist(), "y": grid.y_axis.tolist(),
           "values": grid.values.tolist()}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def read_grid(path) -> QuasiprobGrid:
    """Parse a grid written by this tool (either format)."""
    text = Path(path).read_text()
    if text.startswith("{"):
        doc = json.loads(text)
        return QuasiprobGrid(doc["x"], doc["y"], doc["values"], doc["s"], doc["meta"])
    header, _, *rows = text.splitlines()
    meta = dict(kv.split("=", 1) for kv in header[1:].split())
    data = np.array([[float(v) for v in r.split(",")] for r in rows])
    xs = list(dict.fromkeys(data[:, 0]))
    ys = list(dict.fromkeys(data[:, 1]))
    s = float(meta.pop("s"))
    return QuasiprobGrid(xs, ys, data[:, 2].reshape(len(ys), len(xs)), s, meta)


def _traces_csv(grid: QuasiprobGrid) -> str:
    lines = ["index,x,y,tau,inversion"]
    for i, (beta, tr) in enumerate(zip(grid.points(), grid.meta["traces"])):
        for tau, w in zip(tr.taus, tr.values):
            lines.append(f"{i},{_fmt(beta.real)},{_fmt(beta.imag)},{_fmt(tau)},{_fmt(w)}")
    return "\n".join(lines) + "\n"


def _metadata(cfg: RunConfig, command: str, extra=None) -> str:
    # the output location is left out so identical runs give identical files
    config = {k: v for k, v in cfg.to_dict().items() if k != "out"}
    doc = {"command": command, "version": __version__, "config": config}
    doc.update(extra or {})
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _write_atomically(out: Path, files: dict) -> list:
    """Write ``{name: text}`` into ``out`` via a sibling temp dir; nothing lands on failure."""
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".partial-", dir=out.parent))
    try:
        for name, text in files.items():
            (tmp / name).write_text(text)
        out.mkdir(exist_ok=True)
        for name in files:
            os.replace(tmp / name, out / name)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    return [str(out / n) for n in files]


def _grid_file(grid: QuasiprobGrid, cfg: RunConfig) -> tuple:
    if cfg.format == "csv":
        return "csv", grid_to_csv(grid)
    return "json", grid_to_json(grid)


# ---------------------------------------------------------------- commands

def cmd_reconstruct(cfg: RunConfig, threads: int = 1) -> list:
    plan = cfg.plan()
    keep = cfg.traces and plan.path == "probe"
    grid = reconstruct_grid(plan, threads, keep_traces=keep)
    ext, text = _grid_file(grid, cfg)
    files = {f"grid.{ext}": text, "metadata.json": _metadata(cfg, "reconstruct")}
    if keep:
        files["traces.csv"] = _traces_csv(grid)
    return _write_atomically(Path(cfg.out), files)


def cmd_snapshot(cfg: RunConfig, threads: int = 1) -> list:
    if not cfg.delays:
        raise ConfigError("snapshot needs a non-empty 'delays' list")
    plan = cfg.plan()
    snaps = snapshot_series(plan, [d / cfg.gamma for d in cfg.delays], threads)
    files, entries = {}, []
    for i, (d, snap) in enumerate(zip(cfg.delays, snaps)):
        ext, text = _grid_file(snap.grid, cfg)
        name = f"grid_{i:03d}.{ext}"
        files[name] = text
        entries.append({"delay": d, "file": name})
    files["manifest.json"] = json.dumps({"delays_unit": "1/gamma", "snapshots": entries},
                                        indent=1, sort_keys=True) + "\n"
    files["metadata.json"] = _metadata(cfg, "snapshot")
    return _write_atomically(Path(cfg.out), files)


def _check(name, measured, tol):
    return {"check": name, "measured": float(measured), "tolerance": tol, "passed": bool(measured <= tol)}


def validation_report(cfg: RunConfig, threads: int = 1) -> list:
    """Run the invariant suites on a reduced copy of the configured plan.

    Returns one record per check. A plan that cannot be evaluated safely
    yields a single failed ``truncation`` record carrying the error code.
    """
    dim = min(cfg.dim, VALIDATE_MAX_DIM)
    plan = dataclasses.replace(cfg.plan(), dim=dim, path="analytic")
    try:
        rho0 = initial_state(plan)
    except ReconError as exc:
        return [{"check": "truncation", "passed": False, "error": exc.code, "message": str(exc)}]
    rng = np.random.default_rng(int(cfg.seed))
    out = []

    # eigenvalue-level positivity, done once here rather than on every step
    evals = np.linalg.eigvalsh(rho0.elements)
    out.append(_check("positivity", max(0.0, -float(evals.min())), 1e-12))

    # The identity is exact, but the alternating series amplifies rounding in
    # P(t) by kappa = sum_n P_n (1 + 2q)^n, so the tolerance scales with it.
    worst = 0.0
    eps = np.finfo(float).eps
    for _ in range(200):
        n = int(rng.integers(1, dim + 1))
        p0 = rng.dirichlet(np.ones(n))
        gt = float(rng.uniform(0, 0.5))
        pt = damp_diagonal(PhotonDistribution(p0), DecayParams(1.0, gt)).probs
        k = np.arange(n)
        lhs = math.fsum(series_weight(0.0, gt) ** k * pt)
        rhs = math.fsum(p0 * (-1.0) ** k)
        kappa = float(np.sum(p0 * (1.0 - 2.0 * math.expm1(-gt)) ** k))
        worst = max(worst, abs(lhs - rhs) / max(1e-10, 8 * eps * kappa))
    out.append(_check("telescoping identity (error / max(1e-10, 8 eps kappa))", worst, 1.0))

    betas = [0j, 0.5 + 0.5j, 2j, -1.0 + 0.25j]
    spread = 0.0
    for beta in betas:
        vals = [reconstruct_point(dataclasses.replace(plan, t_meas=tm / cfg.gamma), beta, rho0=rho0)
                for tm in (0.05, 0.1, 0.2)]
        spread = max(spread, max(vals) - min(vals))
    out.append(_check("time invariance", spread, 1e-9))

    direct = max(abs(reconstruct_point(plan, b, rho0=rho0) - wigner_direct(rho0, b)) for b in betas)
    out.append(_check("reconstruction vs direct parity", direct, 1e-9))

    n_tau = 1024
    taus = np.linspace(0.0, math.pi, n_tau)
    m = np.arange(33)
    w = np.full(n_tau, taus[1] * 2 / math.pi)
    w[[0, -1]] *= 0.5
    c = np.cos(np.outer(taus, 2 * m + 3))
    ortho = np.max(np.abs((c * w[:, None]).T @ c - np.eye(m.size)))
    out.append(_check("cosine orthogonality", ortho, 1e-8))

    gamma = 1.0
    decay = DecayParams(gamma, 0.1)
    out.append(_check("damping vs master equation",
                      np.linalg.norm(damp(rho0, decay).elements
                                     - integrate_master(rho0, 0.0, gamma, 0.1, 200).elements), 1e-6))
    drive = DriveParams(2.0, 0.05)
    s = support_size(rho0)
    big = pad(rho0, s + displacement_margin(effective_drive_amplitude(drive, gamma), s))
    out.append(_check("drive+decay vs master equation",
                      np.linalg.norm(drive_and_decay(big, drive, gamma).elements
                                     - integrate_master(big, drive.alpha, gamma, drive.t_d, 500).elements),
                      1e-6))
    return out


def cmd_validate(cfg: RunConfig, threads: int = 1, stream=None) -> bool:
    stream = stream or sys.stdout
    report = validation_report(cfg, threads)
    for rec in report:
        status = "PASS" if rec["passed"] else "FAIL"
        if "measured" in rec:
            print(f"{status} {rec['check']}: {rec['measured']:.3g} (tol {rec['tolerance']:g})", file=stream)
        else:
            print(f"{status} {rec['check']}: {rec['error']}: {rec['message']}", file=stream)
    return all(r["passed"] for r in report)


# ---------------------------------------------------------------- entry point

def _error_record(exc: Exception) -> str:
    rec = {"error": getattr(exc, "code", type(exc).__name__), "message": str(exc)}
    if isinstance(exc, GridError):
        rec["failures"] = [{"index": i, "x": b.real, "y": b.imag, "message": m} for i, b, m in exc.failures]
    return json.dumps(rec, sort_keys=True)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cavityrecon", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (("reconstruct", "reconstruct one grid"),
                           ("snapshot", "reconstruct after each configured delay"),
                           ("validate", "run the invariant suites")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--preset", choices=sorted(PRESETS), help="start from a built-in config")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, help="noise seed (overrides the config)")
        p.add_argument("--threads", type=int, default=1)
        if name == "snapshot":
            p.add_argument("--delays", type=float, nargs="+", help="delays in units of 1/gamma")
    return ap


def load_config(args) -> RunConfig:
    base = PRESETS[args.preset] if args.preset else RunConfig()
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        merged = base.to_dict()
        try:
            overrides = yaml.safe_load(text) if text.strip() else {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from None
        if not isinstance(overrides, dict):
            raise ConfigError("config must be a mapping")
        unknown = set(overrides) - set(merged)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key, val in overrides.items():
            if isinstance(merged[key], dict) and isinstance(val, dict):
                merged[key] = {**merged[key], **val}
            else:
                merged[key] = val
        base = RunConfig.from_dict(merged)
    changes = {}
    if args.out is not None:
        changes["out"] = args.out
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "delays", None):
        changes["delays"] = tuple(args.delays)
    return dataclasses.replace(base, **changes) if changes else base


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        cfg.plan()
        if args.command == "reconstruct":
            for f in cmd_reconstruct(cfg, args.threads):
                print(f)
        elif args.command == "snapshot":
            for f in cmd_snapshot(cfg, args.threads):
                print(f)
        else:
            return EXIT_OK if cmd_validate(cfg, args.threads) else EXIT_FAILED
    except ConfigError as exc:
        print(_error_record(exc), file=sys.stderr)
        return EXIT_CONFIG
    except (ReconError, ValueError) as exc:
        print(_error_record(exc), file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
