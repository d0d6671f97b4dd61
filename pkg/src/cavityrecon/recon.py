"""End-to-end reconstruction of the initial field's quasiprobability.

Per phase point ``beta``: drive the freshly prepared field for ``t_d`` with
the amplitude that displaces it onto ``beta``, let it decay for ``t_meas``,
read its photon statistics (directly, or through a simulated atomic probe),
and apply the weighted series with the total elapsed decay
``gamma (t_d + t_meas)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._parallel import ordered_map
from .channel import DecayParams, DriveParams, damp, damp_diagonal, drive_and_decay, effective_drive_amplitude
from .exceptions import ConfigError, GridError, ReconError, TruncationError
from .fockspace import (
    DensityMatrix,
    PhotonDistribution,
    cat_density,
    coherent_density,
    fock_density,
    number_distribution,
    pad,
    displacement_margin,
    support_size,
)
from .probe import InversionTrace, ProbeConfig, default_cutoff, invert_trace, sample_trace
from .quasiprob import NOISE_TOL, PATHS, SMOOTHING, QuasiprobGrid, collect_grid, evaluate_series, grid_points

STATE_KINDS = ("cat", "coherent", "fock", "vacuum")
MIN_COUPLING_RATIO = 100.0


@dataclass(frozen=True)
class StateSpec:
    """Initial field: ``cat`` (alpha, phi), ``coherent`` (alpha), ``fock`` (n) or ``vacuum``."""

    kind: str = "cat"
    alpha: complex = 2.0
    phi: float = 0.0
    n: int = 0

    def __post_init__(self):
        if self.kind not in STATE_KINDS:
            raise ConfigError(f"state kind must be one of {STATE_KINDS}, got {self.kind!r}")
        object.__setattr__(self, "alpha", complex(self.alpha))

    def build(self, dim: int) -> DensityMatrix:
        if self.kind == "cat":
            return cat_density(self.alpha, self.phi, dim)
        if self.kind == "coherent":
            return coherent_density(self.alpha, dim)
        if self.kind == "fock":
            return fock_density(self.n, dim)
        return fock_density(0, dim)


def axis(start: float, stop: float, step: float) -> tuple:
    """Inclusive, evenly spaced axis without floating-point drift."""
    if step <= 0:
        raise ConfigError("axis step must be positive")
    count = int(round((stop - start) / step)) + 1
    if count < 1:
        raise ConfigError(f"empty axis {start}..{stop}")
    return tuple(float(v) for v in start + step * np.arange(count))


@dataclass(frozen=True)
class ReconPlan:
    """Full description of a reconstruction run.

    Times are absolute (``gamma`` sets the unit); ``t_d`` is the drive
    duration and ``t_meas`` the further decay before the photon statistics
    are read out.
    """

    state: StateSpec = field(default_factory=StateSpec)
    dim: int = 64
    gamma: float = 1.0
    t_d: float = 0.01
    t_meas: float = 0.1
    x_axis: tuple = axis(-3.5, 3.5, 0.25)
    y_axis: tuple = axis(-3.5, 3.5, 0.25)
    s: float = 0.0
    path: str = "analytic"
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    noise_tol: float = NOISE_TOL
    smoothing: int = SMOOTHING
    max_truncation_loss: float = 1e-6

    def __post_init__(self):
        if not (isinstance(self.dim, (int, np.integer)) and self.dim >= 1):
            raise ConfigError(f"dim must be a positive integer, got {self.dim!r}")
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if not (self.t_d >= 0 and self.t_meas >= 0):
            raise ConfigError("t_d and t_meas must be >= 0")
        if self.path not in PATHS:
            raise ConfigError(f"path must be one of {PATHS}, got {self.path!r}")
        if not self.s <= 0:
            raise ConfigError(f"s must be <= 0, got {self.s}")
        if len(self.x_axis) == 0 or len(self.y_axis) == 0:
            raise ConfigError("grid axes must be non-empty")
        object.__setattr__(self, "x_axis", tuple(float(v) for v in self.x_axis))
        object.__setattr__(self, "y_axis", tuple(float(v) for v in self.y_axis))
        if self.path == "probe" and self.probe.lam / self.gamma < MIN_COUPLING_RATIO:
            raise ConfigError(
                f"probe path needs strong coupling lam/gamma >= {MIN_COUPLING_RATIO:g}, "
                f"got {self.probe.lam / self.gamma:g}"
            )

    @property
    def gamma_t(self) -> float:
        """Decay elapsed between displacement and readout, in units of ``1/gamma``."""
        return self.gamma * (self.t_d + self.t_meas)

    def with_seed(self, seed: int) -> "ReconPlan":
        return replace(self, probe=replace(self.probe, seed=int(seed)))


@dataclass(frozen=True)
class Snapshot:
    delay: float
    grid: QuasiprobGrid


@dataclass(frozen=True)
class PointResult:
    value: float
    stderr: float = 0.0
    trace: InversionTrace | None = None


def initial_state(plan: ReconPlan) -> DensityMatrix:
    """Build the plan's initial state and refuse truncations that lose real probability."""
    rho = plan.state.build(plan.dim)
    if rho.truncation_loss > plan.max_truncation_loss:
        raise TruncationError(
            f"initial {plan.state.kind} state loses {rho.truncation_loss:.3g} probability "
            f"at dim={plan.dim} (limit {plan.max_truncation_loss:g})"
        )
    return rho


def drive_for_target(beta_target, gamma: float, t_d: float) -> complex:
    """Drive amplitude whose effective displacement over ``t_d`` equals ``beta_target``."""
    beta_target = complex(beta_target)
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if beta_target == 0:
        return 0j
    if not t_d > 0:
        raise ValueError("a zero-length drive cannot reach a nonzero displacement")
    return -gamma * beta_target / (2.0 * math.expm1(0.5 * gamma * t_d))


def measured_distribution(plan: ReconPlan, rho0: DensityMatrix, beta) -> PhotonDistribution:
    """Noiseless photon statistics ``P_m(beta; t_d + t_meas)`` of the driven, decayed field.

    The drive targets ``-beta`` because driving produces ``D(b) rho D(b)^dag``
    for effective amplitude ``b``; the parity of the result then samples the
    initial state at ``+beta``.
    """
    beta = complex(beta)
    if beta == 0:
        drive = DriveParams(0.0, plan.t_d)
    else:
        drive = DriveParams(drive_for_target(-beta, plan.gamma, plan.t_d), plan.t_d)
    b_eff = effective_drive_amplitude(drive, plan.gamma)
    s = support_size(rho0)
    rho = pad(rho0, max(rho0.dim, s + displacement_margin(b_eff, s)))
    p = number_distribution(drive_and_decay(rho, drive, plan.gamma))
    return damp_diagonal(p, DecayParams(plan.gamma, plan.t_meas))


def _readout(plan: ReconPlan, p: PhotonDistribution, index: int, keep_trace: bool) -> PointResult:
    trace = None
    if plan.path == "probe":
        trace = sample_trace(p, plan.probe, index)
        p = invert_trace(trace, plan.probe.lam, default_cutoff(p.dim, plan.probe.tau_samples))
    res = evaluate_series(p, plan.s, plan.gamma_t, noise_tol=plan.noise_tol, smoothing=plan.smoothing)
    return PointResult(res.value, res.stderr, trace if keep_trace else None)


def reconstruct_point_result(plan: ReconPlan, beta, index: int = 0, rho0: DensityMatrix | None = None,
                             keep_trace: bool = False) -> PointResult:
    if rho0 is None:
        rho0 = initial_state(plan)
    return _readout(plan, measured_distribution(plan, rho0, beta), index, keep_trace)


def reconstruct_point(plan: ReconPlan, beta, index: int = 0, rho0: DensityMatrix | None = None) -> float:
    """Reconstructed quasiprobability of the initial state at ``beta``.

    ``index`` selects the noise substream on the probe path.
    """
    return reconstruct_point_result(plan, beta, index, rho0).value


def _grid_meta(plan: ReconPlan) -> dict:
    return {
        "gamma": plan.gamma,
        "t_d": plan.t_d,
        "t_meas": plan.t_meas,
        "dim": plan.dim,
        "path": plan.path,
        "seed": plan.probe.seed,
        "noise_sigma": plan.probe.noise_sigma,
    }


def reconstruct_grid(plan: ReconPlan, threads: int = 1, rho0: DensityMatrix | None = None,
                     keep_traces: bool = False) -> QuasiprobGrid:
    """Reconstruct every grid point of ``plan``; raises :class:`GridError` listing failed points.

    With ``keep_traces`` on the probe path, ``grid.meta["traces"]`` holds the
    per-point inversion traces in flat point order.
    """
    if rho0 is None:
        rho0 = initial_state(plan)

    def point(index, beta):
        try:
            r = reconstruct_point_result(plan, beta, index, rho0, keep_traces)
            return (r.value, r.stderr, None), r.trace
        except ReconError as exc:
            return (math.nan, math.nan, f"{exc.code}: {exc}"), None

    out = ordered_map(point, grid_points(plan.x_axis, plan.y_axis), threads)
    grid = collect_grid(plan.x_axis, plan.y_axis, [o[0] for o in out], plan.s, _grid_meta(plan))
    if grid.errors:
        raise GridError(grid.errors)
    if keep_traces and plan.path == "probe":
        grid.meta["traces"] = [o[1] for o in out]
    return grid


def monte_carlo_grid(plan: ReconPlan, seeds, threads: int = 1) -> np.ndarray:
    """Probe-path grids for many noise seeds, shape ``(len(seeds), ny, nx)``.

    Equivalent to ``reconstruct_grid(plan.with_seed(seed))`` for each seed,
    but the seed-independent drive and decay are computed once per point.
    """
    seeds = [int(s) for s in seeds]
    rho0 = initial_state(plan)
    nx, ny = len(plan.x_axis), len(plan.y_axis)

    def point(index, beta):
        p = measured_distribution(plan, rho0, beta)
        return [_readout(plan.with_seed(seed), p, index, False).value for seed in seeds]

    values = np.asarray(ordered_map(point, grid_points(plan.x_axis, plan.y_axis), threads))
    return values.T.reshape(len(seeds), ny, nx)


def snapshot_series(plan: ReconPlan, delays, threads: int = 1) -> list[Snapshot]:
    """Reconstruct the field as it was after each delay of free decay.

    Driving at delay ``d`` instead of immediately after preparation yields the
    quasiprobability of the partially decayed state ``damp(rho0, d)``.
    """
    delays = [float(d) for d in delays]
    if not delays:
        raise ConfigError("at least one delay is required")
    if any(d < 0 for d in delays) or delays != sorted(delays):
        raise ConfigError("delays must be sorted and non-negative")
    rho0 = initial_state(plan)
    snaps = []
    for d in delays:
        rho_d = damp(rho0, DecayParams(plan.gamma, d))
        grid = reconstruct_grid(plan, threads, rho_d)
        grid.meta["delay"] = d
        snaps.append(Snapshot(d, grid))
    return snaps
