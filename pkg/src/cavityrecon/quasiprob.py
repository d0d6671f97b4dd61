"""Quasiprobabilities of the initial field from photon statistics of the displaced field.

For a field displaced to the phase point ``beta`` and then damped for ``gamma t``,

    F(beta; s) = -2 / (pi (s - 1)) * sum_m chi(s; t)^m P_m(beta; t),
    chi(s; t) = 1 + 2 exp(gamma t) / (s - 1),

is independent of ``t``: binomial thinning maps ``chi(s; t)`` back onto the
undamped ratio ``(s + 1) / (s - 1)``. ``s = 0`` gives the Wigner function
(``chi = 1 - 2 exp(gamma t)``), ``s = -1`` the Husimi Q function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import ordered_map
from .channel import DecayParams, damp_diagonal
from .exceptions import GridError, ReconError, TruncationError
from .fockspace import (
    DensityMatrix,
    PhotonDistribution,
    coherent_vector,
    displace,
    number_distribution,
    pad_for_displacement,
)
from .probe import ProbeConfig, default_cutoff, invert_trace, sample_trace

TAIL_TOL = 1e-6
NOISE_TOL = 0.02
SMOOTHING = 6
SIGNIFICANCE = 3.0
PATHS = ("analytic", "probe")


def series_weight(s: float, gamma_t: float) -> float:
    """Per-photon weight ``chi(s; t) = 1 + 2 exp(gamma t) / (s - 1)``."""
    if not s < 1:
        raise ValueError(f"order parameter s must be < 1, got {s}")
    if not gamma_t >= 0:
        raise ValueError(f"gamma*t must be >= 0, got {gamma_t}")
    return 1.0 + 2.0 * math.exp(gamma_t) / (s - 1.0)


def series_prefactor(s: float) -> float:
    return -2.0 / (math.pi * (s - 1.0))


def _check_order(s: float) -> None:
    if not s <= 0:
        raise ValueError(f"only s <= 0 is supported (weights diverge for s > 0), got {s}")


@dataclass(frozen=True)
class SeriesResult:
    """Outcome of the weighted photon-number series.

    ``tail_bound`` is ``max |chi|^m P_m`` over the last two retained terms
    (two, so that parity-sparse distributions cannot hide a heavy tail).
    ``stderr`` is the propagated noise of estimated inputs, zero otherwise.
    ``truncated`` flags a noise-limited cutoff at ``terms`` retained terms.
    """

    value: float
    tail_bound: float
    stderr: float = 0.0
    terms: int = 0
    truncated: bool = False


def _smoothed_cutoff_weights(size: int, cutoffs: np.ndarray, order: int) -> np.ndarray:
    """Per-term weights of binomially averaged partial sums (Euler smoothing).

    Row ``r`` averages ``S_{c-order} .. S_c`` for ``c = cutoffs[r]`` with
    weights ``C(order, j) / 2^order``.
    """
    m = np.arange(size)[None, :]
    w = np.zeros((len(cutoffs), size))
    for j in range(order + 1):
        last = np.asarray(cutoffs)[:, None] - order + j
        w += (m <= last) * (math.comb(order, j) / 2.0**order)
    return w


def evaluate_series(
    p: PhotonDistribution,
    s: float = 0.0,
    gamma_t: float = 0.0,
    *,
    noise_tol: float = NOISE_TOL,
    smoothing: int = SMOOTHING,
) -> SeriesResult:
    """Sum ``-2/(pi(s-1)) sum_m chi(s;t)^m P_m`` with convergence diagnostics.

    Exact distributions (no ``stderr``) are summed in full with exactly
    rounded accumulation, and a tail bound above ``1e-6`` raises
    :class:`TruncationError`.

    Estimated distributions carry noise that ``|chi|^m`` amplifies once
    ``gamma t > 0``. If the full sum's propagated standard error exceeds
    ``noise_tol``, the series is cut at the largest index whose error stays
    within ``noise_tol`` and the last ``smoothing + 1`` partial sums are
    averaged with binomial weights, which damps the truncation error of the
    sign-alternating terms. Terms past the last estimate that exceeds three
    standard errors (plus the smoothing window) are never included.
    """
    _check_order(s)
    chi = series_weight(s, gamma_t)
    pref = series_prefactor(s)
    probs = p.probs
    d = probs.size
    powers = np.power(chi, np.arange(d, dtype=float))
    terms = powers * probs
    se = p.stderr
    if se is None or not np.any(se > 0):
        tail = float(np.max(np.abs(terms[-2:])))
        if tail > TAIL_TOL:
            raise TruncationError(f"series tail |chi|^m P_m = {tail:.3g} exceeds {TAIL_TOL:g}")
        return SeriesResult(pref * math.fsum(terms), tail, 0.0, d, False)

    coeff = pref * powers
    var_terms = (coeff * se) ** 2
    full_std = math.sqrt(math.fsum(var_terms))
    if full_std <= noise_tol:
        tail = float(np.max(np.abs(terms[-2:])))
        return SeriesResult(pref * math.fsum(terms), tail, full_std, d, False)

    order = max(0, min(int(smoothing), d - 1))
    significant = np.nonzero(np.abs(probs) > SIGNIFICANCE * se)[0]
    last_useful = min(d - 1, (int(significant[-1]) if significant.size else 0) + order)
    cutoffs = np.arange(order, max(order, last_useful) + 1)
    weights = _smoothed_cutoff_weights(d, cutoffs, order)
    stds = np.sqrt(weights**2 @ var_terms)
    # weights grow with the cutoff, so the error is non-decreasing along cutoffs
    ok = np.nonzero(stds <= noise_tol)[0]
    pick = int(ok[-1]) if ok.size else 0
    cutoff, w, std = int(cutoffs[pick]), weights[pick], float(stds[pick])
    value = pref * math.fsum(terms * w)
    tail = float(abs(terms[cutoff] * w[cutoff]))
    return SeriesResult(value, tail, std, cutoff + 1, True)


def quasiprob_point(p: PhotonDistribution, s: float = 0.0, gamma_t: float = 0.0, **kwargs) -> float:
    """Quasiprobability of the initial state at the phase point ``p`` was prepared at."""
    return evaluate_series(p, s, gamma_t, **kwargs).value


def displaced_distribution(rho0: DensityMatrix, beta) -> PhotonDistribution:
    """Photon statistics of ``D(beta)^dag rho0 D(beta)``, padding the truncation as needed."""
    rho = pad_for_displacement(rho0, beta)
    return number_distribution(displace(rho, beta))


def wigner_direct(rho0: DensityMatrix, beta) -> float:
    """Wigner function as scaled parity of the displaced state, with no decay involved."""
    p = displaced_distribution(rho0, beta).probs
    signs = np.where(np.arange(p.size) % 2 == 0, 1.0, -1.0)
    return 2.0 / math.pi * math.fsum(signs * p)


def husimi_q(rho0: DensityMatrix, beta) -> float:
    """``<beta|rho0|beta> / pi`` from coherent-state amplitudes."""
    c = coherent_vector(beta, rho0.dim).amplitudes
    return float(np.real(np.vdot(c, rho0.elements @ c))) / math.pi


@dataclass
class QuasiprobGrid:
    """Quasiprobability values on a rectangular grid of phase points ``x + i y``.

    ``values[iy, ix]`` belongs to ``x_axis[ix] + 1j * y_axis[iy]``; the flat
    point index is ``iy * len(x_axis) + ix``. Failed points hold NaN and are
    listed in ``errors`` as ``(index, beta, message)``.
    """

    x_axis: np.ndarray
    y_axis: np.ndarray
    values: np.ndarray
    s: float = 0.0
    meta: dict = field(default_factory=dict)
    stderr: np.ndarray | None = None
    errors: list = field(default_factory=list)

    def __post_init__(self):
        self.x_axis = np.asarray(self.x_axis, dtype=float)
        self.y_axis = np.asarray(self.y_axis, dtype=float)
        self.values = np.asarray(self.values, dtype=float).reshape(self.y_axis.size, self.x_axis.size)

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def points(self) -> np.ndarray:
        """Flat complex phase points in row-major order."""
        xx, yy = np.meshgrid(self.x_axis, self.y_axis)
        return (xx + 1j * yy).ravel()

    def cell_area(self) -> float:
        dx = float(np.mean(np.diff(self.x_axis))) if self.x_axis.size > 1 else 1.0
        dy = float(np.mean(np.diff(self.y_axis))) if self.y_axis.size > 1 else 1.0
        return dx * dy

    def normalization(self) -> float:
        """Riemann-sum integral over the grid; close to 1 when the grid covers the state."""
        return float(np.nansum(self.values) * self.cell_area())


def grid_points(x_axis, y_axis) -> np.ndarray:
    xx, yy = np.meshgrid(np.asarray(x_axis, float), np.asarray(y_axis, float))
    return (xx + 1j * yy).ravel()


def collect_grid(x_axis, y_axis, results, s, meta) -> QuasiprobGrid:
    """Assemble ``(value, stderr, error)`` point results into a grid."""
    values = np.full(len(results), np.nan)
    stderr = np.zeros(len(results))
    errors = []
    pts = grid_points(x_axis, y_axis)
    for i, (value, se, err) in enumerate(results):
        if err is None:
            values[i], stderr[i] = value, se
        else:
            errors.append((i, complex(pts[i]), err))
    return QuasiprobGrid(x_axis, y_axis, values, s, dict(meta), stderr.reshape(len(y_axis), len(x_axis)), errors)


def grid_eval(
    rho0: DensityMatrix,
    x_axis,
    y_axis,
    s: float = 0.0,
    path: str = "analytic",
    gamma_t: float = 0.0,
    probe: ProbeConfig | None = None,
    threads: int = 1,
    strict: bool = False,
    max_truncation_loss: float = 1e-6,
    **series_kwargs,
) -> QuasiprobGrid:
    """Evaluate the quasiprobability of ``rho0`` on a grid of phase points.

    Each point is displaced, damped for ``gamma_t`` and, on the ``"probe"``
    path, measured through a simulated inversion trace before the weighted
    series is applied. Point failures are recorded in ``grid.errors`` (or
    raised together as :class:`GridError` when ``strict``). A ``rho0`` that
    already lost more than ``max_truncation_loss`` is refused outright.
    """
    if path not in PATHS:
        raise ValueError(f"path must be one of {PATHS}")
    _check_order(s)
    if rho0.truncation_loss > max_truncation_loss:
        raise TruncationError(
            f"input state lost {rho0.truncation_loss:.3g} probability to truncation "
            f"(limit {max_truncation_loss:g})"
        )
    if path == "probe" and probe is None:
        probe = ProbeConfig()
    decay = DecayParams(1.0, gamma_t)

    def point(index, beta):
        try:
            p = damp_diagonal(displaced_distribution(rho0, beta), decay)
            if path == "probe":
                trace = sample_trace(p, probe, index)
                p = invert_trace(trace, probe.lam, default_cutoff(p.dim, probe.tau_samples))
            res = evaluate_series(p, s, gamma_t, **series_kwargs)
            return res.value, res.stderr, None
        except ReconError as exc:
            return math.nan, math.nan, f"{exc.code}: {exc}"

    results = ordered_map(point, grid_points(x_axis, y_axis), threads)
    meta = {"gamma_t": gamma_t, "dim": rho0.dim, "path": path}
    grid = collect_grid(x_axis, y_axis, results, s, meta)
    if strict and grid.errors:
        raise GridError(grid.errors)
    return grid
