"""Simulated cascade three-level atomic probe.

An atom crossing the cavity for a time ``tau`` exits with population
inversion ``W(tau) = sum_n P_n cos((2n + 3) lam tau)`` (two-photon resonance,
no Stark shift, ``sqrt((n+1)(n+2)) ~ n + 3/2``). Sampling ``W`` on
``[0, pi/lam]`` and projecting onto the odd cosines recovers ``P_m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import simpson

from .exceptions import SamplingError
from .fockspace import NEGATIVE_CLAMP, PhotonDistribution

MODELS = ("simplified", "exact")


@dataclass(frozen=True)
class ProbeConfig:
    """Atomic probe settings.

    Attributes:
        lam: atom-field coupling (1/time).
        delta: two-photon detuning (1/time).
        stark: Stark-shift coefficient (1/time).
        tau_samples: number of interaction times on the uniform grid ``[0, pi/lam]``.
        noise_sigma: standard deviation of additive Gaussian noise on each inversion sample.
        seed: base seed; point ``i`` draws from the stream ``(seed, i)``.
        model: ``"simplified"`` (odd-cosine series) or ``"exact"`` (full two-photon formula)
            for generating traces.
    """

    lam: float = 100.0
    delta: float = 0.0
    stark: float = 0.0
    tau_samples: int = 256
    noise_sigma: float = 0.0
    seed: int = 0
    model: str = "simplified"

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError(f"lam must be positive, got {self.lam}")
        if int(self.tau_samples) != self.tau_samples or self.tau_samples < 2:
            raise ValueError("tau_samples must be an integer >= 2")
        if not self.noise_sigma >= 0:
            raise ValueError("noise_sigma must be >= 0")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")

    @property
    def tau_max(self) -> float:
        return math.pi / self.lam

    @property
    def taus(self) -> np.ndarray:
        return np.linspace(0.0, self.tau_max, int(self.tau_samples))


@dataclass(frozen=True)
class InversionTrace:
    taus: np.ndarray
    values: np.ndarray
    noise_sigma: float = 0.0

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if taus.shape != values.shape or taus.ndim != 1:
            raise ValueError("taus and values must be 1-d arrays of equal length")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "values", values)


def inversion_exact(p: PhotonDistribution, cfg: ProbeConfig, tau):
    """Two-photon cascade inversion with detuning and Stark shift.

    Uses ``Gamma_n = (delta + stark (n+1)) / 2`` and
    ``delta_n = sqrt(Gamma_n^2 + lam^2 (n+1)(n+2))`` in frequency units, so
    ``W = sum P_n [Gamma_n^2 + lam^2 (n+1)(n+2) cos(2 delta_n tau)] / delta_n^2``.
    """
    n = np.arange(p.dim, dtype=float)
    big_gamma = 0.5 * (cfg.delta + cfg.stark * (n + 1))
    omega2 = cfg.lam**2 * (n + 1) * (n + 2)
    delta2 = big_gamma**2 + omega2
    if np.any(delta2 <= 0):
        raise ValueError("degenerate Rabi frequency")
    delta_n = np.sqrt(delta2)
    tau = np.asarray(tau, dtype=float)
    phase = 2.0 * np.multiply.outer(tau, delta_n)
    terms = (big_gamma**2 + omega2 * np.cos(phase)) / delta2
    return terms @ p.probs


def _odd_cosines(taus: np.ndarray, lam: float, size: int) -> np.ndarray:
    return np.cos(np.multiply.outer(lam * taus, 2.0 * np.arange(size) + 3.0))


@lru_cache(maxsize=64)
def _grid_cosines(n: int, lam: float, size: int) -> np.ndarray:
    # cos((2m+3) lam tau_i) on the standard grid tau_i = i pi / (lam (n-1))
    c = _odd_cosines(np.linspace(0.0, math.pi / lam, n), lam, size)
    c.setflags(write=False)
    return c


def inversion_simplified(p: PhotonDistribution, lam: float, tau):
    """Inversion ``sum_n P_n cos((2n+3) lam tau)``; ``tau`` may be an array."""
    tau = np.asarray(tau, dtype=float)
    return _odd_cosines(tau, lam, p.dim) @ p.probs


def sample_trace(p: PhotonDistribution, cfg: ProbeConfig, index: int = 0) -> InversionTrace:
    """Inversion measured on the configured tau grid, with seeded Gaussian noise."""
    taus = cfg.taus
    if cfg.model == "simplified":
        values = _grid_cosines(taus.size, cfg.lam, p.dim) @ p.probs
    else:
        values = inversion_exact(p, cfg, taus)
    if cfg.noise_sigma > 0:
        rng = np.random.default_rng([int(cfg.seed), int(index)])
        values = values + rng.normal(0.0, cfg.noise_sigma, size=taus.size)
    return InversionTrace(taus, values, cfg.noise_sigma)


RULES = ("trapezoid", "simpson")


@lru_cache(maxsize=32)
def _quadrature_weights(n: int, rule: str) -> np.ndarray:
    """Weights of a quadrature rule on a unit-spaced grid of ``n`` points."""
    if rule == "trapezoid":
        w = np.ones(n)
        w[[0, -1]] = 0.5
    elif rule == "simpson":
        w = simpson(np.eye(n), dx=1.0, axis=1)
    else:
        raise ValueError(f"rule must be one of {RULES}")
    w.setflags(write=False)
    return w


def max_photon_cutoff(tau_samples: int) -> int:
    """Largest ``m_max`` whose odd cosines stay alias-free on ``tau_samples`` points.

    Products of frequencies ``2m+3`` and ``2n+3`` alias once ``m + n + 3``
    reaches ``tau_samples - 1``.
    """
    return max(0, (int(tau_samples) - 5) // 2)


def invert_trace(trace: InversionTrace, lam: float, m_max: int, rule: str = "trapezoid") -> PhotonDistribution:
    """Recover ``P_0..P_m_max`` by quadrature of the odd-cosine projection.

    ``P_m = (2 lam / pi) int_0^{pi/lam} W(tau) cos((2m+3) lam tau) dtau``.
    The products of odd cosines are even harmonics of ``2 lam tau``, for which
    the trapezoid rule on the full window is exact below the sampling limit;
    ``rule="simpson"`` uses scipy's composite Simpson weights instead.

    The result is an estimate: ``stderr`` follows from the trace noise level
    and the quadrature weights, and only round-off negatives (above
    ``-1e-12``) are clamped.
    """
    taus = trace.taus
    n = taus.size
    if m_max < 0 or m_max > max_photon_cutoff(n):
        raise SamplingError(f"m_max={m_max} needs at least {2 * m_max + 2} tau samples, have {n}")
    h = np.diff(taus)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0) or not np.isclose(taus[-1], math.pi / lam, rtol=1e-12):
        raise SamplingError("trace must be sampled uniformly on [0, pi/lam]")
    weights = _quadrature_weights(n, rule) * h[0] * (2.0 * lam / math.pi)
    if taus[0] == 0.0 and taus[-1] == math.pi / lam:
        cosines = _grid_cosines(n, lam, m_max + 1)
    else:
        cosines = _odd_cosines(taus, lam, m_max + 1)
    basis = cosines * weights[:, None]
    probs = trace.values @ basis
    probs = np.where((probs < 0) & (probs >= -NEGATIVE_CLAMP), 0.0, probs)
    stderr = trace.noise_sigma * np.sqrt(np.sum(basis**2, axis=0))
    return PhotonDistribution(probs, stderr=stderr)


def default_cutoff(dim: int, tau_samples: int) -> int:
    """Photon cutoff for inversion: the upstream dimension plus 8, capped by the sampling limit."""
    return min(int(dim) + 8, max_photon_cutoff(tau_samples))
