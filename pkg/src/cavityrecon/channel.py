"""Zero-temperature cavity decay, driven decay, and a master-equation integrator.

The driven lossy cavity obeys

    d rho/dt = [a* a - a a^dag, rho] + gamma (a rho a^dag - {a^dag a, rho}/2)

with drive amplitude ``a`` (i.e. ``H_d = i hbar (alpha^* a - alpha a^dag)``).
Its propagator factorizes into a displacement by
``beta = 2 alpha (1 - exp(gamma t_d / 2)) / gamma`` followed by pure damping
over ``t_d``; :func:`integrate_master` integrates the equation directly and
serves as the oracle for that factorization.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import TruncationError
from .fockspace import (
    DensityMatrix,
    PhotonDistribution,
    displace,
    displacement_margin,
    support_size,
)


@dataclass(frozen=True)
class DecayParams:
    gamma: float
    t: float

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not (self.t >= 0 and math.isfinite(self.t)):
            raise ValueError(f"decay time must be >= 0, got {self.t}")

    @property
    def gamma_t(self) -> float:
        return self.gamma * self.t

    @property
    def eta(self) -> float:
        """Energy transmissivity ``exp(-gamma t)``."""
        return math.exp(-self.gamma_t)

    @property
    def q(self) -> float:
        return -math.expm1(-self.gamma_t)


@dataclass(frozen=True)
class DriveParams:
    alpha: complex
    t_d: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        if not (math.isfinite(self.alpha.real) and math.isfinite(self.alpha.imag)):
            raise ValueError("drive amplitude must be finite")
        if not (self.t_d >= 0 and math.isfinite(self.t_d)):
            raise ValueError(f"drive duration must be >= 0, got {self.t_d}")


def effective_drive_amplitude(drive: DriveParams, gamma: float) -> complex:
    """Displacement produced by driving with ``drive.alpha`` for ``drive.t_d`` while decaying.

    ``expm1`` keeps the small ``gamma * t_d`` limit ``-alpha t_d`` free of cancellation.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return -2.0 * drive.alpha * math.expm1(0.5 * gamma * drive.t_d) / gamma


def damp_diagonal(p0: PhotonDistribution, decay: DecayParams) -> PhotonDistribution:
    """Binomial redistribution of photon numbers under amplitude damping.

    ``P_m(t) = sum_{n>=m} C(n, m) eta^m q^(n-m) P_n(0)``. The weights are
    generated by a running recurrence in extended precision, because the
    downstream series multiplies them by powers larger than one.
    """
    p = np.asarray(p0.probs, dtype=np.longdouble)
    d = p.size
    if decay.t == 0 or d == 1:
        return p0 if decay.t == 0 else PhotonDistribution(p0.probs, p0.truncation_loss)
    gt = np.longdouble(decay.gamma) * np.longdouble(decay.t)
    eta = np.exp(-gt)
    q = -np.expm1(-gt)
    m = np.arange(d, dtype=np.longdouble)
    w = eta**m
    out = w * p
    for k in range(1, d):
        w = w[: d - k] * ((m[: d - k] + k) / k) * q
        out[: d - k] += w * p[k:]
    return PhotonDistribution(out.astype(float), p0.truncation_loss)


def damp(rho0: DensityMatrix, decay: DecayParams) -> DensityMatrix:
    """Amplitude-damping channel on the full density matrix.

    ``rho_mn(t) = eta^((m+n)/2) sum_k sqrt(C(m+k,k) C(n+k,k)) q^k rho_{m+k,n+k}(0)``.
    """
    if decay.t == 0:
        return rho0
    r = rho0.elements
    d = rho0.dim
    eta, q = decay.eta, decay.q
    m = np.arange(d, dtype=float)
    u = eta ** (0.5 * m)
    out = np.outer(u, u) * r
    for k in range(1, d):
        u = u[: d - k] * np.sqrt((m[: d - k] + k) / k * q)
        if not u.any():
            break
        out[: d - k, : d - k] += np.outer(u, u) * r[k:, k:]
    return DensityMatrix.from_matrix(out, rho0.truncation_loss)


def drive_and_decay(rho0: DensityMatrix, drive: DriveParams, gamma: float) -> DensityMatrix:
    """State after driving ``rho0`` for ``drive.t_d`` in the lossy cavity.

    The drive displaces the field to amplitude ``beta`` (same sign as
    :func:`effective_drive_amplitude`), i.e. ``D(beta) rho0 D(beta)^dag``,
    which is ``displace(rho0, -beta)`` in this package's convention.
    """
    beta = effective_drive_amplitude(drive, gamma)
    s = support_size(rho0)
    need = s + displacement_margin(beta, s)
    if need > rho0.dim:
        raise TruncationError(
            f"displacement by |beta|={abs(beta):.3g} needs dim >= {need}, state has {rho0.dim}"
        )
    return damp(displace(rho0, -beta), DecayParams(gamma, drive.t_d))


def _annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def integrate_master(rho0: DensityMatrix, alpha, gamma: float, t: float, steps: int = 1000) -> DensityMatrix:
    """Classical RK4 integration of the driven, damped master equation.

    Oracle only: the pipeline uses the closed-form channel maps.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if gamma < 0 or t < 0:
        raise ValueError("gamma and t must be non-negative")
    if gamma * t / steps > 0.05:
        warnings.warn(f"large step gamma*dt = {gamma * t / steps:.3g}; results may be inaccurate",
                      RuntimeWarning, stacklevel=2)
    alpha = complex(alpha)
    a = _annihilation(rho0.dim)
    ad = a.conj().T
    num = ad @ a
    gen = np.conj(alpha) * a - alpha * ad
    half_g = 0.5 * gamma

    def rhs(r):
        return gen @ r - r @ gen + gamma * (a @ r @ ad) - half_g * (num @ r + r @ num)

    dt = t / steps
    r = np.array(rho0.elements)
    for _ in range(steps):
        k1 = rhs(r)
        k2 = rhs(r + 0.5 * dt * k1)
        k3 = rhs(r + 0.5 * dt * k2)
        k4 = rhs(r + dt * k3)
        r = r + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return DensityMatrix.from_matrix(r, rho0.truncation_loss)
