"""Truncated Fock-space states and displacement algebra.

All matrices are in the photon-number basis ``|0>, |1>, ..., |dim-1>``.
Displacement follows the convention ``displace(rho, beta) = D(beta)^dag rho D(beta)``,
so the vacuum displaced by ``beta`` becomes ``|-beta><-beta|`` and the parity of
``displace(rho, beta)`` is proportional to the Wigner function of ``rho`` at ``beta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .exceptions import (
    DegenerateStateError,
    DimensionError,
    UnphysicalStateError,
)

HERMITIAN_TOL = 1e-12
NEGATIVE_CLAMP = 1e-12
SUPPORT_TOL = 1e-15


def _check_dim(dim) -> int:
    if isinstance(dim, bool) or not isinstance(dim, (int, np.integer)) or dim < 1:
        raise DimensionError(f"dimension must be a positive integer, got {dim!r}")
    return int(dim)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FockVector:
    amplitudes: np.ndarray
    truncation_loss: float = 0.0

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.size == 0:
            raise DimensionError("amplitudes must be a non-empty 1-d array")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @property
    def dim(self) -> int:
        return self.amplitudes.size


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian matrix in a truncated Fock basis.

    ``truncation_loss`` is the probability mass known to lie above the
    truncation (``1 - trace`` for states built here).
    """

    elements: np.ndarray
    truncation_loss: float = 0.0

    def __post_init__(self):
        rho = np.asarray(self.elements, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] == 0:
            raise DimensionError(f"density matrix must be square, got shape {rho.shape}")
        if not np.all(np.isfinite(rho)):
            raise UnphysicalStateError("density matrix has non-finite entries")
        err = np.max(np.abs(rho - rho.conj().T))
        if err > HERMITIAN_TOL:
            raise UnphysicalStateError(f"density matrix not Hermitian (max deviation {err:.3g})")
        object.__setattr__(self, "elements", _frozen(rho))

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.elements).real)

    @classmethod
    def from_matrix(cls, rho, truncation_loss=None) -> "DensityMatrix":
        """Symmetrize ``rho`` and wrap it; loss defaults to ``1 - trace``."""
        rho = np.asarray(rho, dtype=complex)
        rho = 0.5 * (rho + rho.conj().T)
        if truncation_loss is None:
            truncation_loss = max(0.0, 1.0 - float(np.trace(rho).real))
        return cls(rho, float(truncation_loss))


@dataclass(frozen=True)
class PhotonDistribution:
    """Photon-number probabilities ``P_m``.

    ``stderr`` carries per-entry standard errors for estimated (noisy)
    distributions. Exact distributions leave it as ``None`` and must be
    non-negative; estimates may dip below zero within their noise.
    """

    probs: np.ndarray
    truncation_loss: float = 0.0
    stderr: np.ndarray | None = field(default=None)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise DimensionError("probs must be a non-empty 1-d array")
        if not np.all(np.isfinite(p)):
            raise UnphysicalStateError("photon distribution has non-finite entries")
        if self.stderr is None:
            if np.any(p < -NEGATIVE_CLAMP):
                raise UnphysicalStateError(f"negative probability {p.min():.3g}")
            if p.sum() > 1.0 + 1e-9:
                raise UnphysicalStateError(f"probabilities sum to {p.sum():.12g} > 1")
            p = np.where(p < 0.0, 0.0, p)
        else:
            se = np.asarray(self.stderr, dtype=float)
            if se.shape != p.shape or np.any(se < 0):
                raise ValueError("stderr must be non-negative and match probs")
            object.__setattr__(self, "stderr", _frozen(se))
        object.__setattr__(self, "probs", _frozen(p))

    @property
    def dim(self) -> int:
        return self.probs.size


def coherent_vector(alpha, dim) -> FockVector:
    """Fock amplitudes ``exp(-|a|^2/2) a^n / sqrt(n!)`` of the coherent state ``|alpha>``."""
    dim = _check_dim(dim)
    alpha = complex(alpha)
    c = np.empty(dim, dtype=complex)
    c[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for n in range(1, dim):
        c[n] = c[n - 1] * alpha / math.sqrt(n)
    loss = max(0.0, 1.0 - math.fsum(np.abs(c) ** 2))
    return FockVector(c, loss)


def cat_density(alpha, phi, dim) -> DensityMatrix:
    """Cat state ``N[|a><a| + |-a><-a| + e^{i phi}|a><-a| + e^{-i phi}|-a><a|]``."""
    dim = _check_dim(dim)
    alpha = complex(alpha)
    denom = 2.0 + 2.0 * math.exp(-2.0 * abs(alpha) ** 2) * math.cos(phi)
    if denom <= 1e-15:
        raise DegenerateStateError(f"cat normalization vanishes (alpha={alpha}, phi={phi})")
    plus = coherent_vector(alpha, dim).amplitudes
    minus = coherent_vector(-alpha, dim).amplitudes
    psi = plus + np.exp(-1j * phi) * minus
    return DensityMatrix.from_matrix(np.outer(psi, psi.conj()) / denom)


def coherent_density(alpha, dim) -> DensityMatrix:
    c = coherent_vector(alpha, dim)
    return DensityMatrix.from_matrix(np.outer(c.amplitudes, c.amplitudes.conj()))


def fock_density(n, dim) -> DensityMatrix:
    dim = _check_dim(dim)
    if not 0 <= n < dim:
        raise DimensionError(f"Fock level {n} outside truncation {dim}")
    rho = np.zeros((dim, dim), dtype=complex)
    rho[n, n] = 1.0
    return DensityMatrix(rho)


def _displacement_block(beta: complex, rows: int, cols: int) -> np.ndarray:
    """Entries ``<m|D(beta)|n>`` for ``m < rows``, ``n < cols`` (exact, not truncated)."""
    if beta == 0:
        return np.eye(rows, cols, dtype=complex)
    x = abs(beta) ** 2
    m = np.arange(rows)[:, None]
    n = np.arange(cols)[None, :]
    lo = np.minimum(m, n)
    k = np.abs(m - n)
    log_mag = 0.5 * (gammaln(lo + 1) - gammaln(lo + k + 1)) + k * math.log(abs(beta)) - 0.5 * x
    lag = eval_genlaguerre(lo, k, x)
    theta = np.where(m >= n, np.angle(beta), math.pi - np.angle(beta))
    out = np.exp(log_mag) * lag * np.exp(1j * k * theta)
    if not np.all(np.isfinite(out)):
        raise DimensionError(f"displacement elements overflow for |beta|={abs(beta):.3g}, dim={max(rows, cols)}")
    return out


def displacement_matrix(beta, dim) -> np.ndarray:
    """Matrix of ``D(beta) = exp(beta a^dag - beta^* a)`` on the first ``dim`` Fock levels.

    Built from the closed-form associated-Laguerre expression, so every entry is
    the exact infinite-space matrix element; only the truncation of the product
    ``D^dag D`` deviates from identity, near the upper edge.
    """
    dim = _check_dim(dim)
    return _displacement_block(complex(beta), dim, dim)


def displacement_margin(beta, support: int = 0) -> int:
    """Fock levels needed above a state's support to displace it by ``beta``.

    ``D(beta)|n>`` spreads up to roughly ``(sqrt(n) + |beta|)^2``, so the margin
    grows with the support as well as with ``|beta|``.
    """
    b = abs(beta)
    return math.ceil(4.0 * b * b + 8.0 + 3.0 * b * math.sqrt(support))


def support_size(rho: DensityMatrix, tol: float = SUPPORT_TOL) -> int:
    """Number of leading Fock levels carrying entries larger than ``tol``."""
    row_max = np.max(np.abs(rho.elements), axis=1)
    idx = np.nonzero(row_max > tol)[0]
    return int(idx[-1]) + 1 if idx.size else 1


def pad(rho: DensityMatrix, dim: int) -> DensityMatrix:
    """Embed ``rho`` into a larger truncation with zeros above its original levels."""
    dim = _check_dim(dim)
    if dim < rho.dim:
        raise DimensionError(f"cannot pad dimension {rho.dim} down to {dim}")
    if dim == rho.dim:
        return rho
    out = np.zeros((dim, dim), dtype=complex)
    out[: rho.dim, : rho.dim] = rho.elements
    return DensityMatrix(out, rho.truncation_loss)


def pad_for_displacement(rho: DensityMatrix, beta) -> DensityMatrix:
    """Pad ``rho`` so that displacing it by ``beta`` loses nothing at the truncation edge."""
    s = support_size(rho)
    need = s + displacement_margin(beta, s)
    return pad(rho, max(rho.dim, need))


def displace(rho: DensityMatrix, beta) -> DensityMatrix:
    """Return ``D(beta)^dag rho D(beta)`` in the same truncation as ``rho``."""
    if not isinstance(rho, DensityMatrix):
        raise TypeError("displace expects a DensityMatrix")
    beta = complex(beta)
    if beta == 0:
        return rho
    dim = rho.dim
    s = support_size(rho)
    # only rows below the support of rho contribute to D^dag rho D
    d_rows = _displacement_block(beta, s, dim)
    out = d_rows.conj().T @ rho.elements[:s, :s] @ d_rows
    out = 0.5 * (out + out.conj().T)
    lost = max(0.0, rho.trace - float(np.trace(out).real))
    return DensityMatrix(out, rho.truncation_loss + lost)


def number_distribution(rho: DensityMatrix) -> PhotonDistribution:
    """Diagonal ``<m|rho|m>``; round-off negatives above ``-1e-12`` are clamped to zero."""
    diag = np.real(np.diag(rho.elements)).copy()
    if np.any(diag < -NEGATIVE_CLAMP):
        m = int(np.argmin(diag))
        raise UnphysicalStateError(f"diagonal entry {m} is {diag[m]:.3g}")
    diag[diag < 0] = 0.0
    return PhotonDistribution(diag, rho.truncation_loss)
