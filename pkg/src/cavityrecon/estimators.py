"""scikit-learn style wrappers around the series and the reconstruction pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .fockspace import DensityMatrix, PhotonDistribution
from .probe import ProbeConfig
from .quasiprob import NOISE_TOL, SMOOTHING, evaluate_series
from .recon import ReconPlan, StateSpec, reconstruct_point


class ParitySeriesTransformer(TransformerMixin, BaseEstimator):
    """Map rows of photon-number distributions to quasiprobability values.

    Each row of ``X`` is ``P_m(beta; t)`` measured after a decay of
    ``gamma_t``; the output column is the value at the same phase point of
    the initial state. Stateless, so ``fit`` only records the input width.
    """

    def __init__(self, s=0.0, gamma_t=0.0):
        self.s = s
        self.gamma_t = gamma_t

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} photon numbers, got {X.shape[1]}")
        out = [evaluate_series(PhotonDistribution(row), self.s, self.gamma_t).value for row in X]
        return np.asarray(out).reshape(-1, 1)


class QuasiprobReconstructor(BaseEstimator):
    """Simulated drive-decay-readout reconstruction of a known initial state.

    ``fit`` takes the initial density matrix (square complex array), or
    ``None`` to build ``state`` at ``dim``. ``predict`` takes an ``(n, 2)``
    array of phase points ``(x, y)`` and returns the reconstructed values.
    """

    def __init__(self, state="cat", alpha=2.0, phi=0.0, dim=64, gamma=1.0, t_d=0.01,
                 t_meas=0.1, s=0.0, path="analytic", lam=100.0, tau_samples=256,
                 noise_sigma=0.0, seed=0, noise_tol=NOISE_TOL, smoothing=SMOOTHING):
        self.state = state
        self.alpha = alpha
        self.phi = phi
        self.dim = dim
        self.gamma = gamma
        self.t_d = t_d
        self.t_meas = t_meas
        self.s = s
        self.path = path
        self.lam = lam
        self.tau_samples = tau_samples
        self.noise_sigma = noise_sigma
        self.seed = seed
        self.noise_tol = noise_tol
        self.smoothing = smoothing

    def _plan(self, dim) -> ReconPlan:
        probe = ProbeConfig(lam=self.lam, tau_samples=self.tau_samples,
                            noise_sigma=self.noise_sigma, seed=self.seed)
        return ReconPlan(
            state=StateSpec(self.state, self.alpha, self.phi), dim=dim, gamma=self.gamma,
            t_d=self.t_d, t_meas=self.t_meas, x_axis=(0.0,), y_axis=(0.0,), s=self.s,
            path=self.path, probe=probe, noise_tol=self.noise_tol, smoothing=self.smoothing,
        )

    def fit(self, X=None, y=None):
        if X is None:
            plan = self._plan(self.dim)
            self.rho0_ = plan.state.build(self.dim)
        else:
            # check_array rejects complex input; DensityMatrix does the validation
            self.rho0_ = DensityMatrix.from_matrix(np.asarray(X, dtype=np.complex128))
            plan = self._plan(self.rho0_.dim)
        self.plan_ = plan
        return self

    def predict(self, X):
        check_is_fitted(self, "rho0_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 2:
            raise ValueError("phase points must be given as (x, y) columns")
        return np.array([
            reconstruct_point(self.plan_, complex(x, y), i, self.rho0_) for i, (x, y) in enumerate(X)
        ])
