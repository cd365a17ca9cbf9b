"""scikit-learn style wrappers around :func:`rolf.filters.filter_run`.

The estimators treat a measurement sequence ``X`` of shape ``(T, d)`` as the
data. ``fit`` validates the model and filters ``X``; ``transform`` filters a
sequence and returns the posterior state means ``(T, m)``; ``predict``
returns the filtered measurement-space estimates ``H x_{t|t}``.

    est = RobustLossFilter(F=F, H=H, Q=Q, R=R).fit(Y)
    est.means_           # (T, m) filtered means
    est.fading_factors_  # (T,) strong-tracking factors
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .filters import DEFAULT_IMQ_C, DEFAULT_RHO, RobustConfig, WeightFnConfig, filter_run
from .statespace import GaussianBelief, LinearGaussianModel, validate_model


class RobustLossFilter(TransformerMixin, BaseEstimator):
    """Robust loss-based Kalman filter (RoLF) as an estimator.

    Parameters
    ----------
    F, H, Q, R : array-like or callable
        Transition, observation, process-noise and measurement-noise
        matrices, or per-step providers ``t -> matrix``.
    init_mean, init_cov : array-like, optional
        Initial belief; zeros and identity when omitted.
    weight : {"imq", "constant-one"}
        Measurement weighting function.
    c : float
        IMQ soft threshold in Mahalanobis units.
    stf : bool
        Apply the strong-tracking fading factor to the prediction.
    rho : float
        Fading-factor smoothing in (0, 1).
    stf_mode : {"one-shot", "recursive"}
    lambda_, omega : array-like or callable, optional
        Covariance scalings of the propagated term and of Q (identity when
        omitted).
    """

    def __init__(self, F=None, H=None, Q=None, R=None, init_mean=None, init_cov=None,
                 weight="imq", c=DEFAULT_IMQ_C, stf=True, rho=DEFAULT_RHO,
                 stf_mode="one-shot", lambda_=None, omega=None):
        self.F = F
        self.H = H
        self.Q = Q
        self.R = R
        self.init_mean = init_mean
        self.init_cov = init_cov
        self.weight = weight
        self.c = c
        self.stf = stf
        self.rho = rho
        self.stf_mode = stf_mode
        self.lambda_ = lambda_
        self.omega = omega

    def _build(self):
        if any(v is None for v in (self.F, self.H, self.Q, self.R)):
            raise ValueError("F, H, Q and R must all be given")
        F0 = self.F(0) if callable(self.F) else self.F
        m = np.asarray(F0).shape[0]
        mean = np.zeros(m) if self.init_mean is None else self.init_mean
        cov = np.eye(m) if self.init_cov is None else self.init_cov
        model = LinearGaussianModel(self.F, self.H, self.Q, self.R, GaussianBelief(mean, cov))
        report = validate_model(model)
        if not report.ok:
            raise ValueError("invalid model: " + "; ".join(report.violations))
        config = RobustConfig(
            lambda_provider=self.lambda_,
            omega_provider=self.omega,
            stf_enabled=bool(self.stf),
            rho=self.rho,
            weight=WeightFnConfig(self.weight, self.c),
            stf_mode=self.stf_mode,
        )
        return model, config

    def _check_X(self, X, d):
        X = check_array(X, ensure_min_samples=0, dtype=np.float64)
        if X.shape[1] != d:
            raise ValueError(f"X has {X.shape[1]} columns, the model observes {d}")
        return X

    def _filter(self, X):
        traces = filter_run(self.model_, X, self.config_)
        m = self.model_.state_dim
        means = np.array([s.updated.mean for s in traces]).reshape(-1, m)
        covs = np.array([s.updated.cov for s in traces]).reshape(-1, m, m)
        return traces, means, covs

    def fit(self, X, y=None):
        self.model_, self.config_ = self._build()
        X = self._check_X(X, self.model_.obs_dim)
        self.n_features_in_ = X.shape[1]
        self.traces_, self.means_, self.covs_ = self._filter(X)
        self.weights_ = np.array([s.weight for s in self.traces_])
        self.fading_factors_ = np.array([s.fading_factor for s in self.traces_])
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        X = self._check_X(X, self.n_features_in_)
        return self._filter(X)[1]

    def predict(self, X):
        means = self.transform(X)
        H = self.model_.at(0)[1] if not callable(self.H) else None
        if H is not None:
            return means @ H.T
        return np.array([self.model_.at(t)[1] @ mu for t, mu in enumerate(means)])


class KalmanFilter(RobustLossFilter):
    """Standard Kalman filter: unit weights, no fading factor, identity scalings."""

    def __init__(self, F=None, H=None, Q=None, R=None, init_mean=None, init_cov=None):
        super().__init__(F, H, Q, R, init_mean, init_cov, weight="constant-one", stf=False)


class WeightedObservationFilter(RobustLossFilter):
    """WoLF: IMQ-weighted measurement update with the standard prediction."""

    def __init__(self, F=None, H=None, Q=None, R=None, init_mean=None, init_cov=None,
                 c=DEFAULT_IMQ_C):
        super().__init__(F, H, Q, R, init_mean, init_cov, weight="imq", c=c, stf=False)
