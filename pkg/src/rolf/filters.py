"""Kalman, WoLF and RoLF recursions.

All three filters are one recursion with different knobs:

* prediction ``Sigma_pred = theta * Lam F Sigma F^T Lam^T + Om Q Om^T``
* weighted information-form update with ``omega = W(y, y_hat)``

``Lam = Om = I``, ``theta = 1`` and ``W = 1`` give the Kalman filter;
swapping in the inverse-multiquadric weight gives WoLF; turning on the
strong-tracking fading factor (and/or non-identity ``Lam``/``Om``) gives
RoLF.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .statespace import (
    DegenerateModelError,
    DimensionError,
    FilterStepError,
    GaussianBelief,
    LinearGaussianModel,
    MatrixLike,
    as_provider,
    mahalanobis_sq,
    spd_inverse,
    symmetrize_psd,
)

WEIGHT_KINDS = ("constant-one", "imq")
STF_MODES = ("one-shot", "recursive")


def default_imq_c(d: int, quantile: float = 0.99, target_weight: float = 0.7) -> float:
    """Soft threshold giving ``target_weight`` at the chi2(d) ``quantile``.

    Solves ``(1 + q / c^2)^{-1/2} = target_weight`` for ``c``.
    """
    q = stats.chi2.ppf(quantile, d)
    return float(np.sqrt(q / (target_weight**-2 - 1.0)))


# Frozen value of default_imq_c(2); the 2-D experiment uses it as-is.
DEFAULT_IMQ_C = 2.9747521835385395
DEFAULT_RHO = 0.95


@dataclass(frozen=True)
class WeightFnConfig:
    kind: str = "imq"
    c: float = DEFAULT_IMQ_C

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}; use one of {WEIGHT_KINDS}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")

    def __call__(self, residual, R) -> float:
        if self.kind == "constant-one":
            return 1.0
        return imq_weight(residual, R, self.c)


@dataclass(frozen=True)
class RobustConfig:
    """Knobs of the robust recursion.

    ``lambda_provider``/``omega_provider`` accept a constant matrix, a
    callable ``t -> matrix`` or ``None`` (identity). ``stf_mode`` selects the
    one-shot innovation covariance (``"one-shot"``) or the classical recursive
    estimate (``"recursive"``).
    """

    lambda_provider: Optional[MatrixLike] = None
    omega_provider: Optional[MatrixLike] = None
    stf_enabled: bool = False
    rho: float = DEFAULT_RHO
    weight: WeightFnConfig = field(default_factory=lambda: WeightFnConfig("constant-one"))
    stf_mode: str = "one-shot"

    def __post_init__(self):
        if self.stf_enabled and not 0 < self.rho < 1:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        if self.stf_mode not in STF_MODES:
            raise ValueError(f"unknown stf_mode {self.stf_mode!r}; use one of {STF_MODES}")

    @classmethod
    def kalman(cls) -> "RobustConfig":
        return cls(weight=WeightFnConfig("constant-one"))

    @classmethod
    def wolf(cls, c: float = DEFAULT_IMQ_C) -> "RobustConfig":
        return cls(weight=WeightFnConfig("imq", c))

    @classmethod
    def rolf(cls, c: float = DEFAULT_IMQ_C, rho: float = DEFAULT_RHO, **kwargs) -> "RobustConfig":
        return cls(stf_enabled=True, rho=rho, weight=WeightFnConfig("imq", c), **kwargs)

    def scaling(self, t: int, m: int) -> tuple[np.ndarray, np.ndarray]:
        eye = np.eye(m)
        lam = eye if self.lambda_provider is None else as_provider(self.lambda_provider)(t)
        om = eye if self.omega_provider is None else as_provider(self.omega_provider)(t)
        lam, om = np.asarray(lam, dtype=float), np.asarray(om, dtype=float)
        if lam.shape != (m, m) or om.shape != (m, m):
            raise DimensionError(
                f"Lambda {lam.shape} / Omega {om.shape} must be {m}x{m}"
            )
        return lam, om


@dataclass(frozen=True)
class StepTrace:
    predicted: GaussianBelief
    updated: GaussianBelief
    weight: float
    fading_factor: float
    innovation: np.ndarray


def _check_square(name, M, m):
    if M.shape != (m, m):
        raise DimensionError(f"{name} has shape {M.shape}, expected {(m, m)}")


def kf_predict(belief: GaussianBelief, F, Q) -> GaussianBelief:
    F = np.asarray(F, dtype=float)
    Q = np.asarray(Q, dtype=float)
    m = belief.dim
    _check_square("F", F, m)
    _check_square("Q", Q, m)
    return GaussianBelief(F @ belief.mean, symmetrize_psd(F @ belief.cov @ F.T + Q))


def rolf_predict(belief: GaussianBelief, F, Q, lam, omega, theta: float = 1.0) -> GaussianBelief:
    """Prediction with covariance scaling: ``theta*Lam F S F^T Lam^T + Om Q Om^T``.

    ``theta`` multiplies the propagated-covariance term only.
    """
    F, Q, lam, omega = (np.asarray(a, dtype=float) for a in (F, Q, lam, omega))
    m = belief.dim
    for name, M in (("F", F), ("Q", Q), ("Lambda", lam), ("Omega", omega)):
        _check_square(name, M, m)
    if not theta >= 1:
        raise ValueError(f"fading factor must be >= 1, got {theta}")
    LF = lam @ F
    cov = theta * (LF @ belief.cov @ LF.T) + omega @ Q @ omega.T
    return GaussianBelief(F @ belief.mean, symmetrize_psd(cov))


def kf_update_information(belief: GaussianBelief, H, R, y, weight: float = 1.0):
    """Weighted information-form measurement update.

    Returns ``(posterior, gain)``. ``weight`` scales the measurement
    information by ``weight**2``; 1 is the ordinary Kalman update.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    m = belief.dim
    d = y.shape[0]
    if H.shape != (d, m) or R.shape != (d, d):
        raise DimensionError(f"H {H.shape} / R {R.shape} inconsistent with m={m}, d={d}")
    if not 0 < weight <= 1:
        raise ValueError(f"weight must lie in (0, 1], got {weight}")

    prior_info = spd_inverse(belief.cov, "predicted covariance")
    Rinv_H = spd_inverse(R, "R") @ H
    w2 = weight * weight
    info = prior_info + w2 * (H.T @ Rinv_H)
    cov = spd_inverse((info + info.T) / 2, "posterior information")
    gain = w2 * cov @ Rinv_H.T
    mean = belief.mean + gain @ (y - H @ belief.mean)
    return GaussianBelief(mean, symmetrize_psd(cov)), gain


def imq_weight(residual, R, c: float) -> float:
    """Inverse-multiquadric weight ``(1 + |R^{-1/2} r|^2 / c^2)^{-1/2}``."""
    if not c > 0:
        raise ValueError(f"c must be positive, got {c}")
    return float((1.0 + mahalanobis_sq(residual, R) / (c * c)) ** -0.5)


def _fading_from_V(V, prev_cov, F, H, Q, R) -> float:
    num = np.trace(V - R - H @ Q @ H.T)
    HF = H @ F
    den = np.trace(HF @ prev_cov @ HF.T)
    if not den > 0:
        raise DegenerateModelError(
            "fading factor undefined: trace(H F Sigma F^T H^T) is not positive"
        )
    return max(1.0, float(num / den))


def stf_fading_factor(innovation, prev_posterior_cov, F, H, Q, R, rho: float) -> float:
    """Strong-tracking fading factor from the one-shot innovation covariance.

    ``V = rho H S H^T + R + (1 - rho) e e^T`` and
    ``theta = max(1, tr(V - R - H Q H^T) / tr(H F S F^T H^T))`` where ``e``
    is the innovation and ``S`` the previous posterior covariance.
    """
    e = np.atleast_1d(np.asarray(innovation, dtype=float))
    S = np.asarray(prev_posterior_cov, dtype=float)
    F, H, Q, R = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (F, H, Q, R))
    V = rho * (H @ S @ H.T) + R + (1.0 - rho) * np.outer(e, e)
    return _fading_from_V(V, S, F, H, Q, R)


def recursive_innovation_cov(prev_V, innovation, rho: float) -> np.ndarray:
    """Classical STF estimate ``V_t = (rho V_{t-1} + e e^T) / (1 + rho)``.

    ``prev_V=None`` starts the recursion at ``e e^T``.
    """
    e = np.atleast_1d(np.asarray(innovation, dtype=float))
    outer = np.outer(e, e)
    if prev_V is None:
        return outer
    return (rho * prev_V + outer) / (1.0 + rho)


def bayes_conditioning_oracle(prior: GaussianBelief, H, R, y) -> GaussianBelief:
    """Condition the joint Gaussian of ``(x, y)`` on the observed ``y``.

    Independent of the information-form update; used to cross-check it.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    m = prior.dim
    P = prior.cov
    joint_mean = np.concatenate([prior.mean, H @ prior.mean])
    joint_cov = np.block([[P, P @ H.T], [H @ P, H @ P @ H.T + R]])
    Sxx = joint_cov[:m, :m]
    Sxy = joint_cov[:m, m:]
    Syy = joint_cov[m:, m:]
    try:
        A = np.linalg.solve(Syy, Sxy.T).T
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("joint covariance is singular") from exc
    mean = joint_mean[:m] + A @ (y - joint_mean[m:])
    cov = Sxx - A @ Sxy.T
    return GaussianBelief(mean, (cov + cov.T) / 2)


def filter_run(
    model: LinearGaussianModel,
    measurements: Sequence,
    config: RobustConfig,
    on_step: Optional[Callable[[int, StepTrace], None]] = None,
) -> list[StepTrace]:
    """Run the robust recursion over ``measurements``.

    At each step the fading factor is computed from the innovation of the
    measurement against the previous posterior propagated through ``F``;
    it is 1 when strong tracking is off.
    """
    belief = model.init
    m = belief.dim
    traces = []
    V = None
    for t, y in enumerate(measurements):
        try:
            F, H, Q, R = model.at(t)
            y = np.atleast_1d(np.asarray(y, dtype=float))
            lam, om = config.scaling(t, m)
            innovation = y - H @ (F @ belief.mean)
            theta = 1.0
            if config.stf_enabled:
                if config.stf_mode == "one-shot":
                    theta = stf_fading_factor(innovation, belief.cov, F, H, Q, R, config.rho)
                else:
                    V = recursive_innovation_cov(V, innovation, config.rho)
                    theta = _fading_from_V(V, belief.cov, F, H, Q, R)
            predicted = rolf_predict(belief, F, Q, lam, om, theta)
            residual = y - H @ predicted.mean
            w = config.weight(residual, R)
            updated, _ = kf_update_information(predicted, H, R, y, w)
        except (FilterStepError, KeyboardInterrupt):
            raise
        except Exception as exc:
            raise FilterStepError(t, exc) from exc
        step = StepTrace(predicted, updated, w, theta, residual)
        traces.append(step)
        if on_step is not None:
            on_step(t, step)
        belief = updated
    return traces


def final_belief(model: LinearGaussianModel, traces: Sequence[StepTrace]) -> GaussianBelief:
    return traces[-1].updated if traces else model.init
