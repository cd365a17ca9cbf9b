"""Linear-Gaussian state-space types and covariance hygiene helpers.

Every filter in the package shares these value types. Covariances are
symmetrized and clamped to the PSD cone after each predict/update step so
that floating-point drift does not accumulate over long horizons.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy.linalg import lapack

SYM_TOL = 1e-9
PSD_TOL = 1e-9

MatrixProvider = Callable[[int], np.ndarray]
MatrixLike = Union[np.ndarray, MatrixProvider]


class DimensionError(ValueError):
    """Raised when matrix or vector shapes are inconsistent."""


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a Cholesky factorization fails on a matrix that must be PD."""


class DegenerateModelError(ValueError):
    """Raised when a model makes a quantity undefined (e.g. a zero trace)."""


class FilterStepError(RuntimeError):
    """Wraps an error raised while processing a particular time step."""

    def __init__(self, step: int, cause: Exception):
        super().__init__(f"step {step}: {type(cause).__name__}: {cause}")
        self.step = step
        self.cause = cause


def _frozen(a, ndim: int) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    if out.ndim == 0 and ndim == 1:
        out = out.reshape(1)
    elif out.ndim == 0 and ndim == 2:
        out = out.reshape(1, 1)
    if out.ndim != ndim:
        raise DimensionError(f"expected a {ndim}-d array, got shape {out.shape}")
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class GaussianBelief:
    """Mean and covariance of a Gaussian state belief.

    Arrays are copied and made read-only on construction. Invariants are
    not checked here (that would cost an eigendecomposition per step); use
    :func:`belief_violations` when they matter.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _frozen(self.mean, 1))
        object.__setattr__(self, "cov", _frozen(self.cov, 2))
        m = self.mean.shape[0]
        if self.cov.shape != (m, m):
            raise DimensionError(
                f"cov shape {self.cov.shape} does not match mean length {m}"
            )

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def belief_violations(belief: GaussianBelief, tol: float = SYM_TOL) -> list[str]:
    """Names of the GaussianBelief invariants that ``belief`` breaks."""
    problems = []
    cov = belief.cov
    if not np.all(np.isfinite(cov)) or not np.all(np.isfinite(belief.mean)):
        return ["non-finite entries"]
    if np.max(np.abs(cov - cov.T), initial=0.0) > tol:
        problems.append("cov not symmetric")
    eig = np.linalg.eigvalsh((cov + cov.T) / 2)
    if eig.size and eig[0] < -PSD_TOL * max(eig[-1], 0.0):
        problems.append("cov not positive semidefinite")
    return problems


def as_provider(value: MatrixLike) -> MatrixProvider:
    """Wrap a constant matrix as a per-step provider; pass callables through."""
    if callable(value):
        return value
    mat = _frozen(value, 2)
    return lambda t: mat


@dataclass(frozen=True)
class LinearGaussianModel:
    """x_t = F x_{t-1} + u_t, y_t = H x_t + v_t with Gaussian u_t, v_t.

    Each of ``F``, ``H``, ``Q``, ``R`` is either a constant matrix or a
    callable ``t -> matrix`` for time-varying models, with ``t`` the
    zero-based index of the measurement being processed.
    """

    F: MatrixLike
    H: MatrixLike
    Q: MatrixLike
    R: MatrixLike
    init: GaussianBelief
    _providers: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(
            self,
            "_providers",
            tuple(as_provider(v) for v in (self.F, self.H, self.Q, self.R)),
        )

    def at(self, t: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(F, H, Q, R)`` for step ``t``."""
        return tuple(np.asarray(p(t), dtype=float) for p in self._providers)

    @property
    def state_dim(self) -> int:
        return self.init.dim

    @property
    def obs_dim(self) -> int:
        return self.at(0)[1].shape[0]


@dataclass(frozen=True)
class Trajectory:
    """True states and the measurements observed along them."""

    states: np.ndarray
    measurements: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        meas = np.asarray(self.measurements, dtype=float)
        if states.shape[0] != meas.shape[0]:
            raise DimensionError(
                f"{states.shape[0]} states but {meas.shape[0]} measurements"
            )
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "measurements", meas)

    def __len__(self) -> int:
        return self.states.shape[0]


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def _is_symmetric(M: np.ndarray, tol: float = SYM_TOL) -> bool:
    return np.max(np.abs(M - M.T), initial=0.0) <= tol


def validate_model(model: LinearGaussianModel, t: int = 0) -> ValidationReport:
    """Check the model's matrices at step ``t``.

    Violations are returned as data. Dimension problems short-circuit the
    definiteness checks on the offending matrix only.
    """
    out = []
    try:
        F, H, Q, R = model.at(t)
    except Exception as exc:  # a broken provider is itself a violation
        return ValidationReport((f"provider failed: {exc}",))
    m = model.init.mean.shape[0]

    if F.ndim != 2 or F.shape != (m, m):
        out.append("F dimension mismatch")
    if H.ndim != 2 or H.shape[1:] != (m,):
        out.append("H dimension mismatch")
    d = H.shape[0] if H.ndim == 2 else None
    q_ok = Q.ndim == 2 and Q.shape == (m, m)
    r_ok = R.ndim == 2 and d is not None and R.shape == (d, d)
    if not q_ok:
        out.append("Q dimension mismatch")
    if not r_ok:
        out.append("R dimension mismatch")

    if q_ok:
        if not _is_symmetric(Q):
            out.append("Q not symmetric")
        else:
            eig = np.linalg.eigvalsh(Q)
            if eig[0] < -PSD_TOL * max(eig[-1], 1.0):
                out.append("Q not positive semidefinite")
    if r_ok:
        if not _is_symmetric(R):
            out.append("R not symmetric")
        if not is_positive_definite(R):
            out.append("R not positive definite")
    out.extend(f"init {v}" for v in belief_violations(model.init))
    return ValidationReport(tuple(out))


def symmetrize_psd(M) -> np.ndarray:
    """Return ``(M + M^T) / 2`` with negative eigenvalues clamped to zero.

    Matrices that already admit a Cholesky factor are returned symmetrized
    without a round trip through the eigendecomposition.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    S = (M + M.T) / 2
    if is_positive_definite(S):
        return S
    w, V = np.linalg.eigh(S)
    if w[0] >= 0:
        return S
    out = (V * np.clip(w, 0.0, None)) @ V.T
    return (out + out.T) / 2


def _potrf(M: np.ndarray):
    # LAPACK directly: numpy's wrapper costs several times the 4x4 factorization.
    if not np.isfinite(M).all():
        return None, -1
    return lapack.dpotrf(M, lower=1, clean=1)


def is_positive_definite(M: np.ndarray) -> bool:
    return _potrf(np.asarray(M, dtype=float))[1] == 0


def cholesky(M, name: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor, raising NotPositiveDefiniteError on failure."""
    L, info = _potrf(np.asarray(M, dtype=float))
    if info != 0:
        raise NotPositiveDefiniteError(f"{name} is not positive definite")
    return L


def spd_inverse(M, name: str = "matrix") -> np.ndarray:
    """Inverse of a symmetric positive definite matrix through its Cholesky factor."""
    L = cholesky(M, name)
    inv, info = lapack.dpotri(L, lower=1)
    if info != 0:
        raise NotPositiveDefiniteError(f"{name} is singular")
    # Upper triangle is still zero from the cleaned factor; mirror the lower one.
    full = inv + inv.T
    full.flat[:: full.shape[0] + 1] *= 0.5
    return full


def mahalanobis_sq(residual, R) -> float:
    """``r^T R^{-1} r`` via a triangular solve against chol(R)."""
    r = np.atleast_1d(np.asarray(residual, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if R.shape != (r.shape[0], r.shape[0]):
        raise DimensionError(f"R shape {R.shape} vs residual length {r.shape[0]}")
    L = cholesky(R, "R")
    z, info = lapack.dtrtrs(L, r, lower=1)
    return float(z @ z)
