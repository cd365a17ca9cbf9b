"""Seeded 2-D constant-velocity scenarios with GARCH velocity noise.

The true process noise on each velocity axis follows an independent
GARCH(1,1) variance chain, so a filter configured with a constant nominal
Q is misspecified in exactly the way robust prediction is meant to absorb.
Measurements are position-only with a two-component Gaussian mixture:
nominal ``N(0, R)`` and, with probability ``p_outlier``, ``N(0, scale^2 R)``.

Random draws per step, in order, from ``numpy.random.Generator(PCG64(seed))``:
four standard normals for the process noise, one uniform for the outlier
branch, two standard normals for the measurement noise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .statespace import GaussianBelief, LinearGaussianModel, Trajectory, cholesky

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

POSITION_IDX = (0, 2)
VELOCITY_IDX = (1, 3)

SCENARIO_CSV_COLUMNS = (
    "t", "x", "vx", "y", "vy", "meas_x", "meas_y",
    "outlier_flag", "sigma_vx_sq", "sigma_vy_sq",
)


@dataclass(frozen=True)
class GarchParams:
    omega0: float = 0.1
    alpha: float = 0.3
    beta: float = 0.6
    sigma0_sq: float = 1.0

    def __post_init__(self):
        if not self.omega0 > 0 or not self.sigma0_sq > 0:
            raise ValueError("omega0 and sigma0_sq must be positive")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be nonnegative")
        if not self.alpha + self.beta < 1:
            raise ValueError(f"alpha + beta must be < 1, got {self.alpha + self.beta}")

    @property
    def stationary_variance(self) -> float:
        return self.omega0 / (1.0 - self.alpha - self.beta)


@dataclass(frozen=True)
class MixtureNoiseParams:
    p_outlier: float = 0.05
    scale: float = 10.0

    def __post_init__(self):
        if not 0 <= self.p_outlier <= 1:
            raise ValueError(f"p_outlier must lie in [0, 1], got {self.p_outlier}")
        if not self.scale >= 1:
            raise ValueError(f"scale must be >= 1, got {self.scale}")


@dataclass(frozen=True)
class Impulse:
    """Additive state jump applied after the process-noise draw at step ``t``."""

    t: int
    delta: tuple[float, float, float, float]


@dataclass(frozen=True)
class ScenarioConfig:
    dt: float = 1.0
    horizon: int = 1000
    pos_noise_var: float = 0.01
    garch: GarchParams = field(default_factory=GarchParams)
    mixture: MixtureNoiseParams = field(default_factory=MixtureNoiseParams)
    R: tuple = ((1.0, 0.0), (0.0, 1.0))
    seed: int = 0
    init_var: float = 1.0
    impulses: tuple[Impulse, ...] = ()

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError("horizon must be a positive integer")
        if not self.pos_noise_var > 0 or not self.init_var > 0:
            raise ValueError("variance parameters must be positive")
        if not 0 <= int(self.seed) <= MASK64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        R = np.asarray(self.R, dtype=float)
        if R.shape != (2, 2) or np.max(np.abs(R - R.T)) > 1e-12:
            raise ValueError("R must be a symmetric 2x2 matrix")
        cholesky(R, "R")
        object.__setattr__(self, "R", tuple(tuple(float(v) for v in row) for row in R))

    @property
    def R_matrix(self) -> np.ndarray:
        return np.array(self.R, dtype=float)


@dataclass(frozen=True)
class Scenario:
    trajectory: Trajectory
    process_covs: np.ndarray  # (T, 4, 4) true Q_t
    outlier_flags: np.ndarray  # (T,) bool

    @property
    def garch_variances(self) -> np.ndarray:
        return self.process_covs[:, VELOCITY_IDX, VELOCITY_IDX]


def garch_step(prev_sigma_sq: float, prev_eps: float, params: GarchParams) -> float:
    """One GARCH(1,1) variance update."""
    return params.omega0 + params.alpha * prev_eps * prev_eps + params.beta * prev_sigma_sq


def simulate_garch(params: GarchParams, n_steps: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Simulate one chain; returns ``(sigma_sq, eps)`` each of length ``n_steps``."""
    z = rng.standard_normal(n_steps)
    sig = np.empty(n_steps)
    eps = np.empty(n_steps)
    s = params.sigma0_sq
    for t in range(n_steps):
        if t:
            s = garch_step(s, eps[t - 1], params)
        sig[t] = s
        eps[t] = np.sqrt(s) * z[t]
    return sig, eps


def build_cv_model(dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Constant-velocity ``F`` (4x4) and position-selecting ``H`` (2x4), state (x, vx, y, vy)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    block = np.array([[1.0, dt], [0.0, 1.0]])
    F = np.zeros((4, 4))
    F[:2, :2] = block
    F[2:, 2:] = block
    H = np.zeros((2, 4))
    H[0, 0] = 1.0
    H[1, 2] = 1.0
    return F, H


def nominal_process_cov(config: ScenarioConfig) -> np.ndarray:
    """Constant Q a filter is given: stationary GARCH variance on velocities."""
    v = config.garch.stationary_variance
    p = config.pos_noise_var
    return np.diag([p, v, p, v])


def nominal_model(config: ScenarioConfig) -> LinearGaussianModel:
    F, H = build_cv_model(config.dt)
    init = GaussianBelief(np.zeros(4), config.init_var * np.eye(4))
    return LinearGaussianModel(F, H, nominal_process_cov(config), config.R_matrix, init)


def generate_scenario(config: ScenarioConfig) -> Scenario:
    """Draw one trajectory; a pure function of ``config`` (seed included).

    The true initial state is the origin at rest.
    """
    F, H = build_cv_model(config.dt)
    L_R = cholesky(config.R_matrix, "R")
    rng = np.random.Generator(np.random.PCG64(int(config.seed)))
    T = int(config.horizon)
    g = config.garch
    p_out = config.mixture.p_outlier
    scale = config.mixture.scale
    jumps = {imp.t: np.asarray(imp.delta, dtype=float) for imp in config.impulses}

    states = np.empty((T, 4))
    meas = np.empty((T, 2))
    covs = np.zeros((T, 4, 4))
    flags = np.zeros(T, dtype=bool)

    x = np.zeros(4)
    sig = np.array([g.sigma0_sq, g.sigma0_sq])
    eps = np.zeros(2)
    for t in range(T):
        if t:
            sig = g.omega0 + g.alpha * eps * eps + g.beta * sig
        q_diag = np.array([config.pos_noise_var, sig[0], config.pos_noise_var, sig[1]])
        covs[t] = np.diag(q_diag)
        # Q_t is diagonal, so its Cholesky factor is the elementwise sqrt.
        u = np.sqrt(q_diag) * rng.standard_normal(4)
        eps = u[list(VELOCITY_IDX)]
        x = F @ x + u
        if t in jumps:
            x = x + jumps[t]
        outlier = rng.random() < p_out
        v = L_R @ rng.standard_normal(2)
        if outlier:
            v = scale * v
        states[t] = x
        meas[t] = H @ x + v
        flags[t] = outlier
    return Scenario(Trajectory(states, meas), covs, flags)


def _splitmix64(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK64
    return z ^ (z >> 31)


def derive_run_seed(base_seed: int, replica_index: int) -> int:
    """Seed for replica ``replica_index``: SplitMix64 at counter ``index + 1``.

    ``mix(base + (index + 1) * GOLDEN_GAMMA mod 2^64)``. The finalizer is a
    bijection and the gamma is odd, so distinct indices below 2^64 map to
    distinct seeds for any base.
    """
    if replica_index < 0:
        raise ValueError("replica_index must be nonnegative")
    state = (int(base_seed) + (int(replica_index) + 1) * GOLDEN_GAMMA) & MASK64
    return _splitmix64(state)


def write_scenario_csv(path, scenario: Scenario) -> None:
    traj = scenario.trajectory
    sig = scenario.garch_variances
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCENARIO_CSV_COLUMNS)
        for t in range(len(traj)):
            s = traj.states[t]
            y = traj.measurements[t]
            w.writerow([
                t, *(repr(float(v)) for v in s), *(repr(float(v)) for v in y),
                int(scenario.outlier_flags[t]), repr(float(sig[t, 0])), repr(float(sig[t, 1])),
            ])


def scenario_checksum(scenarios: Sequence[Scenario], digest: Optional[object] = None) -> str:
    """SHA-256 over the measurement bytes of ``scenarios`` in order."""
    import hashlib

    h = digest or hashlib.sha256()
    for sc in scenarios:
        h.update(np.ascontiguousarray(sc.trajectory.measurements, dtype="<f8").tobytes())
    return h.hexdigest()
