"""Per-step losses, RMSE, top-q tail means and cross-replica summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

DEFAULT_TAIL_Q = 0.05
POSITION_MASK = (0, 2)

SUMMARY_METRICS = ("rmse", "tail_mean")
SUMMARY_STATISTICS = ("median", "mean", "std")


@dataclass(frozen=True)
class RunResult:
    filter_name: str
    seed: int
    per_step_loss: np.ndarray
    weights: np.ndarray
    fading_factors: np.ndarray
    rmse: float
    tail_mean: float

    @classmethod
    def from_losses(cls, filter_name, seed, losses, weights=None, fading_factors=None,
                    q: float = DEFAULT_TAIL_Q) -> "RunResult":
        losses = np.asarray(losses, dtype=float)
        T = losses.shape[0]
        weights = np.ones(T) if weights is None else np.asarray(weights, dtype=float)
        fading = np.ones(T) if fading_factors is None else np.asarray(fading_factors, dtype=float)
        return cls(filter_name, int(seed), losses, weights, fading,
                   rmse(losses), tail_mean_loss(losses, q))

    @property
    def cumulative_loss(self) -> np.ndarray:
        return np.cumsum(self.per_step_loss)


def per_step_loss(estimate, truth, mask: Optional[Sequence[int]] = POSITION_MASK) -> float:
    """Squared error summed over the masked components (all when ``mask`` is None)."""
    est = np.asarray(estimate, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.shape != tru.shape:
        raise ValueError(f"length mismatch: {est.shape} vs {tru.shape}")
    diff = est - tru
    if mask is not None:
        diff = diff[list(mask)]
    return float(diff @ diff)


def trajectory_losses(estimates, truths, mask: Optional[Sequence[int]] = POSITION_MASK) -> np.ndarray:
    """Vectorized :func:`per_step_loss` over ``(T, m)`` arrays."""
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truths, dtype=float)
    if est.shape != tru.shape:
        raise ValueError(f"length mismatch: {est.shape} vs {tru.shape}")
    diff = est - tru
    if mask is not None:
        diff = diff[:, list(mask)]
    return np.einsum("ij,ij->i", diff, diff)


def rmse(losses) -> float:
    losses = np.asarray(losses, dtype=float)
    if losses.size == 0:
        raise ValueError("rmse of an empty loss sequence")
    return float(np.sqrt(losses.mean()))


def tail_count(n: int, q: float) -> int:
    # q*n can land a hair above an integer (0.07*100 -> 7.000000000000001).
    return max(1, min(n, math.ceil(round(q * n, 9))))


def tail_mean_loss(losses, q: float = DEFAULT_TAIL_Q) -> float:
    """Mean of the ``ceil(q * T)`` largest losses."""
    losses = np.asarray(losses, dtype=float).ravel()
    n = losses.shape[0]
    if n == 0:
        raise ValueError("tail mean of an empty loss sequence")
    if not 0 < q <= 1:
        raise ValueError(f"q must lie in (0, 1], got {q}")
    k = tail_count(n, q)
    if k == n:
        return float(losses.mean())
    top = np.partition(losses, n - k)[n - k:]
    return float(top.mean())


def _stats(values: np.ndarray) -> dict:
    return {
        "median": float(np.median(values)),
        "mean": float(np.mean(values)),
        "std": float(np.std(values, ddof=1)) if values.size > 1 else 0.0,
    }


def aggregate_runs(results: Iterable[RunResult]) -> dict:
    """Per-filter median/mean/std of rmse and tail_mean.

    Returns ``{filter: {metric: {statistic: value, ..., "n_runs": n}}}``
    with filters in first-seen order. ``std`` uses ``ddof=1`` and is 0 for
    a single run.
    """
    results = list(results)
    if not results:
        raise ValueError("aggregate_runs needs at least one result")
    by_filter: dict[str, list[RunResult]] = {}
    for r in results:
        by_filter.setdefault(r.filter_name, []).append(r)
    summary = {}
    for name, runs in by_filter.items():
        summary[name] = {}
        for metric in SUMMARY_METRICS:
            vals = np.array([getattr(r, metric) for r in runs], dtype=float)
            summary[name][metric] = {**_stats(vals), "n_runs": len(runs)}
    return summary


def win_rate(results: Iterable[RunResult], challenger: str, baseline: str,
             metric: str = "tail_mean") -> tuple[float, int]:
    """Fraction of matched seeds where ``challenger`` scores strictly lower.

    Returns ``(rate, n_matched)``.
    """
    a, b = {}, {}
    for r in results:
        if r.filter_name == challenger:
            a[r.seed] = getattr(r, metric)
        elif r.filter_name == baseline:
            b[r.seed] = getattr(r, metric)
    seeds = sorted(set(a) & set(b))
    if not seeds:
        raise ValueError(f"no matched seeds between {challenger!r} and {baseline!r}")
    wins = sum(a[s] < b[s] for s in seeds)
    return wins / len(seeds), len(seeds)


def summary_records(summary: dict) -> list[dict]:
    """Flatten :func:`aggregate_runs` output to JSON records.

    Each record has the fields ``filter``, ``metric``, ``statistic``,
    ``value``, ``n_runs``.
    """
    out = []
    for name, metrics in summary.items():
        for metric in SUMMARY_METRICS:
            block = metrics[metric]
            for stat in SUMMARY_STATISTICS:
                out.append({
                    "filter": name, "metric": metric, "statistic": stat,
                    "value": block[stat], "n_runs": block["n_runs"],
                })
    return out
