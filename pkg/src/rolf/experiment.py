"""Seeded Monte Carlo comparison of KF, WoLF and RoLF on GARCH scenarios.

An experiment is described by one JSON document (see :func:`schema_text`).
Every replica derives its own seed from the base scenario seed, generates a
single scenario, and runs every configured filter on that identical
measurement stream so the comparison is paired.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .filters import DEFAULT_IMQ_C, DEFAULT_RHO, STF_MODES, WEIGHT_KINDS, RobustConfig, WeightFnConfig, filter_run
from .metrics import DEFAULT_TAIL_Q, RunResult, aggregate_runs, summary_records, trajectory_losses, win_rate
from .simulate import (
    GarchParams,
    Impulse,
    MixtureNoiseParams,
    Scenario,
    ScenarioConfig,
    derive_run_seed,
    generate_scenario,
    nominal_model,
)

log = logging.getLogger(__name__)

CSV_COLUMNS = ("replica", "t", "filter", "loss", "weight", "theta", "outlier_flag", "cum_loss")
CSV_NAME = "per_step.csv"
SUMMARY_NAME = "summary.json"
PLOT_NAMES = ("loss_trace.svg", "tail_loss.svg")

# Artifact-defined threshold for RoLF-over-WoLF paired tail-loss wins.
WIN_RATE_THRESHOLD = 0.7
CLAIM_NOTE = (
    "Artifact-defined qualitative checks; thresholds stand in for figure "
    "values that were never published as numbers."
)

PRESETS = {
    "kf": {"weight": "constant-one", "stf_enabled": False},
    "wolf": {"weight": "imq", "stf_enabled": False},
    "rolf": {"weight": "imq", "stf_enabled": True},
}


class ConfigParseError(Exception):
    """The config file could not be read or is not JSON (exit code 2)."""


class ConfigError(ValueError):
    """The config parsed but holds invalid values (exit code 3)."""


@dataclass(frozen=True)
class FilterSpec:
    name: str
    config: RobustConfig
    preset: Optional[str] = None


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    filters: tuple[FilterSpec, ...] = ()
    n_replicas: int = 20
    output_dir: Path = Path("results")
    emit_plots: bool = True
    tail_q: float = DEFAULT_TAIL_Q
    jobs: int = 1

    def __post_init__(self):
        if not self.filters:
            object.__setattr__(self, "filters", default_filters())
        names = [f.name for f in self.filters]
        if len(set(names)) != len(names):
            raise ConfigError(f"filter names must be unique, got {names}")
        if int(self.n_replicas) != self.n_replicas or self.n_replicas < 1:
            raise ConfigError("n_replicas must be a positive integer")
        if not 0 < self.tail_q <= 1:
            raise ConfigError("tail_q must lie in (0, 1]")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")


def default_filters() -> tuple[FilterSpec, ...]:
    return tuple(FilterSpec(n, _filter_from_dict({"name": n, "preset": n}).config, n) for n in PRESETS)


# --- parsing -----------------------------------------------------------------

_SCENARIO_KEYS = {"dt", "horizon", "pos_noise_var", "garch", "mixture", "R", "seed", "init_var", "impulses"}
_FILTER_KEYS = {"name", "preset", "weight", "c", "stf_enabled", "rho", "stf_mode", "lambda", "omega"}
_TOP_KEYS = {"scenario", "filters", "n_replicas", "output_dir", "emit_plots", "tail_q", "jobs"}


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a JSON object")
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(extra)}")


def _scaling_matrix(value, where):
    if value is None:
        return None
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return float(arr) * np.eye(4)
    if arr.shape != (4, 4):
        raise ConfigError(f"{where} must be a scalar or a 4x4 matrix")
    return arr


def _filter_from_dict(d: dict) -> FilterSpec:
    _check_keys(d, _FILTER_KEYS, "filter entry")
    if "name" not in d or not isinstance(d["name"], str) or not d["name"]:
        raise ConfigError("every filter needs a non-empty string 'name'")
    preset = d.get("preset")
    if preset is not None and preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; use one of {sorted(PRESETS)}")
    merged = {"weight": "imq", "stf_enabled": True, **PRESETS.get(preset, {}), **d}
    if merged["weight"] not in WEIGHT_KINDS:
        raise ConfigError(f"weight must be one of {WEIGHT_KINDS}")
    if merged.get("stf_mode", "one-shot") not in STF_MODES:
        raise ConfigError(f"stf_mode must be one of {STF_MODES}")
    try:
        cfg = RobustConfig(
            lambda_provider=_scaling_matrix(merged.get("lambda"), "lambda"),
            omega_provider=_scaling_matrix(merged.get("omega"), "omega"),
            stf_enabled=bool(merged["stf_enabled"]),
            rho=float(merged.get("rho", DEFAULT_RHO)),
            weight=WeightFnConfig(merged["weight"], float(merged.get("c", DEFAULT_IMQ_C))),
            stf_mode=merged.get("stf_mode", "one-shot"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"filter {d['name']!r}: {exc}") from exc
    return FilterSpec(d["name"], cfg, preset)


def _scenario_from_dict(d: dict) -> ScenarioConfig:
    _check_keys(d, _SCENARIO_KEYS, "scenario")
    kw = {k: v for k, v in d.items() if k not in ("garch", "mixture", "impulses", "R")}
    try:
        if "garch" in d:
            _check_keys(d["garch"], {"omega0", "alpha", "beta", "sigma0_sq"}, "scenario.garch")
            kw["garch"] = GarchParams(**{k: float(v) for k, v in d["garch"].items()})
        if "mixture" in d:
            _check_keys(d["mixture"], {"p_outlier", "scale"}, "scenario.mixture")
            kw["mixture"] = MixtureNoiseParams(**{k: float(v) for k, v in d["mixture"].items()})
        if "R" in d:
            kw["R"] = tuple(tuple(float(v) for v in row) for row in d["R"])
        if "impulses" in d:
            kw["impulses"] = tuple(Impulse(int(i["t"]), tuple(float(v) for v in i["delta"])) for i in d["impulses"])
        for k in ("dt", "pos_noise_var", "init_var"):
            if k in kw:
                kw[k] = float(kw[k])
        for k in ("horizon", "seed"):
            if k in kw:
                if isinstance(kw[k], bool) or not isinstance(kw[k], int):
                    raise ValueError(f"{k} must be an integer")
        return ScenarioConfig(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError, np.linalg.LinAlgError) as exc:
        raise ConfigError(f"scenario: {exc}") from exc


def config_from_dict(d: dict) -> ExperimentConfig:
    _check_keys(d, _TOP_KEYS, "config")
    kw = {}
    if "scenario" in d:
        kw["scenario"] = _scenario_from_dict(d["scenario"])
    if "filters" in d:
        if not isinstance(d["filters"], list) or not d["filters"]:
            raise ConfigError("filters must be a non-empty list")
        kw["filters"] = tuple(_filter_from_dict(f) for f in d["filters"])
    for key, conv in (("n_replicas", int), ("emit_plots", bool), ("tail_q", float), ("jobs", int)):
        if key in d:
            if key in ("n_replicas", "jobs") and (isinstance(d[key], bool) or not isinstance(d[key], int)):
                raise ConfigError(f"{key} must be an integer")
            kw[key] = conv(d[key])
    if "output_dir" in d:
        kw["output_dir"] = Path(d["output_dir"])
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
        data = json.loads(text)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigParseError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(data)


def default_config_dict() -> dict:
    s = ScenarioConfig()
    return {
        "scenario": {
            "dt": s.dt,
            "horizon": s.horizon,
            "pos_noise_var": s.pos_noise_var,
            "garch": {"omega0": s.garch.omega0, "alpha": s.garch.alpha,
                      "beta": s.garch.beta, "sigma0_sq": s.garch.sigma0_sq},
            "mixture": {"p_outlier": s.mixture.p_outlier, "scale": s.mixture.scale},
            "R": [list(row) for row in s.R],
            "seed": s.seed,
            "init_var": s.init_var,
            "impulses": [],
        },
        "filters": [{"name": n, "preset": n} for n in PRESETS],
        "n_replicas": 20,
        "output_dir": "results",
        "emit_plots": True,
        "tail_q": DEFAULT_TAIL_Q,
        "jobs": 1,
    }


_SCHEMA_ROWS = (
    ("scenario.dt", "float > 0", "1.0", "s", "sampling interval"),
    ("scenario.horizon", "int >= 1", "1000", "steps", "time steps T per replica"),
    ("scenario.pos_noise_var", "float > 0", "0.01", "m^2", "process-noise variance on x and y"),
    ("scenario.garch.omega0", "float > 0", "0.1", "(m/s)^2", "GARCH(1,1) baseline variance"),
    ("scenario.garch.alpha", "float >= 0", "0.3", "-", "GARCH shock coefficient"),
    ("scenario.garch.beta", "float >= 0", "0.6", "-", "GARCH persistence; alpha + beta < 1"),
    ("scenario.garch.sigma0_sq", "float > 0", "1.0", "(m/s)^2", "initial velocity variance"),
    ("scenario.mixture.p_outlier", "float in [0,1]", "0.05", "-", "probability a measurement is an outlier"),
    ("scenario.mixture.scale", "float >= 1", "10.0", "-", "outlier std multiplier"),
    ("scenario.R", "2x2 PD matrix", "[[1,0],[0,1]]", "m^2", "nominal measurement covariance"),
    ("scenario.seed", "uint64", "0", "-", "base seed; replica seeds derive from it"),
    ("scenario.init_var", "float > 0", "1.0", "mixed", "initial belief variance (state starts at 0)"),
    ("scenario.impulses", "list of {t, delta[4]}", "[]", "state units", "optional state jumps (off by default)"),
    ("filters[].name", "str, unique", "-", "-", "label used in outputs"),
    ("filters[].preset", "kf | wolf | rolf", "-", "-", "starting values; explicit keys override"),
    ("filters[].weight", "constant-one | imq", "imq", "-", "measurement weighting function"),
    ("filters[].c", "float > 0", f"{DEFAULT_IMQ_C!r}", "Mahalanobis", "IMQ soft threshold (weight 0.7 at chi2_2 99%)"),
    ("filters[].stf_enabled", "bool", "true", "-", "strong-tracking fading factor on/off"),
    ("filters[].rho", "float in (0,1)", f"{DEFAULT_RHO!r}", "-", "fading-factor smoothing"),
    ("filters[].stf_mode", "one-shot | recursive", "one-shot", "-", "one-shot or recursive innovation covariance"),
    ("filters[].lambda", "scalar or 4x4", "identity", "-", "propagated-covariance scaling"),
    ("filters[].omega", "scalar or 4x4", "identity", "-", "process-noise scaling"),
    ("n_replicas", "int >= 1", "20", "-", "Monte Carlo replicas"),
    ("output_dir", "path", "results", "-", "where outputs go"),
    ("emit_plots", "bool", "true", "-", "write SVG figures"),
    ("tail_q", "float in (0,1]", "0.05", "-", "tail fraction for the top-q mean loss"),
    ("jobs", "int >= 1", "1", "-", "worker processes for replicas"),
)


def schema_text() -> str:
    """Human-readable config schema followed by the default config as JSON."""
    widths = [max(len(r[i]) for r in _SCHEMA_ROWS) for i in range(4)]
    lines = ["Experiment config (single JSON document)", ""]
    header = ("field", "type", "default", "unit")
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)) + "  description")
    for row in _SCHEMA_ROWS:
        lines.append("  ".join(v.ljust(w) for v, w in zip(row[:4], widths)) + "  " + row[4])
    lines += ["", "Default configuration:", json.dumps(default_config_dict(), indent=2)]
    return "\n".join(lines) + "\n"


def parse_schema_defaults(text: str) -> dict:
    return json.loads(text.split("Default configuration:", 1)[1])


# --- running -----------------------------------------------------------------

def evaluate_filter(scenario: Scenario, scenario_cfg: ScenarioConfig, spec: FilterSpec,
                    seed: int, tail_q: float = DEFAULT_TAIL_Q) -> RunResult:
    model = nominal_model(scenario_cfg)
    traces = filter_run(model, scenario.trajectory.measurements, spec.config)
    est = np.array([s.updated.mean for s in traces]).reshape(-1, 4)
    losses = trajectory_losses(est, scenario.trajectory.states)
    return RunResult.from_losses(
        spec.name, seed, losses,
        [s.weight for s in traces], [s.fading_factor for s in traces], tail_q,
    )


@dataclass(frozen=True)
class ReplicaOutcome:
    replica: int
    seed: int
    scenario: Scenario
    results: tuple[RunResult, ...]


def run_replica(scenario_cfg: ScenarioConfig, filters: Sequence[FilterSpec], replica: int,
                tail_q: float = DEFAULT_TAIL_Q) -> ReplicaOutcome:
    seed = derive_run_seed(scenario_cfg.seed, replica)
    cfg = replace(scenario_cfg, seed=seed)
    scenario = generate_scenario(cfg)
    results = tuple(evaluate_filter(scenario, cfg, f, seed, tail_q) for f in filters)
    return ReplicaOutcome(replica, seed, scenario, results)


def run_replicas(scenario_cfg: ScenarioConfig, filters: Sequence[FilterSpec], n_replicas: int,
                 tail_q: float = DEFAULT_TAIL_Q, jobs: int = 1) -> list[ReplicaOutcome]:
    """Run replicas ``0..n_replicas-1``; output order is by replica index."""
    idx = range(n_replicas)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_replica, scenario_cfg, tuple(filters), r, tail_q) for r in idx]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = [run_replica(scenario_cfg, filters, r, tail_q) for r in idx]
    return sorted(outcomes, key=lambda o: o.replica)


def _fmt(v: float) -> str:
    return repr(float(v))


def write_per_step_csv(path, outcomes: Sequence[ReplicaOutcome]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for o in outcomes:
            ordered = sorted(o.results, key=lambda r: r.filter_name)
            cums = [r.cumulative_loss for r in ordered]
            flags = o.scenario.outlier_flags
            for t in range(flags.shape[0]):
                for r, cum in zip(ordered, cums):
                    w.writerow([
                        o.replica, t, r.filter_name, _fmt(r.per_step_loss[t]),
                        _fmt(r.weights[t]), _fmt(r.fading_factors[t]), int(flags[t]), _fmt(cum[t]),
                    ])


def build_summary(config: ExperimentConfig, outcomes: Sequence[ReplicaOutcome]) -> dict:
    results = [r for o in outcomes for r in o.results]
    summary = aggregate_runs(results)
    names = [f.name for f in config.filters]
    wins = []
    for a in names:
        for b in names:
            if a != b:
                rate, n = win_rate(results, a, b, "tail_mean")
                wins.append({"challenger": a, "baseline": b, "metric": "tail_mean", "value": rate, "n_matched": n})

    claims = {"note": CLAIM_NOTE, "checks": []}
    if {"rolf", "kf"} <= set(names):
        r, k = summary["rolf"]["tail_mean"]["median"], summary["kf"]["tail_mean"]["median"]
        claims["checks"].append({
            "name": "rolf_median_tail_below_kf", "rolf": r, "kf": k, "passed": bool(r < k),
        })
    if {"rolf", "wolf"} <= set(names):
        rate, n = win_rate(results, "rolf", "wolf", "tail_mean")
        claims["checks"].append({
            "name": "rolf_beats_wolf_tail_win_rate", "value": rate, "n_matched": n,
            "threshold": WIN_RATE_THRESHOLD, "passed": bool(rate >= WIN_RATE_THRESHOLD),
        })

    checksum = hashlib.sha256()
    replicas = []
    for o in outcomes:
        meas = np.ascontiguousarray(o.scenario.trajectory.measurements, dtype="<f8").tobytes()
        checksum.update(meas)
        replicas.append({"replica": o.replica, "seed": o.seed,
                         "measurement_sha256": hashlib.sha256(meas).hexdigest()})
    return {
        "n_replicas": len(outcomes),
        "base_seed": config.scenario.seed,
        "tail_q": config.tail_q,
        "filters": names,
        "scenario_checksum": checksum.hexdigest(),
        "replicas": replicas,
        "records": summary_records(summary),
        "win_rates": wins,
        "claims": claims,
    }


@dataclass
class ExperimentOutput:
    csv_path: Path
    summary_path: Path
    plot_paths: list
    summary: dict
    outcomes: list


def run_experiment(config: ExperimentConfig) -> ExperimentOutput:
    """Run all replicas and write CSV, JSON and (optionally) SVG outputs."""
    out_dir = Path(config.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if not os.access(out_dir, os.W_OK):
            raise PermissionError(f"{out_dir} is not writable")
    except OSError as exc:
        raise OSError(f"output directory {out_dir} is not usable: {exc}") from exc

    log.info("running %d replicas x %d filters", config.n_replicas, len(config.filters))
    outcomes = run_replicas(config.scenario, config.filters, config.n_replicas, config.tail_q, config.jobs)
    summary = build_summary(config, outcomes)

    csv_path = out_dir / CSV_NAME
    summary_path = out_dir / SUMMARY_NAME
    write_per_step_csv(csv_path, outcomes)
    with open(summary_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")

    plots = []
    if config.emit_plots:
        from .plots import write_plots

        plots = write_plots(out_dir, outcomes, summary, config.tail_q)
    return ExperimentOutput(csv_path, summary_path, plots, summary, outcomes)
