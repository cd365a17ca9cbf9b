"""SVG figures: per-step loss traces and top-q tail-loss bars."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "rolf"


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def write_plots(out_dir, outcomes, summary: dict, tail_q: float) -> list[Path]:
    out_dir = Path(out_dir)
    first = outcomes[0]

    fig, ax = plt.subplots(figsize=(8, 4))
    for r in sorted(first.results, key=lambda r: r.filter_name):
        ax.plot(r.per_step_loss, lw=0.8, label=r.filter_name)
    ax.set_yscale("log")
    ax.set_xlabel("t (step)")
    ax.set_ylabel("loss (squared position error)")
    ax.set_title(f"Per-step loss, replica {first.replica}")
    ax.legend()
    fig.tight_layout()
    trace = _save(fig, out_dir / "loss_trace.svg")

    medians = {
        rec["filter"]: rec["value"]
        for rec in summary["records"]
        if rec["metric"] == "tail_mean" and rec["statistic"] == "median"
    }
    names = list(medians)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar(np.arange(len(names)), [medians[n] for n in names], tick_label=names)
    ax.set_ylabel(f"median top-{tail_q:.0%} mean loss")
    ax.set_title(f"Tail loss over {summary['n_replicas']} replicas")
    fig.tight_layout()
    bars = _save(fig, out_dir / "tail_loss.svg")
    return [trace, bars]
