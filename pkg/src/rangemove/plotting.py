"""Optional figures for solver traces.  Uses the non-interactive Agg backend."""

from __future__ import annotations

from pathlib import Path
from typing import Dict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .moves import SolveTrace  # noqa: E402

plt.rcParams.update({
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
})


def _elapsed(trace: SolveTrace):
    t, acc = [], 0
    for r in trace.rows:
        acc += r.ms
        t.append(acc / 1000.0)
    return t


def plot_trace(trace: SolveTrace, path) -> Path:
    """E^g and E^h per iteration (top) and fraction of changed nodes (bottom)."""
    it = [r.iteration for r in trace.rows]
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(5.0, 5.0), sharex=True)
    top.plot(it, [r.E_g for r in trace.rows], marker="o", ms=3, label="E^g")
    top.plot(it, [r.E_h for r in trace.rows], marker="s", ms=3, ls="--", label="E^h")
    top.set_ylabel("energy")
    top.legend(frameon=False)
    top.set_title(trace.solver)
    bottom.plot(it[1:], [r.changed_fraction for r in trace.rows[1:]], marker="o", ms=3, color="C2")
    bottom.set_xlabel("iteration")
    bottom.set_ylabel("changed fraction")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_comparison(traces: Dict[str, SolveTrace], path, use_time: bool = True) -> Path:
    """Energy against elapsed time (or iteration when timing is off) per solver."""
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    for name, tr in traces.items():
        xs = _elapsed(tr) if use_time else [r.iteration for r in tr.rows]
        ax.step(xs, [r.E_g for r in tr.rows], where="post", label=name)
    ax.set_xlabel("time [s]" if use_time else "iteration")
    ax.set_ylabel("E^g")
    ax.legend(frameon=False)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path


