"""Static figures written next to CSV outputs."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _sibling(csv_path, suffix):
    p = Path(csv_path)
    return p.with_name(f"{p.stem}_{suffix}.png")


def plot_metrics(result, csv_path, title=None):
    """Error envelopes on a log scale; returns the written file paths."""
    fig, ax = plt.subplots(figsize=(7, 4))
    if not np.all(np.isnan(result.mu)):
        ax.semilogy(result.t, result.mu, label="max estimation error")
    ax.semilogy(result.t, result.tau, label="max tracking deviation")
    ax.semilogy(result.t, result.epsilon, label="mean tracking deviation")
    ax.set_xlabel("tick")
    ax.set_ylabel("error")
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    out = _sibling(csv_path, "errors")
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return [out]


def plot_trace(trace, scenario, csv_path):
    """Position path with target sets, and the event value with switch ticks."""
    outs = []
    fig, ax = plt.subplots(figsize=(6, 6))
    for task in scenario.tasks:
        ref = task.trajectory.states @ task.D.T
        ax.plot(ref[:, 0], ref[:, 1], "--", lw=0.8, color="grey")
        ax.add_patch(plt.Circle(task.c, task.R, fill=False, color="tab:green"))
    pos = trace.x @ scenario.tasks[0].D.T
    ax.plot(pos[:, 0], pos[:, 1], lw=1.2, color="tab:blue", label="robot")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend()
    fig.tight_layout()
    out = _sibling(csv_path, "path")
    fig.savefig(out, dpi=120)
    plt.close(fig)
    outs.append(out)

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.semilogy(trace.t, trace.f, lw=1.0, label="event value")
    for t_sw in sorted(trace.switch_times.values()):
        ax.axvline(t_sw, color="tab:red", lw=0.8, ls=":")
    ax.set_xlabel("tick")
    ax.legend()
    fig.tight_layout()
    out = _sibling(csv_path, "event")
    fig.savefig(out, dpi=120)
    plt.close(fig)
    outs.append(out)
    return outs
