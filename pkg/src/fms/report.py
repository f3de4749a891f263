"""Figure rendering for the benchmark CLI.

Every report the CLI writes as delimited text also gets a rendered figure
next to it: Gantt charts (machines on top, AGVs below, tool transporters
at the bottom, grey blocks for deadheading), the six training curves, and
makespan and runtime comparison charts.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.patches import Patch

from .trace import (KIND_AGV, KIND_MACHINE, KIND_TT, LEG_DEADHEAD,
                    ScheduleTrace)

DEADHEAD_COLOR = "0.65"


def _job_color(job: int):
    cmap = plt.get_cmap("tab20")
    return cmap(job % 20)


def _lane_axis(ax, recs, n_rows, row_label):
    for r in recs:
        y = r.rid
        if r.leg == LEG_DEADHEAD:
            color = DEADHEAD_COLOR
        else:
            color = _job_color(r.job)
        ax.broken_barh([(r.start, r.end - r.start)], (y + 0.1, 0.8),
                       facecolors=color, edgecolor="black", linewidth=0.3)
        if r.leg != LEG_DEADHEAD and r.end - r.start > 0:
            ax.text((r.start + r.end) / 2, y + 0.5, str(r.op + 1),
                    ha="center", va="center", fontsize=6)
    ax.set_yticks([i + 0.5 for i in range(n_rows)])
    ax.set_yticklabels([f"{row_label} {i}" for i in range(n_rows)],
                       fontsize=7)
    ax.set_ylim(0, n_rows)
    ax.invert_yaxis()
    ax.grid(axis="x", linewidth=0.3, alpha=0.5)


def render_gantt(trace: ScheduleTrace, path, title: str = ""):
    """Stacked machine / AGV / tool-transporter allocation chart."""
    groups = {KIND_MACHINE: [], KIND_AGV: [], KIND_TT: []}
    for r in trace.records:
        groups[r.kind].append(r)
    lanes = [(kind, recs) for kind, recs in groups.items() if recs]
    labels = {KIND_MACHINE: "M", KIND_AGV: "AGV", KIND_TT: "TT"}
    heights = []
    for kind, recs in lanes:
        heights.append(max(1, 1 + max(r.rid for r in recs)))
    fig, axes = plt.subplots(
        len(lanes), 1, sharex=True,
        figsize=(11, 1.0 + 0.35 * sum(heights)),
        gridspec_kw={"height_ratios": heights})
    if len(lanes) == 1:
        axes = [axes]
    jobs = sorted({r.job for r in trace.records if r.job >= 0})
    for ax, (kind, recs), rows in zip(axes, lanes, heights):
        _lane_axis(ax, recs, rows, labels[kind])
    axes[-1].set_xlabel("time")
    handles = [Patch(facecolor=_job_color(j), label=f"job {j}")
               for j in jobs[:12]]
    handles.append(Patch(facecolor=DEADHEAD_COLOR, label="deadheading"))
    axes[0].legend(handles=handles, ncol=min(7, len(handles)),
                   fontsize=6, loc="upper right")
    if title:
        axes[0].set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_training(log, path, title: str = ""):
    """The six training curves, one panel each."""
    panels = [
        ("loss", "combined loss"),
        ("mean_reward", "episode mean reward"),
        ("approx_kl", "approx KL"),
        ("entropy", "entropy"),
        ("value_loss", "value loss"),
        ("policy_loss", "policy loss"),
    ]
    data = log.as_dict() if hasattr(log, "as_dict") else dict(log)
    fig, axes = plt.subplots(2, 3, figsize=(12, 6))
    steps = data["timesteps"]
    for ax, (key, label) in zip(axes.flat, panels):
        ax.plot(steps, data[key], linewidth=1.0)
        ax.set_title(label, fontsize=9)
        ax.grid(linewidth=0.3, alpha=0.5)
    for ax in axes[1]:
        ax.set_xlabel("steps")
    if title:
        fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_comparison(rows, path, title: str = ""):
    """Makespan lines plus log-scale runtime bars per solver.

    rows: list of dicts with instance, solver, makespan, seconds.
    """
    solvers = sorted({r["solver"] for r in rows})
    instances = sorted({r["instance"] for r in rows})
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(10, 7), sharex=True)
    x = range(len(instances))
    for solver in solvers:
        by_inst = {r["instance"]: r for r in rows if r["solver"] == solver}
        ys = [by_inst[i]["makespan"] if i in by_inst else None
              for i in instances]
        ax1.plot(x, ys, marker="o", label=solver, linewidth=1.2)
    ax1.set_ylabel("makespan")
    ax1.legend(fontsize=7)
    ax1.grid(linewidth=0.3, alpha=0.5)
    width = 0.8 / max(1, len(solvers))
    for si, solver in enumerate(solvers):
        by_inst = {r["instance"]: r for r in rows if r["solver"] == solver}
        ys = [by_inst[i]["seconds"] if i in by_inst else 0.0
              for i in instances]
        ax2.bar([xi + si * width for xi in x], ys, width=width, label=solver)
    ax2.set_yscale("log")
    ax2.set_ylabel("seconds (log)")
    ax2.set_xticks(list(x))
    ax2.set_xticklabels(instances, rotation=45, ha="right", fontsize=7)
    ax2.grid(axis="y", linewidth=0.3, alpha=0.5)
    if title:
        fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_dynamic(checkpoints, path, title: str = ""):
    """Cumulative makespan and compute time over sequential partitions.

    checkpoints: {solver: [(partition, cum_makespan, cum_seconds), ...]}
    """
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
    for solver, rows in checkpoints.items():
        parts = [r[0] for r in rows]
        ax1.bar([p + 0.4 * (solver != sorted(checkpoints)[0]) for p in parts],
                [r[1] for r in rows], width=0.4, label=solver)
        ax2.plot(parts, [r[2] for r in rows], marker="o", label=solver)
    ax1.set_xlabel("partition")
    ax1.set_ylabel("cumulative makespan")
    ax1.legend(fontsize=8)
    ax2.set_xlabel("partition")
    ax2.set_ylabel("cumulative seconds")
    ax2.legend(fontsize=8)
    ax2.grid(linewidth=0.3, alpha=0.5)
    if title:
        fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_ablation(pairs, path, with_label: str, without_label: str,
                    title: str = ""):
    """Paired bars per instance for an on/off component comparison."""
    names = [p[0] for p in pairs]
    with_vals = [p[1] for p in pairs]
    without_vals = [p[2] for p in pairs]
    x = range(len(names))
    fig, ax = plt.subplots(figsize=(9, 4))
    ax.bar([xi - 0.2 for xi in x], with_vals, width=0.4, label=with_label)
    ax.bar([xi + 0.2 for xi in x], without_vals, width=0.4,
           label=without_label)
    ax.set_xticks(list(x))
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("makespan")
    ax.legend(fontsize=8)
    ax.grid(axis="y", linewidth=0.3, alpha=0.5)
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
