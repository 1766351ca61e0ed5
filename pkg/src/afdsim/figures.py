"""Matplotlib renderers for the report path.

Figures are written as PNG files next to the delimited report.  Styling is
kept plain: one axes per figure, step plots for per-turn series, event
scatter for traces.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

FIG_SIZE = (7.0, 3.2)
DPI = 150


def _save(fig, path: Path) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return str(path)


def fdout_timeline_figure(timelines: Dict[int, Sequence[int]], path) -> str:
    """Per-turn leader estimates of every location, as step plots."""
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    for i in sorted(timelines):
        series = timelines[i]
        ax.step(range(len(series)), series, where="post", label=f"location {i}")
    ax.set_xlabel("turn")
    ax.set_ylabel("leader estimate")
    ax.set_yticks(sorted({v for t in timelines.values() for v in t}))
    ax.legend(loc="best", fontsize=8)
    ax.set_title("leader extraction timelines")
    return _save(fig, Path(path))


_EVENT_STYLES = {
    "propose": ("tab:blue", "o"),
    "decide": ("tab:green", "s"),
    "crash": ("tab:red", "x"),
    "fd": ("tab:gray", "."),
    "fdo": ("tab:purple", "."),
}


def event_timeline_figure(events: Sequence, path, title: str = "run events") -> str:
    """Scatter of trace events by position and location."""
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    seen = set()
    for pos, e in enumerate(events):
        color, marker = _EVENT_STYLES.get(e.name, ("black", "+"))
        label = e.name if e.name not in seen else None
        seen.add(e.name)
        ax.scatter(pos, e.loc, c=color, marker=marker, s=28, label=label)
    ax.set_xlabel("event index")
    ax.set_ylabel("location")
    ax.set_yticks(sorted({e.loc for e in events}) or [1])
    if seen:
        ax.legend(loc="best", fontsize=8)
    ax.set_title(title)
    return _save(fig, Path(path))


def growth_figure(sizes: Sequence[int], gadget_metrics: Sequence, path) -> str:
    """Observation growth and the first-gadget metric per growth step."""
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    ax.plot(range(1, len(sizes) + 1), sizes, marker="o", label="|V|")
    ax.set_xlabel("growth step")
    ax.set_ylabel("vertices")
    have = [(x + 1, m) for x, m in enumerate(gadget_metrics) if m is not None]
    if have:
        ax2 = ax.twinx()
        ax2.plot([x for x, _ in have], [m for _, m in have],
                 color="tab:orange", marker="s", label="first gadget metric")
        ax2.set_ylabel("first gadget metric")
    ax.legend(loc="upper left", fontsize=8)
    ax.set_title("observation growth")
    return _save(fig, Path(path))
