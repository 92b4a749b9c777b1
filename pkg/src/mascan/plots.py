"""Figure rendering for sweep summaries and descent traces."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

MARKERS = ("o", "s", "^", "d", "v", "P")


def sweep_figure(rows, axis_label, ylabel="average transmit power (W)",
                 logy=False):
    """One line per scheme over the sweep axis, built from summary rows."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    schemes = sorted({row["scheme"] for row in rows})
    for idx, scheme in enumerate(schemes):
        pts = [
            (row["value"], row["mean_objective"])
            for row in rows
            if row["scheme"] == scheme and row["mean_objective"] is not None
        ]
        if not pts:
            continue
        pts.sort(key=lambda p: p[0])
        xs, ys = zip(*pts)
        ax.plot(xs, ys, marker=MARKERS[idx % len(MARKERS)], label=scheme)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(axis_label)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return fig


def trace_figure(trace, title="descent trace"):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(range(len(trace)), trace, marker="o")
    ax.set_xlabel("outer round")
    ax.set_ylabel("average transmit power (W)")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def save_figure(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
