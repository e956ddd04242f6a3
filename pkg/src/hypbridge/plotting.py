"""SVG rendering of experiment plots (needs matplotlib, imported lazily)."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def write_svg(plot, path: str | Path) -> None:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as e:
        raise RuntimeError("plots need matplotlib (pip install 'artifact[plots]')") from e
    # fixed ids so reruns give the same file
    matplotlib.rcParams["svg.hashsalt"] = "hypbridge"
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, x, y in plot.series:
        x = np.asarray(x, dtype=float)
        y = np.asarray([np.nan if v is None else v for v in y], dtype=float)
        ax.plot(x, y, marker="o" if x.size < 20 else None, ms=3, label=label)
    if plot.logy:
        ax.set_yscale("log")
    ax.set_title(plot.title)
    ax.set_xlabel(plot.xlabel)
    ax.set_ylabel(plot.ylabel)
    if len(plot.series) > 1:
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
