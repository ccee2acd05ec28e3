"""Line charts written as SVG next to the run reports."""
import logging

import matplotlib
matplotlib.use('Agg')

import numpy as np

from matplotlib import pyplot as plt
from matplotlib.figure import Figure
from pathlib import Path

logger = logging.getLogger(__name__)


def line_chart(series: dict[str, tuple], title: str, xlabel: str, ylabel: str,
               log_x: bool = False, log_y: bool = False) -> Figure:
    """series maps a label to (xs, ys). Non-positive values are dropped on log axes."""
    fig, ax = plt.subplots(figsize=(8, 5))
    for label, (xs, ys) in series.items():
        xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
        keep = np.isfinite(xs) & np.isfinite(ys)
        if log_x:
            keep &= xs > 0
        if log_y:
            keep &= ys > 0
        ax.plot(xs[keep], ys[keep], marker='o' if keep.sum() < 20 else None, label=label)
    if log_x:
        ax.set_xscale('log')
    if log_y:
        ax.set_yscale('log')
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True)
    ax.legend()
    return fig


def write_svg(path, fig: Figure) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format='svg', bbox_inches='tight')
    plt.close(fig)
    logger.info(f"Wrote {path}.")
    return path
