"""
Figures for sweep and spectrum outputs
"""

import io
import logging
from pathlib import Path
from typing import Dict, Optional, Sequence

import matplotlib
from matplotlib.figure import Figure

from taperlink.io_utils import PathLike, atomic_write_text

logger = logging.getLogger(__name__)

# fixed ids and no timestamp so repeated runs write identical files
SVG_RC = {"svg.hashsalt": "taperlink", "svg.fonttype": "none"}


def save_line_plot(
    path: PathLike,
    series: Dict[str, Sequence[Sequence[float]]],
    x_label: str = "",
    y_label: str = "",
    title: Optional[str] = None,
) -> Path:
    """
    Save labelled curves as an SVG line plot.

    Each curve is drawn in a group with id "series-<i>", in insertion order.

    Args:
        path: Destination file
        series: label -> (x values, y values)
        x_label, y_label: Axis labels
        title: Optional axes title

    Returns:
        Destination path
    """
    fig = Figure(figsize=(6.4, 4.4))
    ax = fig.add_subplot()
    for i, (label, (x, y)) in enumerate(series.items()):
        (line,) = ax.plot(x, y, linewidth=1.4, label=label)
        line.set_gid(f"series-{i}")
    ax.set_xlabel(x_label)
    ax.set_ylabel(y_label)
    if title:
        ax.set_title(title)
    if series:
        ax.legend(fontsize="x-small", ncol=2, frameon=False)
    ax.grid(True, linewidth=0.4, alpha=0.5)
    fig.tight_layout()

    buffer = io.StringIO()
    with matplotlib.rc_context(SVG_RC):
        fig.savefig(buffer, format="svg", metadata={"Date": None})
    logger.debug("plotted %d series to %s", len(series), path)
    return atomic_write_text(path, buffer.getvalue())
