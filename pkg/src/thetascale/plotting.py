"""SVG line plots for CLI output.

Figures are 800 x 600 px and byte-for-byte reproducible: the SVG id salt is
fixed, text stays as text, and no date is stamped into the metadata.
"""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

from matplotlib.backends.backend_svg import FigureCanvasSVG  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

__all__ = ["line_plot"]

_RC = {
    "svg.hashsalt": "thetascale",
    "svg.fonttype": "none",
    "path.simplify": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 11,
}


def line_plot(path: str, series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
              xlabel: str = "", ylabel: str = "", title: str = "") -> None:
    """Write one or more ``(label, x, y)`` polylines to an SVG file."""
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(800 / 72, 600 / 72), dpi=72)
        FigureCanvasSVG(fig)
        ax = fig.add_subplot(1, 1, 1)
        for label, x, y in series:
            ax.plot(list(x), list(y), label=label, linewidth=1.5)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if any(label for label, _, _ in series):
            ax.legend(loc="best")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
