"""
Optional SVG overlays rendered from result tables (matplotlib, Agg backend).
"""

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from qthermo.config import get_settings  # noqa: E402

logger = logging.getLogger(__name__)


def overlay_plot(
    path: Path,
    frames: dict[str, pd.DataFrame],
    x: str,
    y: str,
    *,
    title: str = "",
    logy: bool = False,
) -> Path:
    """One curve per labelled frame; the file suffix follows ``Settings.plot_format``."""
    path = Path(path).with_suffix("." + get_settings().plot_format)
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for label, frame in frames.items():
        ax.plot(frame[x], frame[y], label=label, linewidth=1.2)
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    if logy:
        ax.set_yscale("log")
    if title:
        ax.set_title(title)
    if len(frames) > 1:
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    logger.info("plot written  path=%s  curves=%d", path, len(frames))
    return path
