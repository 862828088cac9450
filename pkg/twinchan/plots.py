"""SVG figures written next to CSV outputs. Rendering only; nothing is displayed."""
import logging
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")  # batch output only
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

logger = logging.getLogger(__name__)


def svg_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".svg")


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    # fixed metadata keeps reruns byte-identical
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info("Plot written: %s", path)
    return path


def plot_series(series: Sequence, path, title: str = "", ylabel: str = "", shade: Optional[tuple] = None) -> Path:
    """Line plot of MetricSeries against time; `shade` = (start_s, stop_s) marks an interval."""
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for s in series:
        ax.plot(s.times, s.values, label=s.label or None)
    if shade is not None:
        ax.axvspan(shade[0], shade[1], color="grey", alpha=0.2)
    ax.set_xlabel("time [s]")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if any(s.label for s in series):
        ax.legend()
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def plot_cir(h_mag: np.ndarray, sample_rate: float, path, title: str = "") -> Path:
    """|h| in dB against delay in microseconds."""
    mag = np.asarray(h_mag, dtype=np.float64)
    delay_us = np.arange(mag.size) / sample_rate * 1e6
    with np.errstate(divide="ignore"):
        db = 20 * np.log10(np.maximum(mag, 1e-12))
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.plot(delay_us, db)
    ax.set_xlabel("delay [µs]")
    ax.set_ylabel("|h| [dB]")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def plot_matrix(node_ids: Sequence[int], matrix: np.ndarray, path, title: str = "", label: str = "loss [dB]") -> Path:
    """Heat map with transmitters on rows and receivers on columns."""
    data = np.ma.masked_invalid(np.asarray(matrix, dtype=np.float64))
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    im = ax.imshow(data, cmap="viridis")
    ax.set_xticks(range(len(node_ids)))
    ax.set_xticklabels(node_ids)
    ax.set_yticks(range(len(node_ids)))
    ax.set_yticklabels(node_ids)
    ax.set_xlabel("rx node")
    ax.set_ylabel("tx node")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, label=label)
    return _save(fig, path)
