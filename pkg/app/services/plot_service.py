"""
Plot service: static figures for the evaluation report
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

logger = logging.getLogger(__name__)


class PlotService:
    """PNG figures and JSON plot data; file names only, no timestamps"""

    @staticmethod
    def time_intensity_curves(curves: Dict[str, np.ndarray], roi: str, path: Path) -> Path:
        """One line per method label over the frame axis"""
        fig, ax = plt.subplots(figsize=(7, 4))
        for label, series in curves.items():
            ax.plot(np.arange(len(series)), series, marker="o", markersize=3, label=label)
        ax.set_xlabel("frame")
        ax.set_ylabel("mean SSoS intensity")
        ax.set_title(f"Time-intensity curve: {roi}")
        ax.legend(fontsize=7)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        fig.savefig(path, dpi=100)
        plt.close(fig)
        return path

    @staticmethod
    def mosaic(images: Dict[str, np.ndarray], title: str, path: Path) -> Path:
        """Row of SSoS images sharing one gray scale"""
        labels = list(images)
        vmax = max(float(np.max(images[k])) for k in labels) or 1.0
        fig, axes = plt.subplots(1, len(labels), figsize=(2.2 * len(labels), 2.6), squeeze=False)
        for ax, label in zip(axes[0], labels):
            ax.imshow(images[label], cmap="gray", vmin=0.0, vmax=vmax)
            ax.set_title(label, fontsize=7)
            ax.axis("off")
        fig.suptitle(title, fontsize=9)
        fig.tight_layout()
        fig.savefig(path, dpi=100)
        plt.close(fig)
        return path

    @staticmethod
    def boxplot(groups: Dict[str, Sequence[float]], ylabel: str, path: Path) -> List[Path]:
        """Box plot PNG plus its data as JSON"""
        data_path = path.with_suffix(".json")
        data_path.write_text(json.dumps({k: [float(v) for v in vals] for k, vals in groups.items()}, indent=2))
        labels = [k for k, vals in groups.items() if len(vals)]
        fig, ax = plt.subplots(figsize=(max(4, 1.1 * len(labels)), 4))
        if labels:
            ax.boxplot([list(groups[k]) for k in labels])
            ax.set_xticks(range(1, len(labels) + 1))
            ax.set_xticklabels(labels, rotation=30, fontsize=7)
        ax.set_ylabel(ylabel)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        fig.savefig(path, dpi=100)
        plt.close(fig)
        return [path, data_path]
