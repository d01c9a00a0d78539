"""
Figures written by the pipeline (PNG, Agg backend).
"""
import logging
from pathlib import Path
from typing import Dict, Union

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger(__name__)

DPI = 100
# Fixed metadata keeps repeated renders byte-identical.
PNG_METADATA = {'Software': None}


def _save(fig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI, metadata=PNG_METADATA)
    plt.close(fig)
    logger.info(f"Wrote {path}")
    return path


def plot_error_curves(curves: pd.DataFrame, path: Union[str, Path]) -> Path:
    """``curves`` has columns model, threshold, fraction."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for model, df in curves.groupby('model', sort=True):
        ax.plot(df['threshold'], df['fraction'], label=str(model))
    ax.set_xlabel('Error (% of inter-ocular distance)')
    ax.set_ylabel('Fraction of faces')
    ax.set_ylim(0.0, 1.0)
    ax.grid(True, alpha=0.3)
    ax.legend(loc='lower right')
    return _save(fig, path)


def plot_layer_variance(frame: pd.DataFrame, key: str, path: Union[str, Path], ylabel: str) -> Path:
    """
    Mean variance per tap, one line per ``key`` value (landmark or attribute),
    with standard-error bars. Taps keep their order of first appearance.
    """
    taps = list(dict.fromkeys(frame['tap']))
    x = np.arange(len(taps))
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for name in dict.fromkeys(frame[key]):
        df = frame[frame[key] == name].set_index('tap').reindex(taps)
        ax.errorbar(x, df['mean_variance'], yerr=df['se'], marker='o', capsize=3, label=str(name))
    ax.set_xticks(x)
    ax.set_xticklabels(taps)
    ax.set_xlabel('Layer input')
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize='small')
    return _save(fig, path)


def plot_cluster_bars(per_cluster: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Vanilla against tweaked mean error per cluster."""
    df = per_cluster[per_cluster['count'] > 0]
    x = np.arange(len(df))
    width = 0.4
    fig, ax = plt.subplots(figsize=(max(6, 0.5 * len(df) + 2), 4.5))
    ax.bar(x - width / 2, df['vanilla_error'], width, label='vanilla')
    ax.bar(x + width / 2, df['tweaked_error'], width, label='tweaked')
    ax.set_xticks(x)
    ax.set_xticklabels([str(c) for c in df['cluster']])
    ax.set_xlabel('Cluster')
    ax.set_ylabel('Mean error (%)')
    ax.legend()
    return _save(fig, path)


def plot_sweep(sweep: pd.DataFrame, path: Union[str, Path]) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.plot(sweep['k'], sweep['mean_error'], marker='o')
    ax.set_xlabel('Number of clusters K')
    ax.set_ylabel('Mean error (%)')
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def plot_scatter(scatters: Dict[str, pd.DataFrame], path: Union[str, Path]) -> Path:
    """Ground-truth landmarks of one cluster per tap, side by side."""
    fig, axes = plt.subplots(1, max(1, len(scatters)), figsize=(4 * max(1, len(scatters)), 4), squeeze=False)
    for ax, (tap, df) in zip(axes[0], scatters.items()):
        for name in dict.fromkeys(df['landmark']):
            pts = df[df['landmark'] == name]
            ax.scatter(pts['x'], pts['y'], s=12, label=str(name))
        ax.set_xlim(0.0, 1.0)
        ax.set_ylim(1.0, 0.0)
        ax.set_aspect('equal')
        cluster = int(df['cluster'].iloc[0]) if len(df) else -1
        ax.set_title(f"{tap}: cluster {cluster}")
    axes[0][0].legend(fontsize='x-small', loc='lower left')
    return _save(fig, path)
