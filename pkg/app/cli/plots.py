"""
SVG-графики: метрики, кривые обучения, эмбеддинги до/после PGG, треки
"""
import io
import logging
import os
from typing import Dict, Optional, Sequence

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from ..graph.pipeline import FrameState
from ..grouping.pgg import assign_grouping_labels, gather_masked
from ..spatial.embedding import decode_sie
from ..storage.files import atomic_write

logger = logging.getLogger(__name__)


def _save(fig, path: str):
    buffer = io.StringIO()
    fig.savefig(buffer, format='svg', bbox_inches='tight')
    plt.close(fig)
    atomic_write(path, buffer.getvalue())
    logger.info(f"[IO] wrote plot {path}")


def plot_metrics(frame: pd.DataFrame, path: str):
    """AP и MOTA по группам суставов"""
    fig, ax = plt.subplots(figsize=(8, 4))
    columns = list(frame.columns)
    x = np.arange(len(columns))
    for offset, metric in ((-0.2, 'AP'), (0.2, 'MOTA')):
        if metric in frame.index:
            ax.bar(x + offset, frame.loc[metric].to_numpy(dtype=float), width=0.4, label=metric)
    ax.set_xticks(x)
    ax.set_xticklabels(columns)
    ax.set_ylim(min(0.0, float(np.nanmin(frame.loc[['AP', 'MOTA']].to_numpy(dtype=float)))), 1.05)
    ax.legend()
    ax.grid(axis='y', alpha=0.3)
    _save(fig, path)


def plot_loss_curves(curves: Dict[str, Sequence[float]], path: str):
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, losses in curves.items():
        ax.plot(np.arange(len(losses)), losses, label=label)
    ax.set_xlabel('step')
    ax.set_ylabel('loss')
    ax.set_yscale('log')
    ax.legend()
    _save(fig, path)


def plot_embeddings(state: FrameState, path: str, sigma: float = 2.0):
    """
    KE against the horizontal SIE coordinate at masked pixels, before and
    after PGG, coloured by the ground-truth person.
    """
    bundle, mask = state['bundle'], state['mask']
    before, index = gather_masked([bundle.ke, decode_sie(bundle.svf)], mask)
    after, _ = gather_masked([state['ke'], state['sie']], mask)
    labels = assign_grouping_labels(index, list(bundle.ground_truth or ()), sigma)
    colors = labels
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharex=True, sharey=True)
    for ax, x, title in ((axes[0], before, 'before PGG'), (axes[1], after, 'after PGG')):
        if x.count:
            ax.scatter(x.values[1], x.values[0], c=colors, cmap='tab10', s=6, vmin=-1, vmax=9)
        ax.set_title(title)
        ax.set_xlabel('SIE x')
    axes[0].set_ylabel('KE')
    _save(fig, path)


def plot_tracks(trajectories, path: str, title: Optional[str] = None):
    """Horizontal center of every track over time"""
    fig, ax = plt.subplots(figsize=(8, 4))
    for track in trajectories:
        times = track.times
        xs = [track.poses[t].center()[0] for t in times]
        ax.plot(times, xs, marker='.', label=f"track {track.track_id}")
    ax.set_xlabel('frame')
    ax.set_ylabel('center x')
    if title:
        ax.set_title(title)
    if trajectories:
        ax.legend(fontsize='small')
    _save(fig, path)


def plot_path(directory: str, name: str) -> str:
    os.makedirs(directory, exist_ok=True)
    return os.path.join(directory, name)
