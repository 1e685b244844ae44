"""Figure rendering and delimited metrics output for the report pipeline."""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.collections import LineCollection

from .net import EdgeNetwork
from .oracle import ClassGrid

_FIG_DPI = 150


def _segment_lines(net: EdgeNetwork):
    verts = net.vertex_by_id()
    lines, pairs = [], []
    for s in net.segments:
        v0, v1 = verts[s.v0], verts[s.v1]
        lines.append([(v0.x, v0.y), (v1.x, v1.y)])
        pairs.append(s.pair)
    return lines, pairs


def _pair_colours(pairs):
    ranks = {}
    for p in pairs:
        ranks.setdefault(p, len(ranks))
    cmap = plt.get_cmap("tab10")
    return [cmap(ranks[p] % 10) for p in pairs]


def render_class_grid(grid: ClassGrid, path, net: EdgeNetwork | None = None,
                      title: str | None = None):
    """Dense class labels as an image, optionally with the network overlaid."""
    x_lo, y_lo, x_hi, y_hi = grid.bounds
    fig, ax = plt.subplots(figsize=(6, 6 * (y_hi - y_lo) / (x_hi - x_lo)))
    ax.imshow(grid.labels, origin="lower", extent=(x_lo, x_hi, y_lo, y_hi),
              cmap="tab20", vmin=0, vmax=max(grid.k - 1, 1), interpolation="nearest")
    if net is not None and net.segments:
        lines, pairs = _segment_lines(net)
        ax.add_collection(LineCollection(lines, colors="black", linewidths=1.2))
        junctions = [(v.x, v.y) for v in net.vertices if v.kind == "junction"]
        if junctions:
            xs, ys = zip(*junctions)
            ax.plot(xs, ys, "o", color="white", markeredgecolor="black", markersize=5)
    ax.set_xlim(x_lo, x_hi)
    ax.set_ylim(y_lo, y_hi)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=_FIG_DPI)
    plt.close(fig)


def render_network(net: EdgeNetwork, path, title: str | None = None):
    """The extracted boundary network alone, coloured by class pair."""
    x_lo, y_lo, x_hi, y_hi = net.bounds
    fig, ax = plt.subplots(figsize=(6, 6 * (y_hi - y_lo) / (x_hi - x_lo)))
    if net.segments:
        lines, pairs = _segment_lines(net)
        ax.add_collection(
            LineCollection(lines, colors=_pair_colours(pairs), linewidths=1.5)
        )
    junctions = [(v.x, v.y) for v in net.vertices if v.kind == "junction"]
    if junctions:
        xs, ys = zip(*junctions)
        ax.plot(xs, ys, "o", color="black", markersize=4)
    ax.set_xlim(x_lo, x_hi)
    ax.set_ylim(y_lo, y_hi)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=_FIG_DPI)
    plt.close(fig)


def render_agreement(amap: np.ndarray, grid: ClassGrid, path):
    """Agreement map: green agree, red disagree, grey excluded."""
    x_lo, y_lo, x_hi, y_hi = grid.bounds
    rgb = np.empty(amap.shape + (3,))
    rgb[amap == 1] = (0.85, 0.95, 0.85)
    rgb[amap == 0] = (0.85, 0.15, 0.15)
    rgb[amap == -1] = (0.5, 0.5, 0.5)
    fig, ax = plt.subplots(figsize=(6, 6 * (y_hi - y_lo) / (x_hi - x_lo)))
    ax.imshow(rgb, origin="lower", extent=(x_lo, x_hi, y_lo, y_hi),
              interpolation="nearest")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title("region agreement")
    fig.tight_layout()
    fig.savefig(path, dpi=_FIG_DPI)
    plt.close(fig)


def write_metrics_csv(metrics: dict, path):
    """One metric per row, keys sorted for stable output."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for key in sorted(metrics):
            writer.writerow([key, metrics[key]])
