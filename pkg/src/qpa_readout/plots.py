"""Static vector-graphics rendering of already-exported CSV tables.

The plotters re-read the CSV and draw it; no physics happens here. SVG
output carries the manifest hash in its metadata.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import ConfigError  # noqa: E402


def _read_csv(path: Path) -> tuple[list[str], list[dict]]:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        if reader.fieldnames is None or not rows:
            raise ConfigError(f"CSV {path} is empty")
        return list(reader.fieldnames), rows


def _column(rows: list[dict], name: str) -> np.ndarray:
    try:
        return np.array([float(r[name]) for r in rows])
    except KeyError as exc:
        raise ConfigError(f"CSV has no column named '{name}'") from exc


def plot_lines(csv_path: Path, out_path: Path, x: str, y: str,
               group: str | None = None, manifest_hash: str = "") -> None:
    """Line plot of y(x), one line per distinct value of the group column."""
    _, rows = _read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if group is None:
        ax.plot(_column(rows, x), _column(rows, y), lw=1.5)
    else:
        keys = sorted({r[group] for r in rows}, key=float)
        for key in keys:
            sub = [r for r in rows if r[group] == key]
            ax.plot(_column(sub, x), _column(sub, y), lw=1.2,
                    label=f"{group}={float(key):g}")
        ax.legend(fontsize=8)
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, format="svg",
                metadata={"Description": f"manifest_hash={manifest_hash}"})
    plt.close(fig)


def plot_heatmap(csv_path: Path, out_path: Path, x: str, y: str, z: str,
                 manifest_hash: str = "") -> None:
    """Heatmap of z over the (x, y) grid of a long-format sweep CSV."""
    _, rows = _read_csv(csv_path)
    xv = _column(rows, x)
    yv = _column(rows, y)
    zv = _column(rows, z)
    xs = np.unique(xv)
    ys = np.unique(yv)
    grid = np.full((ys.size, xs.size), np.nan)
    xi = np.searchsorted(xs, xv)
    yi = np.searchsorted(ys, yv)
    grid[yi, xi] = zv
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    mesh = ax.pcolormesh(xs, ys, grid, shading="nearest")
    fig.colorbar(mesh, ax=ax, label=z)
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    fig.tight_layout()
    fig.savefig(out_path, format="svg",
                metadata={"Description": f"manifest_hash={manifest_hash}"})
    plt.close(fig)
