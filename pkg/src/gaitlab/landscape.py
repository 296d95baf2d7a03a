"""Gaussian-mask interpolation of per-robot MBF over a plane of two body traits."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

DEFAULT_SIGMA = 0.1
DEFAULT_RESOLUTION = 101


@dataclass(frozen=True)
class LandscapePoint:
    x: float
    y: float
    value: float
    label: str = ""


@dataclass
class LandscapeGrid:
    axes: tuple[str, str]
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray  # shape (len(ys), len(xs))
    sigma: float
    points: list[LandscapePoint]

    @property
    def bounds(self) -> tuple[float, float]:
        return float(self.values.min()), float(self.values.max())


def gaussian_mask(x, y, point: LandscapePoint, sigma: float = DEFAULT_SIGMA):
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    r2 = (np.asarray(x) - point.x) ** 2 + (np.asarray(y) - point.y) ** 2
    return np.exp(-r2 / (2 * sigma * sigma)) / (2 * math.pi * sigma * sigma)


def interpolate(
    points: Sequence[LandscapePoint],
    resolution: int = DEFAULT_RESOLUTION,
    sigma: float = DEFAULT_SIGMA,
    axes: tuple[str, str] = ("num_joints", "symmetry"),
) -> LandscapeGrid:
    """Weighted average of point values on a uniform grid over [0, 1]^2.

    Cells where every weight underflows take the value of the nearest point.
    """
    if not points:
        raise ValueError("need at least one point")
    xs = np.linspace(0.0, 1.0, resolution)
    ys = np.linspace(0.0, 1.0, resolution)
    gx, gy = np.meshgrid(xs, ys)
    num = np.zeros_like(gx)
    den = np.zeros_like(gx)
    for p in points:
        w = gaussian_mask(gx, gy, p, sigma)
        num += w * p.value
        den += w
    with np.errstate(invalid="ignore", divide="ignore"):
        values = num / den
    bad = ~(den > 0) | ~np.isfinite(values)
    if bad.any():
        px = np.array([p.x for p in points])
        py = np.array([p.y for p in points])
        pv = np.array([p.value for p in points])
        d2 = (gx[bad][:, None] - px) ** 2 + (gy[bad][:, None] - py) ** 2
        values[bad] = pv[np.argmin(d2, axis=1)]
    # guard the convex-combination bound against rounding
    lo, hi = min(p.value for p in points), max(p.value for p in points)
    values = np.clip(values, lo, hi)
    return LandscapeGrid(tuple(axes), xs, ys, values, sigma, list(points))


def export_landscape(grid: LandscapeGrid, path: str | Path) -> tuple[Path, Path]:
    """Write ``<path>.csv`` (x, y, value rows) and ``<path>.json`` (header)."""
    path = Path(path)
    csv_path = path.with_suffix(".csv")
    json_path = path.with_suffix(".json")
    with open(csv_path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["x", "y", "value"])
        for j, y in enumerate(grid.ys):
            for i, x in enumerate(grid.xs):
                wr.writerow([repr(float(x)), repr(float(y)), repr(float(grid.values[j, i]))])
    lo, hi = grid.bounds
    header = {
        "axes": {"x": grid.axes[0], "y": grid.axes[1]},
        "sigma_p": grid.sigma,
        "resolution": [len(grid.xs), len(grid.ys)],
        "domain": [[0.0, 1.0], [0.0, 1.0]],
        "min": lo,
        "max": hi,
        "points": [{"label": p.label, "x": p.x, "y": p.y, "value": p.value} for p in grid.points],
    }
    json_path.write_text(json.dumps(header, indent=1) + "\n")
    return csv_path, json_path
