"""Quantitative comparison of phase-space densities and trajectories.

The density metric is a half-L1 distance after box-averaging both grids
to a common coarse cell, the smallest scale at which the density-level
transition is meaningful; Wigner negativity serves as the interference
proxy; the trajectory noise metric measures increments of the observed
mean position against the deterministic flow prediction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AxisMismatch, InsufficientSamples
from .gridio import atomic_write_text, format_float
from .model import HamiltonianSpec
from .qstate import WignerGrid


@dataclass
class ComparisonSeries:
    times: np.ndarray
    l1_distance: np.ndarray
    negativity: np.ndarray
    noise_metric: np.ndarray

    CSV_COLUMNS = ("t", "l1_distance", "negativity", "noise_metric")

    def to_csv(self) -> str:
        lines = [",".join(self.CSV_COLUMNS)]
        for row in zip(self.times, self.l1_distance, self.negativity,
                       self.noise_metric):
            lines.append(",".join(format_float(v) for v in row))
        lines.append("")
        return "\n".join(lines)

    def write_csv(self, path: str) -> None:
        atomic_write_text(path, self.to_csv())


def coarse_grain(grid: WignerGrid, coarse_cells: int) -> WignerGrid:
    """Box-average onto coarse_cells x coarse_cells; cell counts must
    divide the grid shape."""
    fx, rx = divmod(grid.n_x, coarse_cells)
    fp, rp = divmod(grid.n_p, coarse_cells)
    if rx or rp or fx == 0 or fp == 0:
        raise ValueError(
            f"coarse_cells={coarse_cells} must divide the grid shape "
            f"({grid.n_x}, {grid.n_p})"
        )
    v = grid.values.reshape(coarse_cells, fx, coarse_cells, fp).mean(axis=(1, 3))
    return WignerGrid(
        values=v,
        x0=grid.x0 + (fx - 1) * grid.dx / 2.0, dx=grid.dx * fx,
        p0=grid.p0 + (fp - 1) * grid.dp / 2.0, dp=grid.dp * fp,
    )


def density_distance(W: WignerGrid, P: WignerGrid,
                     coarse_cells: int | None = None) -> float:
    """Half-L1 distance between two normalized phase-space densities,
    optionally after box-averaging both onto a coarse grid. Zero for
    identical inputs, one for disjoint probability densities."""
    if not W.same_axes(P, tol=1e-9):
        raise AxisMismatch("density grids do not share axes")
    if coarse_cells is not None:
        W = coarse_grain(W, coarse_cells)
        P = coarse_grain(P, coarse_cells)
    return float(0.5 * np.abs(W.values - P.values).sum() * W.cell_area)


def negativity(W: WignerGrid) -> float:
    """Integrated absolute mass of the negative part, Int (|W| - W)/2."""
    v = W.values
    return float(np.where(v < 0.0, -v, 0.0).sum() * W.cell_area)


def trajectory_noise_metric(record, spec: HamiltonianSpec, window: int = 50):
    """Windowed noise metric of an observed trajectory.

    Per recorded increment the deterministic prediction is the trapezoid
    (p_i + p_{i+1})/(2m) * dt; each window reports
    RMS(residual) / RMS(prediction). Values near zero indicate smooth
    classical motion, order-one values a noisy centroid.

    Returns (window centers, metric array).

    Raises InsufficientSamples when a window would hold fewer than 10
    increments.
    """
    if window < 10:
        raise InsufficientSamples("window must hold at least 10 points")
    t = record.times
    if t.size < window + 1:
        raise InsufficientSamples(
            f"record holds {t.size} points; need at least {window + 1}"
        )
    dt = np.diff(t)
    if np.abs(dt - dt[0]).max() > 1e-9 * max(dt[0], 1e-300):
        raise ValueError("record must be sampled at uniform cadence")
    pred = 0.5 * (record.mean_p[:-1] + record.mean_p[1:]) / spec.m * dt
    resid = np.diff(record.mean_x) - pred

    n_windows = resid.size // window
    centers = np.empty(n_windows)
    metric = np.empty(n_windows)
    for w in range(n_windows):
        sl = slice(w * window, (w + 1) * window)
        centers[w] = 0.5 * (t[sl.start] + t[sl.stop])
        denom = np.sqrt(np.mean(pred[sl] ** 2))
        metric[w] = np.sqrt(np.mean(resid[sl] ** 2)) / denom
    return centers, metric


def overall_noise_metric(record, spec: HamiltonianSpec) -> float:
    """Pooled (single-window) noise metric over the whole record."""
    t = record.times
    if t.size < 11:
        raise InsufficientSamples("record too short for a pooled metric")
    dt = np.diff(t)
    pred = 0.5 * (record.mean_p[:-1] + record.mean_p[1:]) / spec.m * dt
    resid = np.diff(record.mean_x) - pred
    return float(np.sqrt(np.mean(resid**2)) / np.sqrt(np.mean(pred**2)))
