"""Gaze-trace analytics: gaze moments, change rate, KDE heatmaps, ECDFs and
the eye-to-display latency budget.

All functions skip samples flagged invalid.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DomainError
from .foveation import write_pgm
from .gaze import GazeTrace
from .grid import GridSpec, PixelPoint

__all__ = [
    "GazeMoment",
    "HeatmapGrid",
    "LatencyBudget",
    "gaze_moments",
    "change_rate",
    "heatmap",
    "ecdf",
    "ecdf_quantile",
    "latency_budget",
    "shift_during",
    "moment_radius_for_w",
    "default_bandwidth_px",
    "write_moments_csv",
    "write_values",
    "write_ecdf_csv",
]


@dataclass(frozen=True)
class GazeMoment:
    """A run of samples that stays inside a circle around its first sample.

    ``end_us`` is the timestamp of the sample that broke the circle, so a
    moment made of a single sample lasts one sampling interval. The final
    moment of a trace ends one nominal sampling interval after its last sample.
    """

    start_us: int
    end_us: int
    anchor: PixelPoint
    n_samples: int = 1

    @property
    def duration_us(self) -> int:
        return self.end_us - self.start_us


def moment_radius_for_w(w_px: float) -> float:
    """Circle radius used for a foveal region of width ``w_px`` (half of it)."""
    return w_px / 2


def gaze_moments(trace: GazeTrace, radius_px: float) -> list[GazeMoment]:
    if not (math.isfinite(radius_px) and radius_px > 0):
        raise DomainError(f"radius_px must be > 0, got {radius_px}")
    tr = trace.only_valid()
    n = len(tr)
    if n == 0:
        raise DomainError("trace has no valid samples")
    starts = kernels.moment_starts(tr.x_px, tr.y_px, float(radius_px) * float(radius_px))
    ts = tr.timestamp_us
    tail_end = int(ts[-1]) + tr.nominal_interval_us()
    bounds = starts.tolist() + [n]
    moments = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        end = int(ts[b]) if b < n else tail_end
        moments.append(
            GazeMoment(int(ts[a]), end, PixelPoint(float(tr.x_px[a]), float(tr.y_px[a])), b - a)
        )
    return moments


def change_rate(trace: GazeTrace) -> np.ndarray:
    """Pixel distance between consecutive valid samples over their time gap, px/s."""
    tr = trace.only_valid()
    if len(tr) < 2:
        raise DomainError("change_rate needs at least two valid samples")
    dt = np.diff(tr.timestamp_us)
    if np.any(dt <= 0):
        raise DomainError("duplicate or decreasing timestamps")
    dist = np.hypot(np.diff(tr.x_px), np.diff(tr.y_px))
    return dist / (dt / 1e6)


@dataclass(frozen=True, eq=False)
class HeatmapGrid:
    bins: np.ndarray = field(repr=False)
    bin_size_px: float
    bandwidth_px: float

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            for row in self.bins:
                fh.write(",".join(repr(float(v)) for v in row))
                fh.write("\n")

    def to_pgm(self, path) -> None:
        write_pgm(path, np.floor(255.0 * self.bins + 0.5).astype(np.int64))


def default_bandwidth_px(grid: GridSpec) -> float:
    return grid.frame_width_px / 64


def bin_centers(extent_px: int, bin_size_px: float) -> np.ndarray:
    n = max(1, math.ceil(extent_px / bin_size_px))
    return (np.arange(n, dtype=np.float64) + 0.5) * bin_size_px


def heatmap(
    trace: GazeTrace,
    grid: GridSpec,
    bin_size_px: float = 16.0,
    bandwidth_px: float | None = None,
) -> HeatmapGrid:
    """Isotropic Gaussian KDE evaluated at bin centres, scaled so the peak is 1."""
    if bandwidth_px is None:
        bandwidth_px = default_bandwidth_px(grid)
    if not (math.isfinite(bin_size_px) and bin_size_px > 0):
        raise DomainError(f"bin_size_px must be > 0, got {bin_size_px}")
    if not (math.isfinite(bandwidth_px) and bandwidth_px > 0):
        raise DomainError(f"bandwidth_px must be > 0, got {bandwidth_px}")
    tr = trace.only_valid()
    if len(tr) == 0:
        raise DomainError("heatmap of an empty trace")
    cx = bin_centers(grid.frame_width_px, bin_size_px)
    cy = bin_centers(grid.frame_height_px, bin_size_px)
    density = kernels.kde_grid(cx, cy, tr.x_px, tr.y_px, float(bandwidth_px))
    peak = density.max()
    if peak > 0:
        density = density / peak
    density.flags.writeable = False
    return HeatmapGrid(density, float(bin_size_px), float(bandwidth_px))


def ecdf(values) -> list[tuple[float, float]]:
    """Right-continuous empirical CDF as ``(value, fraction <= value)`` steps."""
    arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=np.float64)
    if arr.size == 0:
        raise DomainError("ecdf of an empty list")
    if np.any(np.isnan(arr)):
        raise DomainError("ecdf input contains NaN")
    uniq, counts = np.unique(arr, return_counts=True)
    frac = np.cumsum(counts) / arr.size
    return list(zip(uniq.tolist(), frac.tolist()))


def ecdf_quantile(steps, p: float) -> float:
    """Smallest value whose cumulative fraction reaches ``p`` (inverse ECDF)."""
    if not steps:
        raise DomainError("empty ecdf")
    if not 0 <= p <= 1:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    fractions = [f for _, f in steps]
    k = int(np.searchsorted(fractions, p - 1e-12, side="left"))
    return steps[min(k, len(steps) - 1)][0]


@dataclass(frozen=True)
class LatencyBudget:
    e2e_ms: float
    sampler_interval_ms: float

    @property
    def total_ms(self) -> float:
        return self.e2e_ms + self.sampler_interval_ms


def latency_budget(e2e_ms: float, sampler_hz: float) -> LatencyBudget:
    """Eye-movement-to-display delay: cloud-gaming e2e latency plus one tracker period."""
    if not (math.isfinite(sampler_hz) and sampler_hz > 0):
        raise DomainError(f"sampler_hz must be > 0, got {sampler_hz}")
    if not (math.isfinite(e2e_ms) and e2e_ms >= 0):
        raise DomainError(f"e2e_ms must be >= 0, got {e2e_ms}")
    return LatencyBudget(float(e2e_ms), 1000.0 / sampler_hz)


def shift_during(budget: LatencyBudget, rate_px_s: float) -> float:
    """How far gaze moving at ``rate_px_s`` travels within the budget, in pixels."""
    if rate_px_s < 0:
        raise DomainError(f"rate_px_s must be >= 0, got {rate_px_s}")
    return rate_px_s * budget.total_ms / 1000.0


def write_moments_csv(moments, path) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["start_us", "end_us", "duration_us", "anchor_x", "anchor_y"])
        for m in moments:
            w.writerow([m.start_us, m.end_us, m.duration_us, repr(m.anchor.x_px), repr(m.anchor.y_px)])


def write_values(values, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for v in values:
            fh.write(f"{float(v)!r}\n")


def write_ecdf_csv(steps, path) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["value", "fraction"])
        for value, frac in steps:
            w.writerow([repr(value), repr(frac)])
