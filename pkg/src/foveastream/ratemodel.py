"""Exponential QP-to-rate model standing in for the real encoder.

Every ``qp_halving_step`` QP units of extra offset halve a macroblock's bits,
the usual AVC rule of thumb. Savings are reported against the same frame
encoded with no offsets at all.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .foveation import FoveationParams, OffsetMap, compute_offset_map
from .grid import GridSpec, PixelPoint

__all__ = [
    "RateModel",
    "BitrateEstimate",
    "SweepRow",
    "BitrateSummary",
    "estimate_frame_bits",
    "savings_sweep",
    "summarize_bitrates",
    "load_weight_map",
    "write_sweep_csv",
]


@dataclass(frozen=True, eq=False)
class RateModel:
    ref_bits_per_mb: float = 1000.0
    qp_halving_step: float = 6.0
    weight_map: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not (math.isfinite(self.ref_bits_per_mb) and self.ref_bits_per_mb > 0):
            raise DomainError(f"ref_bits_per_mb must be > 0, got {self.ref_bits_per_mb}")
        if not (math.isfinite(self.qp_halving_step) and self.qp_halving_step > 0):
            raise DomainError(f"qp_halving_step must be > 0, got {self.qp_halving_step}")
        if self.weight_map is not None:
            w = np.array(self.weight_map, dtype=np.float64)
            if w.ndim != 2:
                raise DomainError("weight_map must be two-dimensional")
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                raise DomainError("weight_map entries must be finite and >= 0")
            w.flags.writeable = False
            object.__setattr__(self, "weight_map", w)

    def weights_for(self, grid: GridSpec) -> np.ndarray:
        if self.weight_map is None:
            return np.ones(grid.shape, dtype=np.float64)
        if self.weight_map.shape != grid.shape:
            raise DomainError(
                f"weight_map shape {self.weight_map.shape} does not match "
                f"grid {grid.mb_rows}x{grid.mb_cols} (rows x cols)"
            )
        return self.weight_map


@dataclass(frozen=True, eq=False)
class BitrateEstimate:
    frame_bits: float
    per_mb_bits: np.ndarray = field(repr=False)
    savings_fraction: float = 0.0


def estimate_frame_bits(omap: OffsetMap, model: RateModel) -> BitrateEstimate:
    weights = model.weights_for(omap.grid)
    baseline = float(weights.sum())
    if baseline <= 0:
        raise DomainError("weight_map sums to zero; savings are undefined")
    relative = weights * np.exp2(-omap.values / model.qp_halving_step)
    per_mb = model.ref_bits_per_mb * relative
    # Savings come from the unscaled sums so they are exactly independent of
    # ref_bits_per_mb.
    savings = 1.0 - float(relative.sum()) / baseline
    per_mb.flags.writeable = False
    return BitrateEstimate(float(per_mb.sum()), per_mb, savings)


@dataclass(frozen=True)
class SweepRow:
    qo_max: float
    w_px: float
    savings_fraction: float


def savings_sweep(
    grid: GridSpec,
    params_list: list[FoveationParams],
    gaze: PixelPoint,
    model: RateModel,
) -> list[SweepRow]:
    if not params_list:
        raise DomainError("params_list is empty")
    rows = []
    for params in params_list:
        est = estimate_frame_bits(compute_offset_map(grid, params, gaze), model)
        rows.append(SweepRow(float(params.qo_max), params.resolve_w_px(grid), est.savings_fraction))
    return rows


def write_sweep_csv(rows: list[SweepRow], path) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["qo_max", "w_px", "savings_fraction"])
        for row in rows:
            writer.writerow([repr(row.qo_max), repr(row.w_px), repr(row.savings_fraction)])


@dataclass(frozen=True)
class BitrateSummary:
    mean: float
    median: float
    q1: float
    q3: float


def summarize_bitrates(samples) -> BitrateSummary:
    """Mean and box-plot quartiles; quartiles interpolate linearly between closest ranks."""
    values = np.asarray(list(samples), dtype=np.float64)
    if values.size == 0:
        raise DomainError("cannot summarize an empty sample list")
    if not np.all(np.isfinite(values)):
        raise DomainError("samples must be finite")
    q1, median, q3 = np.quantile(values, [0.25, 0.5, 0.75], method="linear")
    return BitrateSummary(float(values.mean()), float(median), float(q1), float(q3))


def load_weight_map(path, grid: GridSpec | None = None) -> np.ndarray:
    """Read a per-macroblock weight grid: one macroblock row per CSV line, no header."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            if not record or all(not cell.strip() for cell in record):
                continue
            try:
                rows.append([float(cell) for cell in record])
            except ValueError as exc:
                raise DomainError(f"{path}: line {lineno}: {exc}") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise DomainError(f"{path}: weight map must be a non-empty rectangular grid")
    weights = np.asarray(rows, dtype=np.float64)
    if grid is not None and weights.shape != grid.shape:
        raise DomainError(
            f"{path}: weight map is {weights.shape[0]}x{weights.shape[1]}, "
            f"grid needs {grid.mb_rows}x{grid.mb_cols}"
        )
    return weights
