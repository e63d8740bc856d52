"""Gaze-driven QP offsets per macroblock.

Each macroblock at index distance ``d`` from the gaze macroblock gets the
offset ``qo_max * (1 - exp(-d**2 / (2 * W**2)))`` with ``W`` expressed in
macroblocks. The offset is zero under the gaze and saturates towards
``qo_max`` in the periphery. Note the negative exponent: the commonly
printed form of this Gaussian has the sign dropped, which would make the
offsets diverge with distance instead of saturating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DomainError
from .grid import GridSpec, PixelPoint, mb_index_of

__all__ = [
    "QP_MIN",
    "QP_MAX",
    "FoveationParams",
    "OffsetMap",
    "compute_offset_map",
    "effective_qp",
    "effective_qp_map",
    "round_half_up",
]

QP_MIN = 0
QP_MAX = 51


def round_half_up(value):
    return math.floor(value + 0.5)


@dataclass(frozen=True)
class FoveationParams:
    """Foveation knobs.

    Give exactly one of ``w_px`` (absolute, pixels) or ``w_fraction``
    (relative to the frame width, e.g. ``1/8``). ``base_qp`` stands in for the
    QP the encoder's own rate control would pick; 28 mirrors ``--crf 28``.
    """

    qo_max: float
    w_px: float | None = None
    w_fraction: float | None = None
    base_qp: float = 28.0

    def __post_init__(self):
        if not math.isfinite(self.qo_max) or self.qo_max < 0:
            raise DomainError(f"qo_max must be >= 0, got {self.qo_max}")
        if (self.w_px is None) == (self.w_fraction is None):
            raise DomainError("give exactly one of w_px or w_fraction")
        w = self.w_px if self.w_px is not None else self.w_fraction
        if not math.isfinite(w) or w <= 0:
            raise DomainError(f"W must be > 0, got {w}")
        if not QP_MIN <= self.base_qp <= QP_MAX:
            raise DomainError(f"base_qp must lie in [{QP_MIN}, {QP_MAX}], got {self.base_qp}")

    def resolve_w_px(self, grid: GridSpec) -> float:
        if self.w_px is not None:
            return float(self.w_px)
        return self.w_fraction * grid.frame_width_px


@dataclass(frozen=True, eq=False)
class OffsetMap:
    grid: GridSpec
    gaze_mb: tuple[int, int]
    values: np.ndarray = field(repr=False)
    qo_max: float = 0.0
    w_mb: float = 1.0

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise DomainError(
                f"offset array shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        self.values.flags.writeable = False

    def at(self, i: int, j: int) -> float:
        """Offset of macroblock column ``i``, row ``j``."""
        if not (0 <= i < self.grid.mb_cols and 0 <= j < self.grid.mb_rows):
            raise DomainError(
                f"macroblock ({i}, {j}) outside {self.grid.mb_cols}x{self.grid.mb_rows} grid"
            )
        return float(self.values[j, i])

    @property
    def mean_offset(self) -> float:
        return float(self.values.mean())

    def to_csv(self, path) -> None:
        """Raw offsets, one macroblock row per line, full float precision."""
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            for row in self.values:
                fh.write(",".join(repr(float(v)) for v in row))
                fh.write("\n")

    def to_pgm(self, path) -> None:
        """Plain PGM (P2), gray = round(255 * offset / qo_max); black under the gaze."""
        if self.qo_max > 0:
            gray = np.floor(255.0 * self.values / self.qo_max + 0.5).astype(np.int64)
        else:
            gray = np.zeros(self.values.shape, dtype=np.int64)
        write_pgm(path, np.clip(gray, 0, 255))


def write_pgm(path, gray: np.ndarray, maxval: int = 255) -> None:
    rows, cols = gray.shape
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"P2\n{cols} {rows}\n{maxval}\n")
        for row in gray:
            fh.write(" ".join(str(int(v)) for v in row))
            fh.write("\n")


def compute_offset_map(grid: GridSpec, params: FoveationParams, gaze: PixelPoint) -> OffsetMap:
    gx, gy = mb_index_of(grid, gaze)
    w_mb = params.resolve_w_px(grid) / grid.mb_size_px
    values = kernels.offset_map(
        grid.mb_cols, grid.mb_rows, gx, gy, float(params.qo_max), float(w_mb)
    )
    return OffsetMap(grid, (gx, gy), values, float(params.qo_max), float(w_mb))


def effective_qp(omap: OffsetMap, params: FoveationParams, i: int, j: int) -> int:
    """Base QP plus the macroblock's offset, rounded half-up and clamped to [0, 51]."""
    qp = round_half_up(params.base_qp + omap.at(i, j))
    return int(min(max(qp, QP_MIN), QP_MAX))


def effective_qp_map(omap: OffsetMap, params: FoveationParams) -> np.ndarray:
    qp = np.floor(params.base_qp + omap.values + 0.5)
    return np.clip(qp, QP_MIN, QP_MAX).astype(np.int64)
