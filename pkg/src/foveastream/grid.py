"""Frame geometry and macroblock tiling.

Pixel coordinates have their origin at the top-left corner with y growing
downwards. A frame of ``FW x FH`` pixels is tiled by square macroblocks;
partial macroblocks on the right/bottom edges count as full ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

__all__ = ["GridSpec", "PixelPoint", "mb_index_of", "clamp_to_frame"]


@dataclass(frozen=True)
class GridSpec:
    frame_width_px: int
    frame_height_px: int
    mb_size_px: int = 16

    def __post_init__(self):
        for name in ("frame_width_px", "frame_height_px", "mb_size_px"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value:
                raise DomainError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.mb_size_px <= 0:
            raise DomainError(f"mb_size_px must be positive, got {self.mb_size_px}")
        if self.frame_width_px < self.mb_size_px or self.frame_height_px < self.mb_size_px:
            raise DomainError(
                f"frame {self.frame_width_px}x{self.frame_height_px} is smaller "
                f"than one {self.mb_size_px}px macroblock"
            )

    @property
    def mb_cols(self) -> int:
        return -(-self.frame_width_px // self.mb_size_px)

    @property
    def mb_rows(self) -> int:
        return -(-self.frame_height_px // self.mb_size_px)

    @property
    def shape(self) -> tuple[int, int]:
        """(rows, cols) of the macroblock array, numpy order."""
        return (self.mb_rows, self.mb_cols)

    @property
    def center(self) -> PixelPoint:
        return PixelPoint(self.frame_width_px / 2, self.frame_height_px / 2)


@dataclass(frozen=True)
class PixelPoint:
    x_px: float
    y_px: float

    def __post_init__(self):
        if not (math.isfinite(self.x_px) and math.isfinite(self.y_px)):
            raise DomainError(f"non-finite pixel coordinate ({self.x_px}, {self.y_px})")


def clamp_to_frame(grid: GridSpec, p: PixelPoint) -> PixelPoint:
    x = min(max(float(p.x_px), 0.0), float(grid.frame_width_px - 1))
    y = min(max(float(p.y_px), 0.0), float(grid.frame_height_px - 1))
    return PixelPoint(x, y)


def mb_index_of(grid: GridSpec, p: PixelPoint) -> tuple[int, int]:
    """Macroblock (column i, row j) containing ``p``.

    Points on a macroblock boundary belong to the block to their right/below
    (floor semantics). ``p`` must already lie inside ``[0, FW) x [0, FH)``.
    """
    if not 0 <= p.x_px < grid.frame_width_px:
        raise DomainError(
            f"x_px={p.x_px} outside [0, {grid.frame_width_px}); clamp_to_frame first"
        )
    if not 0 <= p.y_px < grid.frame_height_px:
        raise DomainError(
            f"y_px={p.y_px} outside [0, {grid.frame_height_px}); clamp_to_frame first"
        )
    return (int(p.x_px // grid.mb_size_px), int(p.y_px // grid.mb_size_px))
