"""Gaze samples and traces: CSV ingestion, synthetic generation, light filtering.

A trace keeps its samples column-wise in read-only numpy arrays; per-sample
``GazeSample`` objects are built on demand.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DomainError, TraceParseError, TraceValidationError
from .grid import GridSpec, PixelPoint

__all__ = [
    "GazeSample",
    "GazeTrace",
    "FilterParams",
    "TRACE_HEADER",
    "SYNTHETIC_KINDS",
    "load_trace",
    "read_trace",
    "write_trace",
    "light_filter",
    "generate_synthetic_trace",
]

TRACE_HEADER = ("timestamp_us", "x_px", "y_px")
SYNTHETIC_KINDS = ("fixate", "step", "spiral", "random_walk")

_TRUE = {"1", "true", "t", "yes", "y"}
_FALSE = {"0", "false", "f", "no", "n"}


@dataclass(frozen=True)
class GazeSample:
    timestamp_us: int
    point: PixelPoint
    seq: int
    valid: bool = True


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class GazeTrace:
    grid: GridSpec
    timestamp_us: np.ndarray = field(repr=False)
    x_px: np.ndarray = field(repr=False)
    y_px: np.ndarray = field(repr=False)
    valid: np.ndarray = field(repr=False)
    seq: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = len(self.timestamp_us)
        object.__setattr__(self, "timestamp_us", _frozen(self.timestamp_us, np.int64))
        object.__setattr__(self, "x_px", _frozen(self.x_px, np.float64))
        object.__setattr__(self, "y_px", _frozen(self.y_px, np.float64))
        object.__setattr__(self, "valid", _frozen(self.valid, np.bool_))
        object.__setattr__(self, "seq", _frozen(self.seq, np.int64))
        for name in ("x_px", "y_px", "valid", "seq"):
            if len(getattr(self, name)) != n:
                raise DomainError(f"trace column {name} has the wrong length")
        if n:
            if self.timestamp_us[0] < 0:
                raise DomainError("timestamps must be >= 0")
            if np.any(np.diff(self.timestamp_us) <= 0):
                raise DomainError("timestamps must be strictly increasing")
            if np.any(np.diff(self.seq) <= 0):
                raise DomainError("seq must be strictly increasing")
            if not (np.all(np.isfinite(self.x_px)) and np.all(np.isfinite(self.y_px))):
                raise DomainError("gaze coordinates must be finite")

    @classmethod
    def from_arrays(cls, grid, timestamp_us, x_px, y_px, valid=None, seq=None):
        n = len(timestamp_us)
        if valid is None:
            valid = np.ones(n, dtype=bool)
        if seq is None:
            seq = np.arange(n, dtype=np.int64)
        return cls(grid, timestamp_us, x_px, y_px, valid, seq)

    @classmethod
    def from_samples(cls, grid, samples):
        samples = list(samples)
        return cls(
            grid,
            [s.timestamp_us for s in samples],
            [s.point.x_px for s in samples],
            [s.point.y_px for s in samples],
            [s.valid for s in samples],
            [s.seq for s in samples],
        )

    def __len__(self):
        return len(self.timestamp_us)

    def __getitem__(self, k) -> GazeSample:
        return GazeSample(
            int(self.timestamp_us[k]),
            PixelPoint(float(self.x_px[k]), float(self.y_px[k])),
            int(self.seq[k]),
            bool(self.valid[k]),
        )

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]

    @property
    def samples(self) -> list[GazeSample]:
        return list(self)

    def only_valid(self) -> GazeTrace:
        if self.valid.all():
            return self
        m = self.valid
        return GazeTrace(
            self.grid, self.timestamp_us[m], self.x_px[m], self.y_px[m], self.valid[m], self.seq[m]
        )

    def nominal_interval_us(self) -> int:
        """Median spacing between consecutive samples; 0 for traces shorter than two."""
        if len(self) < 2:
            return 0
        return int(np.median(np.diff(self.timestamp_us)))

    def with_points(self, x_px, y_px) -> GazeTrace:
        return GazeTrace(self.grid, self.timestamp_us, x_px, y_px, self.valid, self.seq)


@dataclass(frozen=True)
class FilterParams:
    """Velocity-gated EMA. ``alpha_slow = 1`` is raw passthrough."""

    alpha_slow: float = 0.4
    saccade_speed_px_s: float = 700.0

    def __post_init__(self):
        if not (0 < self.alpha_slow <= 1):
            raise DomainError(f"alpha_slow must lie in (0, 1], got {self.alpha_slow}")
        if not (math.isfinite(self.saccade_speed_px_s) and self.saccade_speed_px_s > 0):
            raise DomainError(
                f"saccade_speed_px_s must be > 0, got {self.saccade_speed_px_s}"
            )


def _parse_bool(text, lineno):
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise TraceParseError(f"bad valid flag {text!r}", lineno)


def read_trace(fh, grid: GridSpec | None = None, source="<stream>") -> GazeTrace:
    """Parse trace CSV from an open text stream. See :func:`load_trace`."""
    grid = grid or GridSpec(1920, 1080)
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise TraceParseError(f"{source}: missing header", 1) from None
    header = [h.strip() for h in header]
    if tuple(header) == TRACE_HEADER:
        has_valid = False
    elif tuple(header) == TRACE_HEADER + ("valid",):
        has_valid = True
    else:
        raise TraceParseError(
            f"{source}: header must be {','.join(TRACE_HEADER)}[,valid], got {','.join(header)}",
            1,
        )
    width = 4 if has_valid else 3
    ts, xs, ys, vs = [], [], [], []
    for record in reader:
        lineno = reader.line_num
        if not record:
            continue
        if len(record) != width:
            raise TraceParseError(f"expected {width} fields, got {len(record)}", lineno)
        try:
            t = int(record[0])
            x = float(record[1])
            y = float(record[2])
        except ValueError as exc:
            raise TraceParseError(str(exc), lineno) from None
        if t < 0:
            raise TraceValidationError(f"negative timestamp {t}", lineno)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise TraceParseError(f"non-finite coordinate ({record[1]}, {record[2]})", lineno)
        if ts and t <= ts[-1]:
            raise TraceValidationError(
                f"timestamp {t} does not increase (previous {ts[-1]})", lineno
            )
        ts.append(t)
        xs.append(x)
        ys.append(y)
        vs.append(_parse_bool(record[3], lineno) if has_valid else True)
    return GazeTrace.from_arrays(grid, ts, xs, ys, vs)


def load_trace(path, grid: GridSpec | None = None) -> GazeTrace:
    """Load ``timestamp_us,x_px,y_px[,valid]`` CSV; ``seq`` follows row order.

    ``grid`` declares the pixel space of the coordinates (1920x1080 if not given).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        return read_trace(fh, grid, source=str(path))


def write_trace(trace: GazeTrace, path_or_fh, with_valid: bool | None = None) -> None:
    if with_valid is None:
        with_valid = not bool(trace.valid.all())
    if isinstance(path_or_fh, (str, bytes)) or hasattr(path_or_fh, "__fspath__"):
        with open(path_or_fh, "w", encoding="ascii", newline="") as fh:
            _write_trace(trace, fh, with_valid)
    else:
        _write_trace(trace, path_or_fh, with_valid)


def _write_trace(trace, fh, with_valid):
    out = io.StringIO()
    out.write(",".join(TRACE_HEADER + (("valid",) if with_valid else ())) + "\n")
    for t, x, y, v in zip(
        trace.timestamp_us.tolist(), trace.x_px.tolist(), trace.y_px.tolist(), trace.valid.tolist()
    ):
        line = f"{t},{x:.3f},{y:.3f}"
        if with_valid:
            line += ",1" if v else ",0"
        out.write(line + "\n")
    fh.write(out.getvalue())


def light_filter(trace: GazeTrace, params: FilterParams) -> GazeTrace:
    """Smooth slow gaze drift with an EMA; let saccades through untouched.

    Speed is measured between consecutive raw (valid) samples. Above
    ``saccade_speed_px_s`` the output snaps to the raw sample, otherwise it
    moves ``alpha_slow`` of the way from the previous output towards it.
    Invalid samples are passed through and do not touch the filter state.
    """
    if not isinstance(params, FilterParams):
        raise DomainError("params must be FilterParams")
    if len(trace) == 0:
        return trace
    x, y = kernels.light_filter(
        trace.timestamp_us,
        trace.x_px,
        trace.y_px,
        trace.valid,
        float(params.alpha_slow),
        float(params.saccade_speed_px_s),
    )
    return trace.with_points(x, y)


def _timestamps(n, rate_hz):
    return np.round(np.arange(n, dtype=np.float64) * (1e6 / rate_hz)).astype(np.int64)


def generate_synthetic_trace(
    kind: str,
    duration_s: float,
    rate_hz: float,
    seed: int,
    grid: GridSpec,
    *,
    step_period_s: float = 1.0,
    drift_px: float = 3.0,
    saccade_prob: float = 0.02,
) -> GazeTrace:
    """Deterministic gaze fixtures.

    ``fixate``       gaze parked at the frame centre.
    ``step``         alternates between two points a quarter frame either side of
                     centre every ``step_period_s``.
    ``spiral``       outward Archimedean spiral about the centre, one turn per 2 s.
    ``random_walk``  Gaussian drift of ``drift_px`` per sample, plus saccades to a
                     uniformly drawn point with probability ``saccade_prob``.

    Points are clamped into the frame. Sample count is ``floor(duration_s * rate_hz)``.
    """
    if kind not in SYNTHETIC_KINDS:
        raise DomainError(f"unknown trace kind {kind!r}; choose from {', '.join(SYNTHETIC_KINDS)}")
    if not (duration_s > 0 and math.isfinite(duration_s)):
        raise DomainError(f"duration_s must be > 0, got {duration_s}")
    if not (0 < rate_hz <= 1e6):
        raise DomainError(f"rate_hz must lie in (0, 1e6], got {rate_hz}")
    n = int(math.floor(duration_s * rate_hz + 1e-9))
    t = _timestamps(n, rate_hz)
    fw, fh = grid.frame_width_px, grid.frame_height_px
    cx, cy = fw / 2, fh / 2
    rng = np.random.default_rng(seed)
    secs = t / 1e6

    if kind == "fixate":
        x = np.full(n, cx)
        y = np.full(n, cy)
    elif kind == "step":
        side = np.where(np.floor(secs / step_period_s) % 2 == 0, -1.0, 1.0)
        x = cx + side * fw / 4
        y = np.full(n, cy)
    elif kind == "spiral":
        theta = np.pi * secs
        radius = min(fw, fh) / 2 * secs / max(secs[-1] if n else 1.0, 1e-9)
        x = cx + radius * np.cos(theta)
        y = cy + radius * np.sin(theta)
    else:
        x = np.empty(n)
        y = np.empty(n)
        steps = rng.normal(0.0, drift_px, size=(n, 2))
        jumps = rng.random(n) < saccade_prob
        targets = rng.random((n, 2)) * (fw - 1, fh - 1)
        px, py = cx, cy
        for k in range(n):
            if jumps[k]:
                px, py = targets[k]
            else:
                px = min(max(px + steps[k, 0], 0.0), fw - 1.0)
                py = min(max(py + steps[k, 1], 0.0), fh - 1.0)
            x[k] = px
            y[k] = py

    x = np.clip(x, 0.0, fw - 1.0)
    y = np.clip(y, 0.0, fh - 1.0)
    return GazeTrace.from_arrays(grid, t, x, y)
