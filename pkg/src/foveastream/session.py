"""End-to-end foveated streaming simulator.

A gaze trace is (optionally) light-filtered, sent sample by sample through a
simulated channel into a latest-wins cell, and sampled by the encoder at every
frame boundary. Each frame gets an offset map and a rate-model estimate.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

from .analytics import ecdf, ecdf_quantile
from .errors import DomainError
from .foveation import FoveationParams, compute_offset_map
from .gaze import FilterParams, GazeTrace, light_filter
from .grid import GridSpec, PixelPoint, mb_index_of
from .ratemodel import BitrateSummary, RateModel, estimate_frame_bits, summarize_bitrates
from .telemetry import (
    FLAG_VALID,
    ChannelSpec,
    GazeMessage,
    LatestGazeCell,
    channel_transmit,
    from_wire_coords,
    to_wire_coords,
)

__all__ = [
    "SessionConfig",
    "FrameRecord",
    "SessionSummary",
    "run_session",
    "session_summary",
    "trace_to_messages",
    "records_to_jsonl",
    "records_to_csv",
]


@dataclass(frozen=True)
class SessionConfig:
    grid: GridSpec
    fov: FoveationParams
    rate: RateModel = field(default_factory=RateModel)
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    filter: FilterParams | None = None
    fps: float = 40.0
    duration_s: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.fps) and self.fps > 0):
            raise DomainError(f"fps must be > 0, got {self.fps}")
        if self.duration_s is not None and not (
            math.isfinite(self.duration_s) and self.duration_s > 0
        ):
            raise DomainError(f"duration_s must be > 0, got {self.duration_s}")


@dataclass(frozen=True)
class FrameRecord:
    frame_index: int
    frame_time_us: int
    gaze_used: PixelPoint
    gaze_seq: int | None
    staleness_us: int
    mean_offset: float
    frame_bits: float
    savings_fraction: float

    def to_dict(self) -> dict:
        return asdict(self)


def trace_to_messages(trace: GazeTrace):
    """Client side: one message per sample, sent the moment the tracker produces it."""
    out = []
    for k in range(len(trace)):
        s = trace[k]
        x, y = to_wire_coords(trace.grid, s.point)
        flags = FLAG_VALID if s.valid else 0
        out.append((s.timestamp_us, GazeMessage(s.seq, s.timestamp_us, x, y, flags)))
    return out


def _frame_count(trace: GazeTrace, config: SessionConfig) -> int:
    if config.duration_s is not None:
        duration_us = config.duration_s * 1e6
    else:
        if len(trace) == 0:
            raise DomainError("empty trace and no duration_s: nothing to simulate")
        span = int(trace.timestamp_us[-1] - trace.timestamp_us[0])
        duration_us = span + trace.nominal_interval_us()
    return max(1, int(math.floor(duration_us * config.fps / 1e6 + 1e-9)))


def run_session(trace: GazeTrace, config: SessionConfig) -> list[FrameRecord]:
    """Simulate one streaming session; fully deterministic for a given config.

    Frame ``k`` is encoded at ``t0 + k / fps`` where ``t0`` is the first trace
    timestamp (0 for an empty trace). Arrivals at exactly a frame time are
    delivered before that frame samples the cell. Until the first message
    arrives the encoder assumes the gaze is at the frame centre.
    """
    n_frames = _frame_count(trace, config)
    grid = config.grid
    if config.filter is not None:
        trace = light_filter(trace, config.filter)
    t0 = int(trace.timestamp_us[0]) if len(trace) else 0

    # The session seed drives the channel so one number reproduces a run.
    channel = ChannelSpec(
        config.channel.base_latency_ms,
        config.channel.jitter_ms,
        config.channel.loss_prob,
        config.seed,
    )
    arrivals = channel_transmit(trace_to_messages(trace), channel)

    cell = LatestGazeCell()
    center = grid.center
    cache = {}
    records = []
    a = 0
    for k in range(n_frames):
        frame_time = t0 + int(round(k * 1e6 / config.fps))
        while a < len(arrivals) and arrivals[a][0] <= frame_time:
            arrival_us, msg = arrivals[a]
            a += 1
            if msg.valid:
                cell.offer(msg, arrival_us)
        msg = cell.current
        if msg is None:
            gaze, seq, stale = center, None, 0
        else:
            gaze = from_wire_coords(grid, msg.x_norm, msg.y_norm)
            seq, stale = msg.seq, frame_time - msg.timestamp_us
        # The map depends on the gaze only through its macroblock.
        key = mb_index_of(grid, gaze)
        hit = cache.get(key)
        if hit is None:
            omap = compute_offset_map(grid, config.fov, gaze)
            est = estimate_frame_bits(omap, config.rate)
            hit = cache[key] = (omap.mean_offset, est.frame_bits, est.savings_fraction)
        records.append(FrameRecord(k, frame_time, gaze, seq, stale, *hit))
    return records


@dataclass(frozen=True)
class SessionSummary:
    frame_bits: BitrateSummary
    mean_savings: float
    staleness_p50_us: float | None
    staleness_p90_us: float | None
    staleness_p99_us: float | None
    n_frames: int
    frames_with_gaze: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def session_summary(records) -> SessionSummary:
    records = list(records)
    if not records:
        raise DomainError("no frame records to summarize")
    bits = summarize_bitrates([r.frame_bits for r in records])
    mean_savings = sum(r.savings_fraction for r in records) / len(records)
    stale = [r.staleness_us for r in records if r.gaze_seq is not None]
    if stale:
        steps = ecdf(stale)
        p50, p90, p99 = (ecdf_quantile(steps, p) for p in (0.5, 0.9, 0.99))
    else:
        p50 = p90 = p99 = None
    return SessionSummary(bits, mean_savings, p50, p90, p99, len(records), len(stale))


CSV_FIELDS = [
    "frame_index",
    "frame_time_us",
    "gaze_x_px",
    "gaze_y_px",
    "gaze_seq",
    "staleness_us",
    "mean_offset",
    "frame_bits",
    "savings_fraction",
]


def records_to_jsonl(records) -> str:
    return "".join(json.dumps(r.to_dict()) + "\n" for r in records)


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in records:
        w.writerow(
            [
                r.frame_index,
                r.frame_time_us,
                repr(r.gaze_used.x_px),
                repr(r.gaze_used.y_px),
                "" if r.gaze_seq is None else r.gaze_seq,
                r.staleness_us,
                repr(r.mean_offset),
                repr(r.frame_bits),
                repr(r.savings_fraction),
            ]
        )
    return buf.getvalue()
