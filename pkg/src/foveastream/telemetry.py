"""Client-to-server gaze telemetry.

Wire layout (little-endian, 24 bytes)::

    0   2s  magic "GZ"
    2   u8  version (1)
    3   u8  flags, bit 0 = valid
    4   u32 seq
    8   u64 timestamp_us
    16  f32 x_norm in [0, 1]
    20  f32 y_norm in [0, 1]

Gaze is ephemeral state, so delivery is datagram-style: a simulated channel may
drop, delay and reorder messages, and the receiver keeps only the message with
the highest ``seq`` it has seen.
"""

from __future__ import annotations

import math
import socket
import struct
import threading
import time
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagicError,
    CoordinateRangeError,
    DecodeError,
    DomainError,
    FrameLengthError,
    UnsupportedVersionError,
)
from .grid import GridSpec, PixelPoint, clamp_to_frame

__all__ = [
    "MAGIC",
    "VERSION",
    "FLAG_VALID",
    "MESSAGE_SIZE",
    "DEFAULT_HOST",
    "DEFAULT_PORT",
    "GazeMessage",
    "ChannelSpec",
    "LatestGazeCell",
    "encode",
    "decode",
    "channel_transmit",
    "cell_offer",
    "to_wire_coords",
    "from_wire_coords",
    "send_datagrams",
    "receive_datagrams",
]

MAGIC = b"GZ"
VERSION = 1
FLAG_VALID = 0x01
_LAYOUT = struct.Struct("<2sBBIQff")
MESSAGE_SIZE = _LAYOUT.size
DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 9090

_f32 = struct.Struct("<f")


def _as_f32(value):
    # The wire carries single precision; rounding on construction keeps
    # decode(encode(m)) == m exact.
    return _f32.unpack(_f32.pack(value))[0] if math.isfinite(value) else float(value)


@dataclass(frozen=True)
class GazeMessage:
    seq: int
    timestamp_us: int
    x_norm: float
    y_norm: float
    flags: int = FLAG_VALID
    version: int = VERSION

    def __post_init__(self):
        object.__setattr__(self, "x_norm", _as_f32(float(self.x_norm)))
        object.__setattr__(self, "y_norm", _as_f32(float(self.y_norm)))

    @property
    def valid(self) -> bool:
        return bool(self.flags & FLAG_VALID)


def _in_unit(v):
    return 0.0 <= v <= 1.0


def encode(msg: GazeMessage) -> bytes:
    if not (_in_unit(msg.x_norm) and _in_unit(msg.y_norm)):
        raise DomainError(
            f"normalized coordinates ({msg.x_norm}, {msg.y_norm}) outside [0, 1]"
        )
    if not 0 <= msg.version <= 0xFF or not 0 <= msg.flags <= 0xFF:
        raise DomainError("version and flags must fit in one byte")
    if not 0 <= msg.seq <= 0xFFFFFFFF:
        raise DomainError(f"seq {msg.seq} does not fit in u32")
    if not 0 <= msg.timestamp_us <= 0xFFFFFFFFFFFFFFFF:
        raise DomainError(f"timestamp_us {msg.timestamp_us} does not fit in u64")
    return _LAYOUT.pack(
        MAGIC, msg.version, msg.flags, msg.seq, msg.timestamp_us, msg.x_norm, msg.y_norm
    )


def decode(data: bytes) -> GazeMessage:
    if len(data) != MESSAGE_SIZE:
        raise FrameLengthError(f"gaze message must be {MESSAGE_SIZE} bytes, got {len(data)}")
    magic, version, flags, seq, ts, x, y = _LAYOUT.unpack(data)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported message version {version}")
    if not (_in_unit(x) and _in_unit(y)):
        raise CoordinateRangeError(f"coordinates ({x}, {y}) outside [0, 1]")
    return GazeMessage(seq, ts, x, y, flags, version)


def to_wire_coords(grid: GridSpec, p: PixelPoint) -> tuple[float, float]:
    """Pixel position to resolution-agnostic [0, 1] coordinates."""
    p = clamp_to_frame(grid, p)
    return p.x_px / grid.frame_width_px, p.y_px / grid.frame_height_px


def from_wire_coords(grid: GridSpec, x_norm: float, y_norm: float) -> PixelPoint:
    """Map wire coordinates onto ``grid`` (the receiver's frame), clamped."""
    return clamp_to_frame(
        grid, PixelPoint(x_norm * grid.frame_width_px, y_norm * grid.frame_height_px)
    )


@dataclass(frozen=True)
class ChannelSpec:
    base_latency_ms: float = 0.0
    jitter_ms: float = 0.0
    loss_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.base_latency_ms) and self.base_latency_ms >= 0):
            raise DomainError(f"base_latency_ms must be >= 0, got {self.base_latency_ms}")
        if not (math.isfinite(self.jitter_ms) and self.jitter_ms >= 0):
            raise DomainError(f"jitter_ms must be >= 0, got {self.jitter_ms}")
        if not 0 <= self.loss_prob <= 1:
            raise DomainError(f"loss_prob must lie in [0, 1], got {self.loss_prob}")


def channel_transmit(messages, spec: ChannelSpec):
    """Push ``(send_time_us, msg)`` pairs through a lossy, jittery link.

    Each message independently survives with probability ``1 - loss_prob`` and
    arrives after ``base_latency + U(-jitter, +jitter)``, never before it was
    sent. Output is sorted by arrival time; ties keep send order.
    """
    messages = list(messages)
    rng = np.random.default_rng(spec.seed)
    n = len(messages)
    # Always draw both streams so the schedule of one message does not depend
    # on whether an earlier one was dropped.
    drop = rng.random(n) < spec.loss_prob
    jitter = rng.uniform(-spec.jitter_ms, spec.jitter_ms, n) if spec.jitter_ms > 0 else np.zeros(n)
    out = []
    last_send = None
    for k, (send_us, msg) in enumerate(messages):
        if last_send is not None and send_us < last_send:
            raise DomainError("send times must be non-decreasing")
        last_send = send_us
        if drop[k]:
            continue
        delay_us = int(round((spec.base_latency_ms + float(jitter[k])) * 1000.0))
        out.append((int(send_us) + max(delay_us, 0), k, msg))
    out.sort(key=lambda item: (item[0], item[1]))
    return [(arrival, msg) for arrival, _, msg in out]


class LatestGazeCell:
    """Single-writer, multi-reader latest-wins register.

    The (message, last_update_us) pair is swapped in as one immutable tuple,
    so readers always see a consistent snapshot without locking.
    """

    def __init__(self):
        self._state = (None, None)
        self._write_lock = threading.Lock()

    @property
    def current(self) -> GazeMessage | None:
        return self._state[0]

    @property
    def last_update_us(self) -> int | None:
        return self._state[1]

    def snapshot(self):
        return self._state

    def offer(self, msg: GazeMessage, now_us: int) -> bool:
        with self._write_lock:
            current = self._state[0]
            if current is not None and msg.seq <= current.seq:
                return False
            self._state = (msg, int(now_us))
            return True


def cell_offer(cell: LatestGazeCell, msg: GazeMessage, now_us: int) -> bool:
    return cell.offer(msg, now_us)


def send_datagrams(messages, host=DEFAULT_HOST, port=DEFAULT_PORT, pace=False, clock=None):
    """Send ``(send_time_us, msg)`` pairs as UDP datagrams; returns the count sent.

    With ``pace`` the sender sleeps so that datagrams leave with the same
    spacing as their send times.
    """
    clock = clock or time.monotonic
    sent = 0
    start_wall = clock()
    first_us = None
    with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
        for send_us, msg in messages:
            if pace:
                if first_us is None:
                    first_us = send_us
                delay = (send_us - first_us) / 1e6 - (clock() - start_wall)
                if delay > 0:
                    time.sleep(delay)
            sock.sendto(encode(msg), (host, port))
            sent += 1
    return sent


def receive_datagrams(
    cell: LatestGazeCell,
    host=DEFAULT_HOST,
    port=DEFAULT_PORT,
    count=None,
    timeout_s=5.0,
    on_accept=None,
    on_error=None,
    ready=None,
    clock_us=None,
):
    """Receive gaze datagrams into ``cell`` until ``count`` arrive or the socket idles.

    ``on_accept(msg)`` is called for every message the cell accepted and
    ``on_error(exc)`` for every datagram that failed to decode. ``ready`` (a
    ``threading.Event``) is set once the socket is bound. Returns
    ``(received, accepted)``.
    """
    clock_us = clock_us or (lambda: time.monotonic_ns() // 1000)
    received = accepted = 0
    with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
        # Bursty senders overrun the default buffer; losses are still tolerated.
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 1 << 20)
        sock.bind((host, port))
        sock.settimeout(timeout_s)
        if ready is not None:
            ready.set()
        while count is None or received < count:
            try:
                data, _ = sock.recvfrom(2048)
            except socket.timeout:
                break
            received += 1
            try:
                msg = decode(data)
            except DecodeError as exc:
                if on_error is not None:
                    on_error(exc)
                continue
            if cell.offer(msg, clock_us()):
                accepted += 1
                if on_accept is not None:
                    on_accept(msg)
    return received, accepted
