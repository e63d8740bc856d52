"""Foveated video streaming simulator and gaze analytics.

The encoder raises the QP of macroblocks away from the viewer's gaze; this
package computes those per-macroblock offsets, estimates the bandwidth they
save under an exponential rate model, simulates the gaze telemetry path from
client to server, and analyses recorded gaze traces.
"""

__version__ = "0.1.0"

from ._accel import USE_NUMBA, backend_name
from .analytics import (
    GazeMoment,
    HeatmapGrid,
    LatencyBudget,
    change_rate,
    ecdf,
    gaze_moments,
    heatmap,
    latency_budget,
    shift_during,
)
from .errors import DecodeError, DomainError, FoveaStreamError, TraceParseError
from .foveation import FoveationParams, OffsetMap, compute_offset_map, effective_qp
from .gaze import (
    FilterParams,
    GazeSample,
    GazeTrace,
    generate_synthetic_trace,
    light_filter,
    load_trace,
)
from .grid import GridSpec, PixelPoint, clamp_to_frame, mb_index_of
from .ratemodel import (
    BitrateEstimate,
    RateModel,
    estimate_frame_bits,
    savings_sweep,
    summarize_bitrates,
)
from .session import FrameRecord, SessionConfig, run_session, session_summary
from .telemetry import (
    ChannelSpec,
    GazeMessage,
    LatestGazeCell,
    cell_offer,
    channel_transmit,
    decode,
    encode,
)

__all__ = [
    "__version__",
    "USE_NUMBA",
    "backend_name",
    "GazeMoment",
    "HeatmapGrid",
    "LatencyBudget",
    "change_rate",
    "ecdf",
    "gaze_moments",
    "heatmap",
    "latency_budget",
    "shift_during",
    "DecodeError",
    "DomainError",
    "FoveaStreamError",
    "TraceParseError",
    "FoveationParams",
    "OffsetMap",
    "compute_offset_map",
    "effective_qp",
    "FilterParams",
    "GazeSample",
    "GazeTrace",
    "generate_synthetic_trace",
    "light_filter",
    "load_trace",
    "GridSpec",
    "PixelPoint",
    "clamp_to_frame",
    "mb_index_of",
    "BitrateEstimate",
    "RateModel",
    "estimate_frame_bits",
    "savings_sweep",
    "summarize_bitrates",
    "FrameRecord",
    "SessionConfig",
    "run_session",
    "session_summary",
    "ChannelSpec",
    "GazeMessage",
    "LatestGazeCell",
    "cell_offer",
    "channel_transmit",
    "decode",
    "encode",
]
