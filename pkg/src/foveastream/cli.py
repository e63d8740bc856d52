"""``foveastream`` command line.

Exit codes: 0 success, 1 runtime/data error, 2 usage error.

Every subcommand accepts ``--config FILE`` (TOML). Top-level keys apply to
every subcommand that has that option, a table named after the subcommand
(``[simulate]``, ``[analyze.heatmap]``, ...) to that one only; flags given on
the command line win over both. Keys are flag names with dashes or underscores.
"""

from __future__ import annotations

import argparse
import os
import sys
import threading
from contextlib import contextmanager

from . import __version__
from ._accel import backend_name
from .analytics import (
    default_bandwidth_px,
    ecdf,
    gaze_moments,
    change_rate,
    heatmap,
    moment_radius_for_w,
    write_ecdf_csv,
    write_moments_csv,
    write_values,
)
from .errors import DomainError, FoveaStreamError
from .foveation import FoveationParams, compute_offset_map
from .gaze import (
    SYNTHETIC_KINDS,
    FilterParams,
    generate_synthetic_trace,
    load_trace,
    read_trace,
    write_trace,
)
from .grid import GridSpec, PixelPoint, clamp_to_frame
from .ratemodel import RateModel, load_weight_map, savings_sweep, write_sweep_csv
from .session import (
    SessionConfig,
    records_to_csv,
    records_to_jsonl,
    run_session,
    session_summary,
    trace_to_messages,
)
from .telemetry import (
    DEFAULT_HOST,
    DEFAULT_PORT,
    ChannelSpec,
    LatestGazeCell,
    from_wire_coords,
    receive_datagrams,
    send_datagrams,
)

SEED_ENV = "FOVEASTREAM_SEED"


class UsageError(Exception):
    pass


def _default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None


class _HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    # Skip the suffix when the help text already explains the default.
    def _get_help_string(self, action):
        if "default:" in (action.help or ""):
            return action.help
        return super()._get_help_string(action)


def _formatter(prog):
    return _HelpFormatter(prog, max_help_position=32)


# ------------------------------------------------------------------ flags


def _add_common(p, seed):
    p.add_argument("--config", metavar="FILE", default=None, help="TOML config file; flags override it")
    p.add_argument("--seed", type=int, default=seed, help=f"random seed (fallback: ${SEED_ENV})")


def _add_grid(p):
    g = p.add_argument_group("frame geometry")
    g.add_argument("--width", type=int, default=1920, help="frame width FW in pixels")
    g.add_argument("--height", type=int, default=1080, help="frame height FH in pixels")
    g.add_argument("--mb-size", type=int, default=16, help="macroblock size in pixels")


def _add_foveation(p):
    g = p.add_argument_group("foveation")
    g.add_argument("--qo-max", type=float, default=10.0, help="maximum QP offset")
    g.add_argument("--w-frac", type=float, default=0.125, help="foveal width W as a fraction of FW")
    g.add_argument("--w-px", type=float, default=None, help="foveal width W in pixels (overrides --w-frac)")
    g.add_argument("--base-qp", type=float, default=28.0, help="encoder base QP (CRF proxy)")


def _add_rate(p):
    g = p.add_argument_group("rate model")
    g.add_argument("--ref-bits", type=float, default=1000.0, help="bits per macroblock at base QP")
    g.add_argument("--halving-step", type=float, default=6.0, help="QP increase that halves the bits")
    g.add_argument("--weights", metavar="CSV", default=None, help="per-macroblock content weights")


def _add_trace_input(p, required=True):
    g = p.add_argument_group("trace input")
    g.add_argument(
        "--trace",
        metavar="CSV",
        default=None,
        help="gaze trace CSV (timestamp_us,x_px,y_px[,valid]); '-' reads stdin"
        + ("" if required else "; omit to use --synthetic"),
    )


def _add_filter(p):
    g = p.add_argument_group("light filter")
    g.add_argument("--filter", action=argparse.BooleanOptionalAction, default=False, help="apply the light filter")
    g.add_argument("--alpha", type=float, default=0.4, help="EMA weight for slow gaze movement")
    g.add_argument("--saccade-speed", type=float, default=700.0, help="px/s above which the filter resets")


def build_parser():
    seed = _default_seed()
    parser = argparse.ArgumentParser(
        prog="foveastream",
        description="Foveated streaming simulator and gaze analytics.",
        formatter_class=_formatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({backend_name()})")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    leaves = {}

    p = sub.add_parser("offsetmap", help="write a QP-offset map (or a savings sweep)", formatter_class=_formatter)
    _add_common(p, seed)
    _add_grid(p)
    _add_foveation(p)
    _add_rate(p)
    p.add_argument("--gaze-x", type=float, default=None, help="gaze x in pixels (default: frame centre)")
    p.add_argument("--gaze-y", type=float, default=None, help="gaze y in pixels (default: frame centre)")
    p.add_argument(
        "--sweep",
        action="append",
        default=None,
        metavar="PARAM=V1,V2,...",
        help="sweep qo_max, w_frac or w_px; repeatable (cartesian product); writes a sweep CSV",
    )
    p.add_argument("--out", default=None, help="output path stem: writes STEM.csv and STEM.pgm (sweep: STEM.csv)")
    p.set_defaults(func=cmd_offsetmap)
    leaves["offsetmap"] = p

    p = sub.add_parser("simulate", help="replay a gaze trace through the streaming simulator", formatter_class=_formatter)
    _add_common(p, seed)
    _add_trace_input(p, required=False)
    p.add_argument("--synthetic", choices=SYNTHETIC_KINDS, default=None, help="generate the trace instead")
    p.add_argument("--trace-rate", type=float, default=90.0, help="synthetic trace sampling rate, Hz")
    _add_grid(p)
    _add_foveation(p)
    _add_rate(p)
    _add_filter(p)
    g = p.add_argument_group("channel")
    g.add_argument("--latency-ms", type=float, default=0.0, help="one-way base latency")
    g.add_argument("--jitter-ms", type=float, default=0.0, help="half-width of uniform jitter")
    g.add_argument("--loss", type=float, default=0.0, help="independent loss probability")
    p.add_argument("--fps", type=float, default=40.0, help="encoder frame rate")
    p.add_argument("--duration", type=float, default=None, help="seconds to simulate (default: trace span)")
    p.add_argument("--out-jsonl", default=None, help="per-frame records as JSON lines")
    p.add_argument("--out-csv", default=None, help="per-frame records as CSV")
    p.add_argument("--summary", default=None, help="summary JSON path (default: stdout)")
    p.set_defaults(func=cmd_simulate)
    leaves["simulate"] = p

    p = sub.add_parser("analyze", help="gaze-trace analytics", formatter_class=_formatter)
    asub = p.add_subparsers(dest="analysis", metavar="ANALYSIS")
    asub.required = True

    a = asub.add_parser("moments", help="gaze moments inside a circular region", formatter_class=_formatter)
    _add_common(a, seed)
    _add_trace_input(a)
    _add_grid(a)
    a.add_argument("--radius", type=float, default=None, help="region radius in pixels")
    a.add_argument("--w-frac", type=float, default=0.125, help="used when --radius is absent: radius = W/2")
    a.add_argument("--out", default=None, help="moments CSV")
    a.set_defaults(func=cmd_moments)
    leaves["analyze.moments"] = a

    a = asub.add_parser("rate", help="gaze change rate between consecutive samples", formatter_class=_formatter)
    _add_common(a, seed)
    _add_trace_input(a)
    _add_grid(a)
    a.add_argument("--out", default=None, help="one px/s value per line")
    a.set_defaults(func=cmd_rate)
    leaves["analyze.rate"] = a

    a = asub.add_parser("heatmap", help="normalized Gaussian KDE heatmap", formatter_class=_formatter)
    _add_common(a, seed)
    _add_trace_input(a)
    _add_grid(a)
    a.add_argument("--bin-size", type=float, default=16.0, help="heatmap bin size in pixels")
    a.add_argument("--bandwidth", type=float, default=None, help="kernel std dev in pixels (default: FW/64)")
    a.add_argument("--out", default=None, help="output path stem: writes STEM.csv and STEM.pgm")
    a.set_defaults(func=cmd_heatmap)
    leaves["analyze.heatmap"] = a

    a = asub.add_parser("ecdf", help="empirical CDF of change rates, moment durations or a value file", formatter_class=_formatter)
    _add_common(a, seed)
    _add_trace_input(a)
    _add_grid(a)
    a.add_argument("--of", choices=("rate", "moments", "values"), default="rate", help="what to take the ECDF of")
    a.add_argument("--values", default=None, help="file with one number per line (for --of values)")
    a.add_argument("--radius", type=float, default=None, help="moment radius in pixels (for --of moments)")
    a.add_argument("--w-frac", type=float, default=0.125, help="moment radius W/2 when --radius is absent")
    a.add_argument("--out", default=None, help="ECDF CSV (value,fraction)")
    a.set_defaults(func=cmd_ecdf)
    leaves["analyze.ecdf"] = a

    p = sub.add_parser("generate", help="write a synthetic gaze trace CSV", formatter_class=_formatter)
    _add_common(p, seed)
    _add_grid(p)
    p.add_argument("--kind", choices=SYNTHETIC_KINDS, default="random_walk", help="trace shape")
    p.add_argument("--duration", type=float, default=10.0, help="seconds")
    p.add_argument("--trace-rate", type=float, default=90.0, help="sampling rate, Hz")
    p.add_argument("--out", default=None, help="trace CSV ('-' for stdout)")
    p.set_defaults(func=cmd_generate)
    leaves["generate"] = p

    p = sub.add_parser("send", help="stream a trace as gaze datagrams over UDP", formatter_class=_formatter)
    _add_common(p, seed)
    _add_trace_input(p)
    _add_grid(p)
    p.add_argument("--host", default=DEFAULT_HOST, help="receiver host")
    p.add_argument("--port", type=int, default=DEFAULT_PORT, help="receiver UDP port")
    p.add_argument("--pace", action=argparse.BooleanOptionalAction, default=True, help="send in real time")
    p.set_defaults(func=cmd_send)
    leaves["send"] = p

    p = sub.add_parser("serve", help="receive gaze datagrams into a latest-wins cell", formatter_class=_formatter)
    _add_common(p, seed)
    _add_grid(p)
    p.add_argument("--host", default=DEFAULT_HOST, help="bind address")
    p.add_argument("--port", type=int, default=DEFAULT_PORT, help="UDP port")
    p.add_argument("--count", type=int, default=None, help="stop after this many datagrams")
    p.add_argument("--timeout", type=float, default=5.0, help="stop after this many idle seconds")
    p.add_argument("--out", default=None, help="accepted gaze as CSV (default: stdout)")
    p.set_defaults(func=cmd_serve)
    leaves["serve"] = p

    return parser, leaves


# ----------------------------------------------------------------- config


def _load_toml(path):
    if sys.version_info >= (3, 11):
        import tomllib
    else:
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _leaf_key(args):
    return f"analyze.{args.analysis}" if args.command == "analyze" else args.command


def _apply_config(parser, leaves, args, argv):
    try:
        data = _load_toml(args.config)
    except OSError as exc:
        parser.error(f"cannot read config {args.config}: {exc}")
    except ValueError as exc:
        parser.error(f"bad config {args.config}: {exc}")
    key = _leaf_key(args)
    leaf = leaves[key]
    def dests_of(p):
        return {a.dest for a in p._actions} - {"help", "config", "func"}

    dests = dests_of(leaf)
    known = set().union(*(dests_of(p) for p in leaves.values()))
    defaults = {}
    # Shared top-level keys only need to make sense for some subcommand.
    for k, v in data.items():
        if isinstance(v, dict):
            continue
        dest = k.replace("-", "_")
        if dest not in known:
            leaf.error(f"unknown config key {k!r} in {args.config}")
        if dest in dests:
            defaults[dest] = v
    table = data
    for part in key.split("."):
        table = table.get(part, {}) if isinstance(table, dict) else {}
    for k, v in table.items():
        if isinstance(v, dict):
            continue
        dest = k.replace("-", "_")
        if dest not in dests:
            leaf.error(f"unknown config key {k!r} in [{key}] of {args.config}")
        defaults[dest] = v
    leaf.set_defaults(**defaults)
    return parser.parse_args(argv)


@contextmanager
def _flag_values():
    """Domain errors raised while turning flags into configs are usage errors."""
    try:
        yield
    except DomainError as exc:
        raise UsageError(str(exc)) from None


def _require(args, *names):
    missing = [n for n in names if getattr(args, n.replace("-", "_")) is None]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join('--' + m for m in missing)}")


# ---------------------------------------------------------------- helpers


def _grid(args):
    with _flag_values():
        return GridSpec(args.width, args.height, args.mb_size)


def _fov(args, **overrides):
    kw = dict(qo_max=args.qo_max, base_qp=args.base_qp)
    if args.w_px is not None:
        kw["w_px"] = args.w_px
    else:
        kw["w_fraction"] = args.w_frac
    kw.update(overrides)
    if "w_px" in overrides:
        kw.pop("w_fraction", None)
    if "w_fraction" in overrides:
        kw.pop("w_px", None)
    return FoveationParams(**kw)


def _rate(args, grid):
    with _flag_values():
        RateModel(args.ref_bits, args.halving_step)
    weights = load_weight_map(args.weights, grid) if args.weights else None
    return RateModel(args.ref_bits, args.halving_step, weights)


def _trace(args, grid):
    _require(args, "trace")
    if args.trace == "-":
        return read_trace(sys.stdin, grid, source="<stdin>")
    return load_trace(args.trace, grid)


def _stem(path, *exts):
    for ext in exts:
        if path.endswith(ext):
            return path[: -len(ext)]
    return path


def _parse_sweep(specs):
    axes = []
    for spec in specs:
        name, sep, raw = spec.partition("=")
        name = name.strip().replace("-", "_")
        if not sep or name not in {"qo_max", "w_frac", "w_px"}:
            raise UsageError(f"bad --sweep {spec!r}; expected qo_max=..., w_frac=... or w_px=...")
        try:
            vals = [float(v) for v in raw.split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"bad --sweep values in {spec!r}") from None
        if not vals:
            raise UsageError(f"--sweep {spec!r} lists no values")
        axes.append((name, vals))
    return axes


def _sweep_params(args, axes):
    combos = [{}]
    for name, vals in axes:
        combos = [dict(c, **{name: v}) for c in combos for v in vals]
    out = []
    for c in combos:
        over = {}
        if "qo_max" in c:
            over["qo_max"] = c["qo_max"]
        if "w_px" in c:
            over["w_px"] = c["w_px"]
        elif "w_frac" in c:
            over["w_fraction"] = c["w_frac"]
        out.append(_fov(args, **over))
    return out


def _write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


# --------------------------------------------------------------- commands


def cmd_offsetmap(args):
    _require(args, "out")
    with _flag_values():
        grid = _grid(args)
        gx = args.gaze_x if args.gaze_x is not None else grid.center.x_px
        gy = args.gaze_y if args.gaze_y is not None else grid.center.y_px
        gaze = clamp_to_frame(grid, PixelPoint(gx, gy))
        params = _sweep_params(args, _parse_sweep(args.sweep)) if args.sweep else [_fov(args)]
    stem = _stem(args.out, ".csv", ".pgm")
    if args.sweep:
        rows = savings_sweep(grid, params, gaze, _rate(args, grid))
        write_sweep_csv(rows, stem + ".csv")
        for r in rows:
            print(f"qo_max={r.qo_max:g} w_px={r.w_px:g} savings={r.savings_fraction:.6f}")
        return 0
    omap = compute_offset_map(grid, params[0], gaze)
    omap.to_csv(stem + ".csv")
    omap.to_pgm(stem + ".pgm")
    print(f"mean_offset {omap.mean_offset:.6f}")
    return 0


def cmd_simulate(args):
    with _flag_values():
        grid = _grid(args)
        fov = _fov(args)
        channel = ChannelSpec(args.latency_ms, args.jitter_ms, args.loss, args.seed)
        filt = FilterParams(args.alpha, args.saccade_speed) if args.filter else None
    rate = _rate(args, grid)
    with _flag_values():
        config = SessionConfig(grid, fov, rate, channel, filt, args.fps, args.duration, args.seed)
    if args.synthetic:
        if args.trace is not None:
            raise UsageError("give either --trace or --synthetic, not both")
        duration = args.duration if args.duration is not None else 10.0
        with _flag_values():
            trace = generate_synthetic_trace(
                args.synthetic, duration, args.trace_rate, args.seed, grid
            )
    else:
        trace = _trace(args, grid)
    records = run_session(trace, config)
    if args.out_jsonl:
        _write_text(args.out_jsonl, records_to_jsonl(records))
    if args.out_csv:
        _write_text(args.out_csv, records_to_csv(records))
    _write_text(args.summary, session_summary(records).to_json() + "\n")
    return 0


def _radius(args):
    radius = args.radius if args.radius is not None else moment_radius_for_w(args.w_frac * args.width)
    if not radius > 0:
        raise UsageError(f"moment radius must be > 0, got {radius}")
    return radius


def cmd_moments(args):
    _require(args, "out")
    grid = _grid(args)
    moments = gaze_moments(_trace(args, grid), _radius(args))
    write_moments_csv(moments, args.out)
    print(f"{len(moments)} moments")
    return 0


def cmd_rate(args):
    _require(args, "out")
    grid = _grid(args)
    write_values(change_rate(_trace(args, grid)), args.out)
    return 0


def cmd_heatmap(args):
    _require(args, "out")
    with _flag_values():
        grid = _grid(args)
    bw = args.bandwidth if args.bandwidth is not None else default_bandwidth_px(grid)
    if not (args.bin_size > 0 and bw > 0):
        raise UsageError("--bin-size and --bandwidth must be > 0")
    hm = heatmap(_trace(args, grid), grid, args.bin_size, bw)
    stem = _stem(args.out, ".csv", ".pgm")
    hm.to_csv(stem + ".csv")
    hm.to_pgm(stem + ".pgm")
    return 0


def _read_values(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(float(line))
            except ValueError:
                raise DomainError(f"{path}: line {lineno}: not a number: {line!r}") from None
    return out


def cmd_ecdf(args):
    _require(args, "out")
    grid = _grid(args)
    if args.of == "values":
        _require(args, "values")
        values = _read_values(args.values)
    elif args.of == "rate":
        values = change_rate(_trace(args, grid))
    else:
        values = [m.duration_us for m in gaze_moments(_trace(args, grid), _radius(args))]
    write_ecdf_csv(ecdf(values), args.out)
    return 0


def cmd_generate(args):
    _require(args, "out")
    with _flag_values():
        grid = _grid(args)
        trace = generate_synthetic_trace(args.kind, args.duration, args.trace_rate, args.seed, grid)
    write_trace(trace, sys.stdout if args.out == "-" else args.out)
    return 0


def cmd_send(args):
    grid = _grid(args)
    trace = _trace(args, grid)
    n = send_datagrams(trace_to_messages(trace), args.host, args.port, pace=args.pace)
    print(f"sent {n} datagrams to {args.host}:{args.port}", file=sys.stderr)
    return 0


def cmd_serve(args):
    grid = _grid(args)
    cell = LatestGazeCell()
    out = sys.stdout if args.out in (None, "-") else open(args.out, "w", encoding="ascii", newline="\n")
    lock = threading.Lock()

    def accept(msg):
        p = from_wire_coords(grid, msg.x_norm, msg.y_norm)
        with lock:
            out.write(f"{msg.seq},{msg.timestamp_us},{p.x_px:.3f},{p.y_px:.3f}\n")
            out.flush()

    def reject(exc):
        print(f"dropped datagram: {exc}", file=sys.stderr)

    try:
        out.write("seq,timestamp_us,x_px,y_px\n")
        received, accepted = receive_datagrams(
            cell, args.host, args.port, args.count, args.timeout, accept, reject
        )
    finally:
        if out is not sys.stdout:
            out.close()
    print(f"received {received}, accepted {accepted}", file=sys.stderr)
    return 0


# ------------------------------------------------------------------- main


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser, leaves = build_parser()
    except UsageError as exc:
        print(f"foveastream: error: {exc}", file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.config:
            args = _apply_config(parser, leaves, args, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    leaf = leaves[_leaf_key(args)]
    try:
        return args.func(args)
    except UsageError as exc:
        leaf.print_usage(sys.stderr)
        print(f"{leaf.prog}: error: {exc}", file=sys.stderr)
        return 2
    except (FoveaStreamError, OSError) as exc:
        print(f"{leaf.prog}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
