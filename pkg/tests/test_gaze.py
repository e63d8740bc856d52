import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from foveastream import (
    DomainError,
    FilterParams,
    GazeTrace,
    GridSpec,
    TraceParseError,
    generate_synthetic_trace,
    light_filter,
    load_trace,
)
from foveastream.errors import TraceValidationError
from foveastream.gaze import SYNTHETIC_KINDS, read_trace, write_trace


def write(tmp_path, text, name="t.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_three_rows(tmp_path):
    tr = load_trace(write(tmp_path, "timestamp_us,x_px,y_px\n0,1.5,2\n11111,3,4.25\n22222,5,6\n"))
    assert len(tr) == 3
    assert tr.seq.tolist() == [0, 1, 2]
    assert tr[1].point.x_px == 3.0 and tr[1].timestamp_us == 11111 and tr[1].valid


def test_load_backwards_timestamp_cites_line(tmp_path):
    text = "timestamp_us,x_px,y_px\n0,1,1\n10,1,1\n20,1,1\n15,1,1\n30,1,1\n"
    with pytest.raises(TraceValidationError, match="line 5") as exc:
        load_trace(write(tmp_path, text))
    assert exc.value.line == 5


def test_load_duplicate_timestamp_rejected(tmp_path):
    with pytest.raises(TraceValidationError, match="line 3"):
        load_trace(write(tmp_path, "timestamp_us,x_px,y_px\n0,1,1\n0,2,2\n"))


def test_load_header_only_is_empty(tmp_path):
    assert len(load_trace(write(tmp_path, "timestamp_us,x_px,y_px\n"))) == 0


@pytest.mark.parametrize(
    "text, line",
    [
        ("", 1),
        ("t,x,y\n0,1,1\n", 1),
        ("timestamp_us,x_px,y_px\n0,1\n", 2),
        ("timestamp_us,x_px,y_px\n0,1,1\n1.5,1,1\n", 3),
        ("timestamp_us,x_px,y_px\n0,abc,1\n", 2),
        ("timestamp_us,x_px,y_px\n0,nan,1\n", 2),
        ("timestamp_us,x_px,y_px,valid\n0,1,1,maybe\n", 2),
    ],
)
def test_load_malformed(tmp_path, text, line):
    with pytest.raises(TraceParseError) as exc:
        load_trace(write(tmp_path, text))
    assert exc.value.line == line


def test_valid_column(tmp_path):
    tr = load_trace(write(tmp_path, "timestamp_us,x_px,y_px,valid\n0,1,1,1\n5,2,2,0\n9,3,3,true\n"))
    assert tr.valid.tolist() == [True, False, True]
    assert len(tr.only_valid()) == 2


def test_write_read_roundtrip(hd):
    tr = generate_synthetic_trace("random_walk", 2, 90, 1, hd)
    buf = io.StringIO()
    write_trace(tr, buf)
    back = read_trace(io.StringIO(buf.getvalue()), hd)
    assert back.timestamp_us.tolist() == tr.timestamp_us.tolist()
    np.testing.assert_allclose(back.x_px, tr.x_px, atol=5e-4)
    assert buf.getvalue().startswith("timestamp_us,x_px,y_px\n")


def test_trace_is_immutable(hd):
    tr = generate_synthetic_trace("fixate", 1, 90, 0, hd)
    with pytest.raises(ValueError):
        tr.x_px[0] = 3


def test_trace_rejects_unordered(hd):
    with pytest.raises(DomainError):
        GazeTrace.from_arrays(hd, [0, 5, 5], [1, 1, 1], [1, 1, 1])


# ---- light filter


def test_filter_constant_trace_is_fixed_point(hd):
    tr = generate_synthetic_trace("fixate", 2, 90, 0, hd)
    out = light_filter(tr, FilterParams())
    np.testing.assert_array_equal(out.x_px, tr.x_px)
    np.testing.assert_array_equal(out.y_px, tr.y_px)


def test_filter_saccade_resets(hd):
    tr = GazeTrace.from_arrays(hd, [0, 10_000, 20_000], [100, 100, 600], [200, 200, 200])
    out = light_filter(tr, FilterParams())
    assert out.x_px.tolist() == [100, 100, 600]


def test_filter_slow_move_is_smoothed(hd):
    tr = GazeTrace.from_arrays(hd, [0, 100_000], [100, 110], [200, 200])
    out = light_filter(tr, FilterParams(alpha_slow=0.4))
    assert out.x_px[1] == pytest.approx(104.0)


def test_filter_first_sample_and_metadata_preserved(hd):
    tr = generate_synthetic_trace("random_walk", 3, 90, 5, hd)
    out = light_filter(tr, FilterParams())
    assert out[0] == tr[0]
    np.testing.assert_array_equal(out.timestamp_us, tr.timestamp_us)
    np.testing.assert_array_equal(out.seq, tr.seq)
    assert len(out) == len(tr)


def test_filter_alpha_one_is_passthrough(hd):
    tr = generate_synthetic_trace("random_walk", 3, 90, 5, hd)
    out = light_filter(tr, FilterParams(alpha_slow=1.0))
    np.testing.assert_array_equal(out.x_px, tr.x_px)


def test_filter_reduces_noise_about_drift(hd):
    rng = np.random.default_rng(99)
    n = 900
    t = np.arange(n) * 11_111
    drift_x = 500 + 0.05 * np.arange(n)
    x = drift_x + rng.normal(0, 2.0, n)
    y = 400 + rng.normal(0, 2.0, n)
    tr = GazeTrace.from_arrays(hd, t, x, y)
    out = light_filter(tr, FilterParams())
    assert np.var(out.x_px - drift_x) < np.var(x - drift_x)
    assert np.var(out.y_px - 400) < np.var(y - 400)


def test_filter_skips_invalid(hd):
    tr = GazeTrace.from_arrays(
        hd, [0, 100_000, 200_000], [100, 5000, 110], [200, 5000, 200], valid=[True, False, True]
    )
    out = light_filter(tr, FilterParams(alpha_slow=0.5))
    assert out.x_px.tolist() == [100, 5000, 105]


@pytest.mark.parametrize("kw", [dict(alpha_slow=0), dict(alpha_slow=1.2), dict(saccade_speed_px_s=0)])
def test_filter_bad_params(kw):
    with pytest.raises(DomainError):
        FilterParams(**kw)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.tuples(st.floats(0, 1919), st.floats(0, 1079), st.integers(1, 50_000)), min_size=1, max_size=60),
    st.floats(0.01, 1.0),
    st.floats(1, 5000),
)
def test_filter_stays_in_hull(points, alpha, vmax):
    hd = GridSpec(1920, 1080)
    t = np.cumsum([dt for _, _, dt in points])
    tr = GazeTrace.from_arrays(hd, t, [p[0] for p in points], [p[1] for p in points])
    out = light_filter(tr, FilterParams(alpha, vmax))
    for k in range(len(tr)):
        seen_x = tr.x_px[: k + 1]
        seen_y = tr.y_px[: k + 1]
        assert seen_x.min() - 1e-9 <= out.x_px[k] <= seen_x.max() + 1e-9
        assert seen_y.min() - 1e-9 <= out.y_px[k] <= seen_y.max() + 1e-9


# ---- synthetic traces


def test_fixate_one_second(hd):
    tr = generate_synthetic_trace("fixate", 1, 90, 0, hd)
    assert len(tr) == 90
    assert set(tr.x_px.tolist()) == {960.0} and set(tr.y_px.tolist()) == {540.0}


@pytest.mark.parametrize("kind", SYNTHETIC_KINDS)
def test_same_seed_same_trace(hd, kind):
    a = generate_synthetic_trace(kind, 3, 90, 42, hd)
    b = generate_synthetic_trace(kind, 3, 90, 42, hd)
    np.testing.assert_array_equal(a.x_px, b.x_px)
    np.testing.assert_array_equal(a.timestamp_us, b.timestamp_us)
    assert len(a) == 270


def test_random_walk_in_bounds(hd):
    tr = generate_synthetic_trace("random_walk", 10, 90, 7, hd)
    assert len(tr) == 900
    assert tr.x_px.min() >= 0 and tr.x_px.max() <= 1919
    assert tr.y_px.min() >= 0 and tr.y_px.max() <= 1079


def test_random_walk_seed_matters(hd):
    a = generate_synthetic_trace("random_walk", 3, 90, 1, hd)
    b = generate_synthetic_trace("random_walk", 3, 90, 2, hd)
    assert not np.array_equal(a.x_px, b.x_px)


def test_step_alternates(hd):
    tr = generate_synthetic_trace("step", 2, 10, 0, hd)
    assert tr.x_px.tolist() == [480.0] * 10 + [1440.0] * 10


@pytest.mark.parametrize(
    "args", [("blink", 1, 90), ("fixate", 0, 90), ("fixate", 1, 0), ("fixate", 1, 2e6)]
)
def test_generator_rejects(hd, args):
    with pytest.raises(DomainError):
        generate_synthetic_trace(*args, 0, hd)
