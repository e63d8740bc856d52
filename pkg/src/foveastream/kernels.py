"""Hot inner loops, each in two flavours.

``*_loop`` functions are written in the numba-compatible subset and get
compiled with ``@njit`` when numba is enabled. ``*_numpy`` functions are the
fallback path: vectorised numpy where the algorithm allows it, plain Python
loops over lists where it is inherently sequential (greedy segmentation, the
reset-gated EMA). Both flavours use the same arithmetic expressions so they
agree to the last few ulps; the public names at the bottom of this module
point at whichever flavour ``_accel.USE_NUMBA`` selects.
"""

import math

import numpy as np

from ._accel import NUMBA_AVAILABLE, USE_NUMBA, njit

__all__ = [
    "offset_map",
    "moment_starts",
    "light_filter",
    "kde_grid",
    "offset_map_numpy",
    "moment_starts_numpy",
    "light_filter_numpy",
    "kde_grid_numpy",
    "offset_map_numba",
    "moment_starts_numba",
    "light_filter_numba",
    "kde_grid_numba",
]


# ---------------------------------------------------------------- offsets


def offset_map_loop(cols, rows, gx, gy, qo_max, w_mb):
    out = np.empty((rows, cols), dtype=np.float64)
    denom = 2.0 * w_mb * w_mb
    for j in range(rows):
        dy = float(j - gy)
        for i in range(cols):
            dx = float(i - gx)
            out[j, i] = qo_max * -math.expm1(-((dx * dx + dy * dy) / denom))
    return out


def offset_map_numpy(cols, rows, gx, gy, qo_max, w_mb):
    dx = np.arange(cols, dtype=np.float64) - gx
    dy = np.arange(rows, dtype=np.float64)[:, None] - gy
    denom = 2.0 * w_mb * w_mb
    return qo_max * -np.expm1(-((dx * dx + dy * dy) / denom))


# ---------------------------------------------------------------- moments


def moment_starts_loop(x, y, radius_sq):
    n = x.shape[0]
    starts = np.empty(n, dtype=np.int64)
    if n == 0:
        return starts
    starts[0] = 0
    m = 1
    ax = x[0]
    ay = y[0]
    for k in range(1, n):
        dx = x[k] - ax
        dy = y[k] - ay
        if dx * dx + dy * dy > radius_sq:
            starts[m] = k
            m += 1
            ax = x[k]
            ay = y[k]
    return starts[:m]


def moment_starts_numpy(x, y, radius_sq):
    xs = np.asarray(x, dtype=np.float64).tolist()
    ys = np.asarray(y, dtype=np.float64).tolist()
    if not xs:
        return np.empty(0, dtype=np.int64)
    starts = [0]
    ax, ay = xs[0], ys[0]
    for k in range(1, len(xs)):
        dx = xs[k] - ax
        dy = ys[k] - ay
        if dx * dx + dy * dy > radius_sq:
            starts.append(k)
            ax, ay = xs[k], ys[k]
    return np.asarray(starts, dtype=np.int64)


# ----------------------------------------------------------------- filter


def light_filter_loop(t, x, y, valid, alpha, max_speed):
    n = x.shape[0]
    ox = x.copy()
    oy = y.copy()
    have_prev = False
    pt = 0
    px = 0.0
    py = 0.0
    qx = 0.0
    qy = 0.0
    for k in range(n):
        if not valid[k]:
            continue
        if have_prev:
            dt = (t[k] - pt) / 1e6
            dx = x[k] - px
            dy = y[k] - py
            speed = math.sqrt(dx * dx + dy * dy) / dt
            if speed <= max_speed and alpha < 1.0:
                ox[k] = qx + alpha * (x[k] - qx)
                oy[k] = qy + alpha * (y[k] - qy)
        have_prev = True
        pt = t[k]
        px = x[k]
        py = y[k]
        qx = ox[k]
        qy = oy[k]
    return ox, oy


def light_filter_numpy(t, x, y, valid, alpha, max_speed):
    ts = np.asarray(t, dtype=np.int64).tolist()
    xs = np.asarray(x, dtype=np.float64).tolist()
    ys = np.asarray(y, dtype=np.float64).tolist()
    ok = np.asarray(valid, dtype=bool).tolist()
    ox = list(xs)
    oy = list(ys)
    prev = None
    for k in range(len(xs)):
        if not ok[k]:
            continue
        if prev is not None:
            pt, px, py, qx, qy = prev
            dx = xs[k] - px
            dy = ys[k] - py
            speed = math.sqrt(dx * dx + dy * dy) / ((ts[k] - pt) / 1e6)
            if speed <= max_speed and alpha < 1.0:
                ox[k] = qx + alpha * (xs[k] - qx)
                oy[k] = qy + alpha * (ys[k] - qy)
        prev = (ts[k], xs[k], ys[k], ox[k], oy[k])
    return np.asarray(ox, dtype=np.float64), np.asarray(oy, dtype=np.float64)


# -------------------------------------------------------------------- KDE


def kde_grid_loop(cx, cy, x, y, bandwidth):
    ny = cy.shape[0]
    nx = cx.shape[0]
    out = np.zeros((ny, nx), dtype=np.float64)
    denom = 2.0 * bandwidth * bandwidth
    for s in range(x.shape[0]):
        sx = x[s]
        sy = y[s]
        for b in range(ny):
            dy = cy[b] - sy
            dy2 = dy * dy
            for a in range(nx):
                dx = cx[a] - sx
                out[b, a] += math.exp(-((dx * dx + dy2) / denom))
    return out


def kde_grid_numpy(cx, cy, x, y, bandwidth):
    cx = np.asarray(cx, dtype=np.float64)
    cy = np.asarray(cy, dtype=np.float64)
    out = np.zeros((cy.shape[0], cx.shape[0]), dtype=np.float64)
    denom = 2.0 * bandwidth * bandwidth
    # One sample at a time keeps the per-bin summation order fixed.
    for sx, sy in zip(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)):
        dx = cx - sx
        dy = cy - sy
        out += np.exp(-((dx * dx + (dy * dy)[:, None]) / denom))
    return out


if NUMBA_AVAILABLE:
    offset_map_numba = njit(offset_map_loop)
    moment_starts_numba = njit(moment_starts_loop)
    light_filter_numba = njit(light_filter_loop)
    kde_grid_numba = njit(kde_grid_loop)
else:  # pragma: no cover
    offset_map_numba = moment_starts_numba = light_filter_numba = kde_grid_numba = None

if USE_NUMBA:
    offset_map = offset_map_numba
    moment_starts = moment_starts_numba
    light_filter = light_filter_numba
    kde_grid = kde_grid_numba
else:
    offset_map = offset_map_numpy
    moment_starts = moment_starts_numpy
    light_filter = light_filter_numpy
    kde_grid = kde_grid_numpy
