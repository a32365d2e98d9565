"""Hot numeric kernels: exact nearest-neighbor queries, fused grid-day metric
sums, and Gaussian hotspot evaluation.

Each kernel has a numba ``@njit`` implementation and a pure-numpy fallback.
The active path is chosen at import time: numba is used when importable
unless ``AQNETSIM_NO_NUMBA=1`` (or ``true``/``yes``) is set, in which case
the numpy path runs. Both paths are always importable so the benchmark in
``benchmarks/bench_kernels.py`` can compare them in one process.

Exactness notes:
- nearest-neighbor ties are broken by the lowest candidate index, via a
  lexicographic (squared distance, index) comparison; both paths use the
  same per-pair float arithmetic, so their results agree bit-for-bit.
- the weighted 95th-percentile walk accumulates weights in sorted-value
  order in both paths, so the returned percentile is also bit-identical.
Other reductions may differ between paths in the last ulps because the
summation order differs.
"""

from __future__ import annotations

import os

import numpy as np

_ENV_FLAG = "AQNETSIM_NO_NUMBA"
NUMBA_DISABLED = os.environ.get(_ENV_FLAG, "").strip().lower() in {"1", "true", "yes"}

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


USE_NUMBA = HAS_NUMBA and not NUMBA_DISABLED


def active_backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# Exact nearest neighbor (uniform bucket grid on the numba path)
# ---------------------------------------------------------------------------


def _build_buckets(ix: np.ndarray, iy: np.ndarray):
    """Counting-sort points into a square bucket grid sized ~1 point/bucket.

    Returns (xmin, ymin, cell, nbx, nby, starts, items); ``items`` holds
    point indices grouped by bucket, ascending within each bucket.
    """
    n = ix.shape[0]
    side = max(1, int(np.ceil(np.sqrt(n))))
    xmin = float(ix.min())
    ymin = float(iy.min())
    span = max(float(ix.max()) - xmin, float(iy.max()) - ymin)
    cell = span / side if span > 0.0 else 1.0
    nbx = min(side, int((float(ix.max()) - xmin) / cell) + 1)
    nby = min(side, int((float(iy.max()) - ymin) / cell) + 1)
    bx = np.minimum(((ix - xmin) / cell).astype(np.int64), nbx - 1)
    by = np.minimum(((iy - ymin) / cell).astype(np.int64), nby - 1)
    flat = by * nbx + bx
    counts = np.bincount(flat, minlength=nbx * nby)
    starts = np.zeros(nbx * nby + 1, dtype=np.int64)
    np.cumsum(counts, out=starts[1:])
    items = np.argsort(flat, kind="stable").astype(np.int64)
    return xmin, ymin, cell, nbx, nby, starts, items


@njit(cache=True)
def _nearest_bucket_numba(qx, qy, ix, iy, xmin, ymin, cell, nbx, nby, starts, items,
                          out_idx, out_d2):  # pragma: no cover - exercised via dispatch
    nq = qx.shape[0]
    for qi in range(nq):
        px = qx[qi]
        py = qy[qi]
        bx = int((px - xmin) / cell)
        if bx < 0:
            bx = 0
        elif bx >= nbx:
            bx = nbx - 1
        by = int((py - ymin) / cell)
        if by < 0:
            by = 0
        elif by >= nby:
            by = nby - 1
        best_d2 = np.inf
        best_i = -1
        max_r = max(max(bx, nbx - 1 - bx), max(by, nby - 1 - by))
        for r in range(max_r + 1):
            if r > 0:
                # Every bucket at Chebyshev ring >= r lies outside the square
                # covering rings < r; if the query sits inside that square by
                # margin m, no farther bucket can beat a best within m.
                lo_x = xmin + (bx - (r - 1)) * cell
                hi_x = xmin + (bx + r) * cell
                lo_y = ymin + (by - (r - 1)) * cell
                hi_y = ymin + (by + r) * cell
                margin = px - lo_x
                if hi_x - px < margin:
                    margin = hi_x - px
                if py - lo_y < margin:
                    margin = py - lo_y
                if hi_y - py < margin:
                    margin = hi_y - py
                if margin > 0.0 and margin * margin > best_d2:
                    break
            x0 = bx - r
            x1 = bx + r
            y0 = by - r
            y1 = by + r
            for cx in range(x0, x1 + 1):
                if cx < 0 or cx >= nbx:
                    continue
                for cy in (y0, y1):
                    if cy < 0 or cy >= nby:
                        continue
                    b = cy * nbx + cx
                    for t in range(starts[b], starts[b + 1]):
                        i = items[t]
                        dx = px - ix[i]
                        dy = py - iy[i]
                        d2 = dx * dx + dy * dy
                        if d2 < best_d2 or (d2 == best_d2 and i < best_i):
                            best_d2 = d2
                            best_i = i
                    if y0 == y1:
                        break
            for cy in range(y0 + 1, y1):
                if cy < 0 or cy >= nby:
                    continue
                for cx in (x0, x1):
                    if cx < 0 or cx >= nbx:
                        continue
                    b = cy * nbx + cx
                    for t in range(starts[b], starts[b + 1]):
                        i = items[t]
                        dx = px - ix[i]
                        dy = py - iy[i]
                        d2 = dx * dx + dy * dy
                        if d2 < best_d2 or (d2 == best_d2 and i < best_i):
                            best_d2 = d2
                            best_i = i
                    if x0 == x1:
                        break
        out_idx[qi] = best_i
        out_d2[qi] = best_d2


def _nearest_numpy(qx, qy, ix, iy, out_idx, out_d2, chunk=4096):
    # Chunked brute force; argmin keeps the first (lowest-index) minimum.
    nq = qx.shape[0]
    for s in range(0, nq, chunk):
        e = min(s + chunk, nq)
        dx = qx[s:e, None] - ix[None, :]
        dy = qy[s:e, None] - iy[None, :]
        d2 = dx * dx + dy * dy
        k = np.argmin(d2, axis=1)
        out_idx[s:e] = k
        out_d2[s:e] = d2[np.arange(e - s), k]


def nearest_neighbor(qx, qy, ix, iy, force: str | None = None):
    """Exact nearest neighbor of each query among (ix, iy) points.

    Ties on squared distance go to the lowest point index. Returns
    (indices int64, distances float64). ``force`` overrides the backend
    ("numba" or "numpy") for tests and benchmarks.
    """
    qx = np.ascontiguousarray(qx, dtype=np.float64)
    qy = np.ascontiguousarray(qy, dtype=np.float64)
    ix = np.ascontiguousarray(ix, dtype=np.float64)
    iy = np.ascontiguousarray(iy, dtype=np.float64)
    if ix.shape[0] == 0:
        raise ValueError("nearest_neighbor requires at least one candidate point")
    out_idx = np.empty(qx.shape[0], dtype=np.int64)
    out_d2 = np.empty(qx.shape[0], dtype=np.float64)
    backend = force or active_backend()
    if backend == "numba":
        if not HAS_NUMBA:
            raise RuntimeError("numba backend requested but numba is unavailable")
        xmin, ymin, cell, nbx, nby, starts, items = _build_buckets(ix, iy)
        _nearest_bucket_numba(qx, qy, ix, iy, xmin, ymin, cell, nbx, nby,
                              starts, items, out_idx, out_d2)
    elif backend == "numpy":
        _nearest_numpy(qx, qy, ix, iy, out_idx, out_d2)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return out_idx, np.sqrt(out_d2)


# ---------------------------------------------------------------------------
# Fused per-scenario metric sums over grid-day matrices
# ---------------------------------------------------------------------------

# Accumulator layout returned by scenario_sums (all float64):
#   0 w_days       total weight over masked grid-days
#   1 abs_sum      sum of w * |shown - true|
#   2 under_w      weight where true class > shown class
#   3 over_w       weight where shown class > true class
#   4 gap2_w       weight where |class gap| >= 2
#   5 unhealthy_w  weight where true class is orange or worse
#   6 uhm_w        weight where truly unhealthy but shown healthy
#   7 err_w        weight over sensor-served grid-days
#   8 err_sum      sum of w * sensor error
#   9 err_sq       sum of w * sensor error^2
#  10 dist_sum     sum of w * distance over all masked grid-days
#  11 dist_gap2    sum of w * distance over gap >= 2 grid-days
N_SUMS = 12


@njit(cache=True)
def _scenario_sums_numba(absdiff, t_cls, s_cls, err, lcs_served, dist_m, w, mask,
                         out):  # pragma: no cover - exercised via dispatch
    n_grids, n_days = absdiff.shape
    w_days = 0.0
    abs_sum = 0.0
    under_w = 0.0
    over_w = 0.0
    gap2_w = 0.0
    unhealthy_w = 0.0
    uhm_w = 0.0
    err_w = 0.0
    err_sum = 0.0
    err_sq = 0.0
    dist_sum = 0.0
    dist_gap2 = 0.0
    for g in range(n_grids):
        if not mask[g]:
            continue
        wg = w[g]
        if wg == 0.0:
            continue
        served = lcs_served[g]
        dg = dist_m[g]
        for d in range(n_days):
            abs_sum += wg * absdiff[g, d]
            tc = t_cls[g, d]
            sc = s_cls[g, d]
            if tc > sc:
                under_w += wg
            elif sc > tc:
                over_w += wg
            gap = tc - sc
            if gap < 0:
                gap = -gap
            if gap >= 2:
                gap2_w += wg
                dist_gap2 += wg * dg
            if tc >= 2:
                unhealthy_w += wg
                if sc <= 1:
                    uhm_w += wg
            if served:
                e = err[g, d]
                err_w += wg
                err_sum += wg * e
                err_sq += wg * e * e
        w_days += wg * n_days
        dist_sum += wg * dg * n_days
    out[0] = w_days
    out[1] = abs_sum
    out[2] = under_w
    out[3] = over_w
    out[4] = gap2_w
    out[5] = unhealthy_w
    out[6] = uhm_w
    out[7] = err_w
    out[8] = err_sum
    out[9] = err_sq
    out[10] = dist_sum
    out[11] = dist_gap2


def _scenario_sums_numpy(absdiff, t_cls, s_cls, err, lcs_served, dist_m, w, mask, out):
    keep = mask & (w > 0.0)
    n_days = absdiff.shape[1]
    wg = w[keep]
    if wg.size == 0:
        out[:] = 0.0
        return
    ad = absdiff[keep]
    tc = t_cls[keep]
    sc = s_cls[keep]
    under = (tc > sc).sum(axis=1)
    over = (sc > tc).sum(axis=1)
    gap2 = (np.abs(tc.astype(np.int16) - sc) >= 2)
    unhealthy = tc >= 2
    uhm = unhealthy & (sc <= 1)
    dist = dist_m[keep]
    served = lcs_served[keep]
    wl = wg[served]
    el = err[keep][served]
    out[0] = wg.sum() * n_days
    out[1] = wg @ ad.sum(axis=1)
    out[2] = wg @ under.astype(np.float64)
    out[3] = wg @ over.astype(np.float64)
    out[4] = wg @ gap2.sum(axis=1).astype(np.float64)
    out[5] = wg @ unhealthy.sum(axis=1).astype(np.float64)
    out[6] = wg @ uhm.sum(axis=1).astype(np.float64)
    out[7] = wl.sum() * n_days
    out[8] = wl @ el.sum(axis=1) if wl.size else 0.0
    out[9] = wl @ (el * el).sum(axis=1) if wl.size else 0.0
    out[10] = (wg * dist).sum() * n_days
    out[11] = (wg * dist) @ gap2.sum(axis=1).astype(np.float64)


def scenario_sums(absdiff, t_cls, s_cls, err, lcs_served, dist_m, w, mask,
                  force: str | None = None) -> np.ndarray:
    """Weighted event/error sums over masked grid-days (see layout above)."""
    out = np.zeros(N_SUMS, dtype=np.float64)
    backend = force or active_backend()
    if backend == "numba":
        if not HAS_NUMBA:
            raise RuntimeError("numba backend requested but numba is unavailable")
        _scenario_sums_numba(absdiff, t_cls, s_cls, err, lcs_served, dist_m, w,
                             mask, out)
    elif backend == "numpy":
        _scenario_sums_numpy(absdiff, t_cls, s_cls, err, lcs_served, dist_m, w,
                             mask, out)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return out


@njit(cache=True)
def _weighted_p95_numba(values_flat, order, w_masked, n_days,
                        q):  # pragma: no cover - exercised via dispatch
    n = order.shape[0]
    total = 0.0
    for t in range(n):
        total += w_masked[order[t] // n_days]
    if total == 0.0:
        return np.nan
    thresh = q * total
    cum = 0.0
    for t in range(n):
        cum += w_masked[order[t] // n_days]
        if cum >= thresh:
            return values_flat[order[t]]
    return values_flat[order[n - 1]]


def _weighted_p95_numpy(values_flat, order, w_masked, n_days, q):
    wperm = w_masked[order // n_days]
    cum = np.cumsum(wperm)
    total = cum[-1]
    if total == 0.0:
        return np.nan
    i = int(np.searchsorted(cum, q * total, side="left"))
    if i >= order.shape[0]:
        i = order.shape[0] - 1
    return float(values_flat[order[i]])


def weighted_percentile(values_flat, order, w_masked, n_days, q=0.95,
                        force: str | None = None) -> float:
    """Smallest value whose cumulative weight reaches ``q`` of the total.

    ``order`` must sort ``values_flat`` ascending; ``w_masked`` is the
    per-grid weight (zero outside the subset) and flat index ``f`` belongs
    to grid ``f // n_days``. Accumulation runs in sorted order on both
    backends, so results are bit-identical. Returns NaN on zero total
    weight.
    """
    backend = force or active_backend()
    if backend == "numba":
        if not HAS_NUMBA:
            raise RuntimeError("numba backend requested but numba is unavailable")
        return float(_weighted_p95_numba(values_flat, order, w_masked, n_days, q))
    if backend == "numpy":
        return _weighted_p95_numpy(values_flat, order, w_masked, n_days, q)
    raise ValueError(f"unknown backend {backend!r}")


# ---------------------------------------------------------------------------
# Gaussian hotspot evaluation for the synthetic field generator
# ---------------------------------------------------------------------------


@njit(cache=True)
def _gaussian_bumps_numba(gx, gy, cx, cy, amp, scale,
                          out):  # pragma: no cover - exercised via dispatch
    n = gx.shape[0]
    k = cx.shape[0]
    for g in range(n):
        total = 0.0
        for j in range(k):
            dx = gx[g] - cx[j]
            dy = gy[g] - cy[j]
            total += amp[j] * np.exp(-(dx * dx + dy * dy) / (2.0 * scale[j] * scale[j]))
        out[g] = total


def _gaussian_bumps_numpy(gx, gy, cx, cy, amp, scale, out):
    dx = gx[:, None] - cx[None, :]
    dy = gy[:, None] - cy[None, :]
    np.sum(amp[None, :] * np.exp(-(dx * dx + dy * dy) / (2.0 * scale * scale)[None, :]),
           axis=1, out=out)


def gaussian_bumps(gx, gy, cx, cy, amp, scale, force: str | None = None) -> np.ndarray:
    """Sum of Gaussian bumps centered at (cx, cy) evaluated at (gx, gy)."""
    gx = np.ascontiguousarray(gx, dtype=np.float64)
    gy = np.ascontiguousarray(gy, dtype=np.float64)
    cx = np.ascontiguousarray(cx, dtype=np.float64)
    cy = np.ascontiguousarray(cy, dtype=np.float64)
    amp = np.ascontiguousarray(amp, dtype=np.float64)
    scale = np.ascontiguousarray(scale, dtype=np.float64)
    out = np.zeros(gx.shape[0], dtype=np.float64)
    if cx.shape[0] == 0:
        return out
    backend = force or active_backend()
    if backend == "numba":
        if not HAS_NUMBA:
            raise RuntimeError("numba backend requested but numba is unavailable")
        _gaussian_bumps_numba(gx, gy, cx, cy, amp, scale, out)
    elif backend == "numpy":
        _gaussian_bumps_numpy(gx, gy, cx, cy, amp, scale, out)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return out


def warmup() -> None:
    """Trigger JIT compilation of every numba kernel on tiny inputs.

    Called before forking sweep workers so children inherit compiled code.
    No-op on the numpy path.
    """
    if not USE_NUMBA:
        return
    pts = np.array([0.0, 1.0])
    nearest_neighbor(pts, pts, pts, pts)
    one = np.ones((1, 1))
    cls = np.zeros((1, 1), dtype=np.int8)
    scenario_sums(one, cls, cls, one, np.array([True]), np.array([0.0]),
                  np.array([1.0]), np.array([True]))
    weighted_percentile(np.array([0.0]), np.array([0], dtype=np.int64),
                        np.array([1.0]), 1)
    gaussian_bumps(pts, pts, pts, pts, pts, np.array([1.0, 1.0]))
