"""Brute-force ground truth for validating extractions.

Everything here is deliberately independent of the extraction pipeline:
dense rasterisation of the classification rule, dense line scans with
classification bisection as the 1D root oracle, a dense objective grid as
the junction oracle, ray-cast region agreement against an extracted
network, and Hausdorff distances against analytic boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .root1d import AxisLine

_CHUNK = 1 << 17

# fixed irrational-slope ray direction; avoids grazing network vertices
DEFAULT_RAY_DIRECTION = (1.0, (math.sqrt(5.0) - 1.0) / 2.0)


@dataclass(frozen=True)
class ClassGrid:
    """Class labels sampled at cell centers; ``labels[iy, ix]``, x fastest."""

    nx: int
    ny: int
    bounds: tuple[float, float, float, float]  # x_lo, y_lo, x_hi, y_hi
    labels: np.ndarray
    k: int

    @property
    def cell_size(self) -> tuple[float, float]:
        x_lo, y_lo, x_hi, y_hi = self.bounds
        return (x_hi - x_lo) / self.nx, (y_hi - y_lo) / self.ny


def _cell_centers(bounds, nx, ny):
    x_lo, y_lo, x_hi, y_hi = bounds
    xs = x_lo + (x_hi - x_lo) * (np.arange(nx) + 0.5) / nx
    ys = y_lo + (y_hi - y_lo) * (np.arange(ny) + 0.5) / ny
    return xs, ys


def classify_points(field, pts: np.ndarray) -> np.ndarray:
    """Argmax class (smallest index on ties) for a batch of points."""
    out = np.empty(pts.shape[0], dtype=np.int32)
    for start in range(0, pts.shape[0], _CHUNK):
        chunk = pts[start:start + _CHUNK]
        probs = field.probabilities_batch(chunk)
        out[start:start + _CHUNK] = np.argmax(probs, axis=1)
    return out


def rasterize(field, bounds, resolution) -> ClassGrid:
    """Classify the field at cell centers of a regular grid."""
    nx, ny = (resolution, resolution) if isinstance(resolution, int) else resolution
    if nx < 2 or ny < 2:
        raise ValueError("resolution must be at least 2 per axis")
    xs, ys = _cell_centers(bounds, nx, ny)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    labels = classify_points(field, pts).reshape(ny, nx)
    return ClassGrid(nx=nx, ny=ny, bounds=tuple(float(v) for v in bounds),
                     labels=labels, k=field.k)


def grid_to_text(grid: ClassGrid) -> str:
    """PGM-style text dump: header ``nx ny k`` then row-major labels."""
    lines = [f"{grid.nx} {grid.ny} {grid.k}"]
    for row in grid.labels:
        lines.append(" ".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# 1D oracles
# ---------------------------------------------------------------------------


def scan_line_labels(field, line: AxisLine, lo, hi, n) -> np.ndarray:
    ts = np.linspace(lo, hi, n)
    pts = (np.stack([ts, np.full(n, line.fixed)], axis=1)
           if line.axis == "x"
           else np.stack([np.full(n, line.fixed), ts], axis=1))
    return classify_points(field, pts)


def scan_line_transitions(field, line: AxisLine, lo, hi, n):
    """Brackets (t_lo, t_hi, left_label, right_label) from a dense scan."""
    labels = scan_line_labels(field, line, lo, hi, n)
    ts = np.linspace(lo, hi, n)
    idx = np.nonzero(labels[1:] != labels[:-1])[0]
    return [
        (float(ts[i]), float(ts[i + 1]), int(labels[i]), int(labels[i + 1]))
        for i in idx
    ]


def bisect_transition(field, line: AxisLine, t_lo, t_hi, left_label, max_iter=200):
    """Bisect on the classification predicate alone; independent of any
    gradient or Newton machinery."""
    for _ in range(max_iter):
        mid = 0.5 * (t_lo + t_hi)
        if mid <= t_lo or mid >= t_hi:
            break
        x, y = line.point(mid)
        probs = field.probabilities(x, y)
        best = 0
        for i in range(1, len(probs)):
            if probs[i] > probs[best]:
                best = i
        if best == left_label:
            t_lo = mid
        else:
            t_hi = mid
    return 0.5 * (t_lo + t_hi)


def scan_line_roots(field, line: AxisLine, lo, hi, n):
    """Dense-scan root oracle: bracket by scanning, refine by bisection."""
    return [
        (bisect_transition(field, line, a, b, left), left, right)
        for a, b, left, right in scan_line_transitions(field, line, lo, hi, n)
    ]


# ---------------------------------------------------------------------------
# junction oracle
# ---------------------------------------------------------------------------


def junction_objective_argmin(field, classes, bounds, resolution):
    """Dense-grid argmin of the pairwise squared-difference objective.

    Returns ``(x, y, value, cell_diag)`` for the best cell center.
    """
    a, b, c = classes
    nx = ny = resolution
    xs, ys = _cell_centers(bounds, nx, ny)
    best_val = math.inf
    best_xy = (xs[0], ys[0])
    for start in range(0, ny, max(1, _CHUNK // nx)):
        stop = min(ny, start + max(1, _CHUNK // nx))
        gx, gy = np.meshgrid(xs, ys[start:stop])
        pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
        probs = field.probabilities_batch(pts)
        g = ((probs[:, a] - probs[:, b]) ** 2
             + (probs[:, a] - probs[:, c]) ** 2
             + (probs[:, b] - probs[:, c]) ** 2)
        i = int(np.argmin(g))
        if g[i] < best_val:
            best_val = float(g[i])
            best_xy = (float(pts[i, 0]), float(pts[i, 1]))
    x_lo, y_lo, x_hi, y_hi = bounds
    cell_diag = math.hypot((x_hi - x_lo) / nx, (y_hi - y_lo) / ny)
    return best_xy[0], best_xy[1], best_val, cell_diag


# ---------------------------------------------------------------------------
# region agreement by ray casting
# ---------------------------------------------------------------------------


@njit(cache=True)
def _mask_kernel(segs, x_lo, y_lo, dx, dy, nx, ny, exclusion, margin,
                 excl_mask, near_mask):
    reach = exclusion if exclusion > margin else margin
    for s in range(segs.shape[0]):
        ax, ay, bx, by = segs[s, 0], segs[s, 1], segs[s, 2], segs[s, 3]
        ex, ey = bx - ax, by - ay
        len2 = ex * ex + ey * ey
        min_x = min(ax, bx) - reach
        max_x = max(ax, bx) + reach
        min_y = min(ay, by) - reach
        max_y = max(ay, by) + reach
        i0 = max(0, int(math.floor((min_x - x_lo) / dx - 0.5)))
        i1 = min(nx - 1, int(math.ceil((max_x - x_lo) / dx - 0.5)))
        j0 = max(0, int(math.floor((min_y - y_lo) / dy - 0.5)))
        j1 = min(ny - 1, int(math.ceil((max_y - y_lo) / dy - 0.5)))
        for j in range(j0, j1 + 1):
            cy = y_lo + (j + 0.5) * dy
            for i in range(i0, i1 + 1):
                cx = x_lo + (i + 0.5) * dx
                px, py = cx - ax, cy - ay
                if len2 > 0.0:
                    t = (px * ex + py * ey) / len2
                    if t < 0.0:
                        t = 0.0
                    elif t > 1.0:
                        t = 1.0
                else:
                    t = 0.0
                qx, qy = px - t * ex, py - t * ey
                d = math.sqrt(qx * qx + qy * qy)
                if d <= exclusion:
                    excl_mask[j, i] = True
                if d <= margin:
                    near_mask[j, i] = True


@njit(cache=True)
def _cast_kernel(labels, segs, pair_a, pair_b, strip_off, strip_seg,
                 u_lo, u_width, x_lo, y_lo, dx, dy, nx, ny,
                 x_hi, y_hi, dirx, diry, excl_mask, near_mask, result):
    px, py = -diry, dirx  # perpendicular to the ray direction
    max_cross = 256
    ts = np.empty(max_cross, dtype=np.float64)
    si = np.empty(max_cross, dtype=np.int64)
    n_strips = strip_off.shape[0] - 1

    for j in range(ny):
        cy = y_lo + (j + 0.5) * dy
        for i in range(nx):
            if excl_mask[j, i]:
                result[j, i] = -1
                continue
            cx = x_lo + (i + 0.5) * dx

            # exit parameter where the ray leaves the bounds
            t_exit = 1e300
            if dirx > 0.0:
                t_exit = (x_hi - cx) / dirx
            elif dirx < 0.0:
                t_exit = (x_lo - cx) / dirx
            if diry > 0.0:
                t2 = (y_hi - cy) / diry
                if t2 < t_exit:
                    t_exit = t2
            elif diry < 0.0:
                t2 = (y_lo - cy) / diry
                if t2 < t_exit:
                    t_exit = t2

            u = cx * px + cy * py
            strip = int((u - u_lo) / u_width)
            if strip < 0:
                strip = 0
            elif strip >= n_strips:
                strip = n_strips - 1

            n = 0
            overflow = False
            for kk in range(strip_off[strip], strip_off[strip + 1]):
                s = strip_seg[kk]
                ax, ay = segs[s, 0], segs[s, 1]
                ex, ey = segs[s, 2] - ax, segs[s, 3] - ay
                denom = dirx * ey - diry * ex
                if denom == 0.0:
                    continue
                rx, ry = ax - cx, ay - cy
                t = (rx * ey - ry * ex) / denom
                if t <= 0.0:
                    continue
                frac = (rx * diry - ry * dirx) / denom
                if frac < 0.0 or frac >= 1.0:
                    continue
                if n >= max_cross:
                    overflow = True
                    break
                ts[n] = t
                si[n] = s
                n += 1
            if overflow:
                result[j, i] = 0
                continue

            # insertion sort of the crossings by t
            for a_i in range(1, n):
                tv, sv = ts[a_i], si[a_i]
                b_i = a_i - 1
                while b_i >= 0 and ts[b_i] > tv:
                    ts[b_i + 1] = ts[b_i]
                    si[b_i + 1] = si[b_i]
                    b_i -= 1
                ts[b_i + 1] = tv
                si[b_i + 1] = sv

            # pick the anchor stretch: longest crossing-free stretch whose
            # midpoint cell is not near any segment; fall back to longest
            best_len = -1.0
            best_idx = 0
            best_any_len = -1.0
            best_any_idx = 0
            for st in range(n + 1):
                t0 = 0.0 if st == 0 else ts[st - 1]
                t1 = t_exit if st == n else ts[st]
                length = t1 - t0
                if length <= 0.0:
                    continue
                tm = 0.5 * (t0 + t1)
                mx, my = cx + tm * dirx, cy + tm * diry
                mi = int((mx - x_lo) / dx)
                mj = int((my - y_lo) / dy)
                if mi < 0:
                    mi = 0
                elif mi >= nx:
                    mi = nx - 1
                if mj < 0:
                    mj = 0
                elif mj >= ny:
                    mj = ny - 1
                if length > best_any_len:
                    best_any_len = length
                    best_any_idx = st
                if not near_mask[mj, mi] and length > best_len:
                    best_len = length
                    best_idx = st
            if best_len < 0.0:
                best_idx = best_any_idx

            st = best_idx
            t0 = 0.0 if st == 0 else ts[st - 1]
            t1 = t_exit if st == n else ts[st]
            tm = 0.5 * (t0 + t1)
            mx, my = cx + tm * dirx, cy + tm * diry
            mi = int((mx - x_lo) / dx)
            mj = int((my - y_lo) / dy)
            if mi < 0:
                mi = 0
            elif mi >= nx:
                mi = nx - 1
            if mj < 0:
                mj = 0
            elif mj >= ny:
                mj = ny - 1
            label = labels[mj, mi]

            ok = True
            for cidx in range(st - 1, -1, -1):
                s = si[cidx]
                a_cls = pair_a[s]
                b_cls = pair_b[s]
                if label == a_cls:
                    label = b_cls
                elif label == b_cls:
                    label = a_cls
                else:
                    ok = False
                    break
            if not ok:
                result[j, i] = 0
            elif label == labels[j, i]:
                result[j, i] = 1
            else:
                result[j, i] = 0


def _pack_segments(net):
    verts = {v.id: (v.x, v.y) for v in net.vertices}
    n = len(net.segments)
    segs = np.empty((n, 4))
    pa = np.empty(n, dtype=np.int32)
    pb = np.empty(n, dtype=np.int32)
    for i, s in enumerate(net.segments):
        x0, y0 = verts[s.v0]
        x1, y1 = verts[s.v1]
        segs[i] = (x0, y0, x1, y1)
        pa[i] = s.class_a
        pb[i] = s.class_b
    return segs, pa, pb


def agreement_map(net, grid: ClassGrid, exclusion, direction=DEFAULT_RAY_DIRECTION):
    """Per-cell agreement: 1 agree, 0 disagree, -1 excluded."""
    from .net import check_watertight

    report = check_watertight(net)
    if not report.ok:
        raise ValueError(f"network is not watertight: {report.summary()}")

    x_lo, y_lo, x_hi, y_hi = grid.bounds
    dx, dy = grid.cell_size
    result = np.empty((grid.ny, grid.nx), dtype=np.int8)

    if not net.segments:
        # an empty network claims a single region; cells carrying the
        # dominant label agree with it, everything else is a disagreement
        majority = int(np.argmax(np.bincount(grid.labels.ravel())))
        result[:] = 0
        result[grid.labels == majority] = 1
        return result

    segs, pa, pb = _pack_segments(net)
    norm = math.hypot(*direction)
    dirx, diry = direction[0] / norm, direction[1] / norm

    excl_mask = np.zeros((grid.ny, grid.nx), dtype=np.bool_)
    near_mask = np.zeros((grid.ny, grid.nx), dtype=np.bool_)
    margin = 1.0 * math.hypot(dx, dy)
    _mask_kernel(segs, x_lo, y_lo, dx, dy, grid.nx, grid.ny,
                 float(exclusion), margin, excl_mask, near_mask)

    # bucket segments into strips of the perpendicular coordinate
    px, py = -diry, dirx
    u_seg_lo = np.minimum(segs[:, 0] * px + segs[:, 1] * py,
                          segs[:, 2] * px + segs[:, 3] * py)
    u_seg_hi = np.maximum(segs[:, 0] * px + segs[:, 1] * py,
                          segs[:, 2] * px + segs[:, 3] * py)
    corners_u = [cx * px + cy * py for cx in (x_lo, x_hi) for cy in (y_lo, y_hi)]
    u_lo = min(float(u_seg_lo.min()), min(corners_u)) - 1e-12
    u_hi = max(float(u_seg_hi.max()), max(corners_u)) + 1e-12
    n_strips = 256
    u_width = (u_hi - u_lo) / n_strips
    first = np.clip(((u_seg_lo - u_lo) / u_width).astype(np.int64), 0, n_strips - 1)
    last = np.clip(((u_seg_hi - u_lo) / u_width).astype(np.int64), 0, n_strips - 1)
    counts = np.zeros(n_strips, dtype=np.int64)
    for s in range(len(segs)):
        counts[first[s]:last[s] + 1] += 1
    strip_off = np.zeros(n_strips + 1, dtype=np.int64)
    np.cumsum(counts, out=strip_off[1:])
    strip_seg = np.empty(int(strip_off[-1]), dtype=np.int64)
    cursor = strip_off[:-1].copy()
    for s in range(len(segs)):
        for b in range(first[s], last[s] + 1):
            strip_seg[cursor[b]] = s
            cursor[b] += 1

    _cast_kernel(grid.labels.astype(np.int32), segs, pa, pb,
                 strip_off, strip_seg,
                 u_lo, u_width, x_lo, y_lo, dx, dy, grid.nx, grid.ny,
                 x_hi, y_hi, dirx, diry, excl_mask, near_mask, result)
    return result


def region_agreement(net, grid: ClassGrid, exclusion,
                     direction=DEFAULT_RAY_DIRECTION) -> float:
    """Fraction of non-excluded cells whose ray-cast network label matches
    the dense grid label."""
    rmap = agreement_map(net, grid, exclusion, direction)
    considered = rmap >= 0
    total = int(considered.sum())
    if total == 0:
        return 1.0
    return float((rmap == 1).sum()) / total


# ---------------------------------------------------------------------------
# boundary Hausdorff
# ---------------------------------------------------------------------------


def _min_dist_to_segments(pts: np.ndarray, segs: np.ndarray) -> np.ndarray:
    a = segs[None, :, 0:2]
    e = segs[None, :, 2:4] - a
    p = pts[:, None, :] - a
    len2 = np.maximum((e * e).sum(axis=2), 1e-300)
    t = np.clip((p * e).sum(axis=2) / len2, 0.0, 1.0)
    q = p - t[:, :, None] * e
    return np.sqrt((q * q).sum(axis=2)).min(axis=1)


def analytic_boundary(spec, bounds):
    """Sampler and exact distance for field specs with closed-form boundaries.

    Supported: ``sigmoid_1d`` (vertical lines at the transitions) and the
    two-class ``softmax_rbf`` circle pattern (one Gaussian against a pure
    bias).  Returns ``(sampler, distance_fn)`` or None.
    """
    x_lo, y_lo, x_hi, y_hi = bounds

    if spec.kind == "sigmoid_1d":
        ts = [t for t in spec.transitions if x_lo < t < x_hi]
        if not ts:
            return None

        def sampler(n):
            per = max(2, n // len(ts))
            pts = []
            for t in ts:
                ys = np.linspace(y_lo, y_hi, per)
                pts.append(np.stack([np.full(per, t), ys], axis=1))
            return np.concatenate(pts, axis=0)

        def distance(x, y):
            return min(abs(x - t) for t in ts)

        return sampler, distance

    if spec.kind == "softmax_rbf" and spec.k == 2:
        gauss = [c for c in spec.classes if c.centers and any(w != 0 for w in c.weights)]
        flat = [c for c in spec.classes if not c.centers or all(w == 0 for w in c.weights)]
        if len(gauss) == 1 and len(flat) == 1 and len(gauss[0].centers) == 1:
            w = gauss[0].weights[0]
            level = flat[0].bias - gauss[0].bias
            if w > 0 and 0 < level < w:
                cx, cy = gauss[0].centers[0]
                radius = math.sqrt(math.log(w / level) / spec.sharpness)

                def sampler(n):
                    angles = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
                    return np.stack(
                        [cx + radius * np.cos(angles), cy + radius * np.sin(angles)],
                        axis=1,
                    )

                def distance(x, y):
                    return abs(math.hypot(x - cx, y - cy) - radius)

                return sampler, distance
    return None


def boundary_hausdorff(net, boundary_sampler, n_samples, distance_fn=None) -> float:
    """Two one-sided Hausdorff distances, returning the larger.

    ``boundary_sampler(n)`` yields points on the analytic boundary;
    ``distance_fn(x, y)`` gives exact point-to-boundary distance (defaults
    to nearest-sample distance when absent).
    """
    samples = np.asarray(boundary_sampler(n_samples), dtype=float)
    if not net.segments:
        return math.inf if samples.size else 0.0
    segs, _, _ = _pack_segments(net)

    d_fwd = 0.0
    for start in range(0, samples.shape[0], 4096):
        chunk = samples[start:start + 4096]
        d_fwd = max(d_fwd, float(_min_dist_to_segments(chunk, segs).max()))

    mids = 0.5 * (segs[:, 0:2] + segs[:, 2:4])
    if distance_fn is not None:
        d_back = max(float(distance_fn(x, y)) for x, y in mids)
    else:
        diffs = mids[:, None, :] - samples[None, :, :]
        d_back = float(np.sqrt((diffs * diffs).sum(axis=2)).min(axis=1).max())
    return max(d_fwd, d_back)
