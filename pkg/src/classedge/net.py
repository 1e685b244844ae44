"""Edge-network assembly, validation and serialisation.

Vertices are deduplicated by exact coordinate equality; the shared root
cache guarantees coincident endpoints are bit-identical, so no epsilon
welding is needed (and none is done, so cache defects surface as
watertightness violations instead of being masked).
"""

from __future__ import annotations

import colorsys
import json
from dataclasses import dataclass, field as dataclass_field

import numpy as np

VERTEX_KINDS = ("edge_root", "junction", "border")


@dataclass(frozen=True)
class NetworkVertex:
    id: int
    x: float
    y: float
    kind: str


@dataclass(frozen=True)
class NetworkSegment:
    v0: int
    v1: int
    class_a: int
    class_b: int

    @property
    def pair(self) -> tuple[int, int]:
        return self.class_a, self.class_b


@dataclass
class EdgeNetwork:
    bounds: tuple[float, float, float, float]  # x_lo, y_lo, x_hi, y_hi
    vertices: list[NetworkVertex] = dataclass_field(default_factory=list)
    segments: list[NetworkSegment] = dataclass_field(default_factory=list)
    warnings: list[str] = dataclass_field(default_factory=list)

    def degrees(self) -> dict[int, int]:
        deg = {v.id: 0 for v in self.vertices}
        for s in self.segments:
            deg[s.v0] += 1
            deg[s.v1] += 1
        return deg

    def vertex_by_id(self) -> dict[int, NetworkVertex]:
        return {v.id: v for v in self.vertices}


def _on_border(x, y, bounds) -> bool:
    x_lo, y_lo, x_hi, y_hi = bounds
    return x == x_lo or x == x_hi or y == y_lo or y == y_hi


def build_network(segments, bounds, junctions=(), warnings=()) -> EdgeNetwork:
    """Assemble boundary segments into a canonical network.

    ``segments`` yield (p0, p1, class_a, class_b); ``junctions`` are the
    points produced by triple-junction estimation.  Vertices are ordered by
    coordinate and segments canonically sorted, so identical inputs always
    produce the identical network object.
    """
    junction_set = {(float(x), float(y)) for x, y in junctions}
    coords = set()
    raw = []
    for seg in segments:
        p0 = (float(seg.p0[0]), float(seg.p0[1]))
        p1 = (float(seg.p1[0]), float(seg.p1[1]))
        coords.add(p0)
        coords.add(p1)
        raw.append((p0, p1, int(seg.class_a), int(seg.class_b)))
    coords |= junction_set

    ordered = sorted(coords)
    index = {c: i for i, c in enumerate(ordered)}
    vertices = []
    for i, (x, y) in enumerate(ordered):
        if (x, y) in junction_set:
            kind = "junction"
        elif _on_border(x, y, bounds):
            kind = "border"
        else:
            kind = "edge_root"
        vertices.append(NetworkVertex(i, x, y, kind))

    net_segments = []
    for p0, p1, a, b in raw:
        v0, v1 = index[p0], index[p1]
        if v1 < v0:
            v0, v1 = v1, v0
        net_segments.append(NetworkSegment(v0, v1, a, b))
    net_segments.sort(key=lambda s: (s.v0, s.v1, s.class_a, s.class_b))

    return EdgeNetwork(
        bounds=tuple(float(v) for v in bounds),
        vertices=vertices,
        segments=net_segments,
        warnings=list(warnings),
    )


# ---------------------------------------------------------------------------
# watertightness
# ---------------------------------------------------------------------------


@dataclass
class WatertightReport:
    odd_interior: list[int]
    bad_junctions: list[int]
    crossings: list[tuple[int, int]]

    @property
    def ok(self) -> bool:
        return not (self.odd_interior or self.bad_junctions or self.crossings)

    def summary(self) -> str:
        if self.ok:
            return "watertight"
        return (
            f"{len(self.odd_interior)} odd-degree interior vertices, "
            f"{len(self.bad_junctions)} malformed junctions, "
            f"{len(self.crossings)} crossing segment pairs"
        )


def _segments_cross(a0, a1, b0, b1) -> bool:
    """True when two segments intersect anywhere besides a shared endpoint."""

    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    def on_segment(p, q, r):
        return (min(p[0], q[0]) <= r[0] <= max(p[0], q[0])
                and min(p[1], q[1]) <= r[1] <= max(p[1], q[1]))

    shared = {a0, a1} & {b0, b1}
    o1 = orient(a0, a1, b0)
    o2 = orient(a0, a1, b1)
    o3 = orient(b0, b1, a0)
    o4 = orient(b0, b1, a1)

    if o1 == o2 == 0.0 and o3 == o4 == 0.0:
        # collinear: overlap is a defect unless they only touch at the shared point
        pts = sorted([a0, a1]) + sorted([b0, b1])
        lo = max(min(a0, a1), min(b0, b1))
        hi = min(max(a0, a1), max(b0, b1))
        if lo > hi:
            return False
        return lo != hi  # positive-length overlap

    if shared:
        return False

    if ((o1 > 0) != (o2 > 0)) and ((o3 > 0) != (o4 > 0)) and o1 != 0 and o2 != 0 \
            and o3 != 0 and o4 != 0:
        return True
    # endpoint lying in the interior of the other segment
    if o1 == 0.0 and on_segment(a0, a1, b0):
        return True
    if o2 == 0.0 and on_segment(a0, a1, b1):
        return True
    if o3 == 0.0 and on_segment(b0, b1, a0):
        return True
    if o4 == 0.0 and on_segment(b0, b1, a1):
        return True
    return False


def check_watertight(net: EdgeNetwork) -> WatertightReport:
    """Brute-force validation of the three watertightness conditions.

    (a) every interior non-junction vertex has even degree, (b) every
    junction vertex has degree three with three distinct pairs over three
    classes, (c) no two segments intersect outside shared endpoints.
    """
    deg = net.degrees()
    verts = net.vertex_by_id()

    odd_interior = []
    bad_junctions = []
    pair_sets: dict[int, list] = {v.id: [] for v in net.vertices}
    for s in net.segments:
        pair_sets[s.v0].append(frozenset((s.class_a, s.class_b)))
        pair_sets[s.v1].append(frozenset((s.class_a, s.class_b)))
    for v in net.vertices:
        if v.kind == "junction":
            pairs = pair_sets[v.id]
            classes = set()
            for p in pairs:
                classes |= p
            if deg[v.id] != 3 or len(set(pairs)) != 3 or len(classes) != 3:
                bad_junctions.append(v.id)
        elif v.kind == "edge_root":
            if deg[v.id] % 2 != 0 or deg[v.id] == 0:
                odd_interior.append(v.id)
        # border vertices are exempt: open boundaries may exit the domain

    crossings = []
    n = len(net.segments)
    if n >= 2:
        pts = np.empty((n, 4))
        for i, s in enumerate(net.segments):
            v0, v1 = verts[s.v0], verts[s.v1]
            pts[i] = (v0.x, v0.y, v1.x, v1.y)
        min_x = np.minimum(pts[:, 0], pts[:, 2])
        max_x = np.maximum(pts[:, 0], pts[:, 2])
        min_y = np.minimum(pts[:, 1], pts[:, 3])
        max_y = np.maximum(pts[:, 1], pts[:, 3])
        # all-pairs bounding-box prefilter, chunked to bound memory
        chunk = max(1, (1 << 22) // max(n, 1))
        for start in range(0, n, chunk):
            stop = min(n, start + chunk)
            overlap = (
                (min_x[start:stop, None] <= max_x[None, :])
                & (max_x[start:stop, None] >= min_x[None, :])
                & (min_y[start:stop, None] <= max_y[None, :])
                & (max_y[start:stop, None] >= min_y[None, :])
            )
            rows, cols = np.nonzero(overlap)
            for r, c in zip(rows, cols):
                i, j = start + int(r), int(c)
                if j <= i:
                    continue
                a = ((pts[i, 0], pts[i, 1]), (pts[i, 2], pts[i, 3]))
                b = ((pts[j, 0], pts[j, 1]), (pts[j, 2], pts[j, 3]))
                if _segments_cross(a[0], a[1], b[0], b[1]):
                    crossings.append((i, j))

    return WatertightReport(odd_interior, bad_junctions, crossings)


# ---------------------------------------------------------------------------
# serialisation
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    # 17 significant digits: parses back to the identical double
    return format(float(x), ".17g")


def to_json(net: EdgeNetwork) -> str:
    """Canonical JSON; identical networks serialise byte-identically."""
    parts = ["{"]
    parts.append('"bounds": [%s]' % ", ".join(_fmt(v) for v in net.bounds))
    seg_items = ", ".join(
        '{"class_a": %d, "class_b": %d, "v0": %d, "v1": %d}'
        % (s.class_a, s.class_b, s.v0, s.v1)
        for s in net.segments
    )
    parts.append(f'"segments": [{seg_items}]')
    vert_items = ", ".join(
        '{"id": %d, "kind": %s, "x": %s, "y": %s}'
        % (v.id, json.dumps(v.kind), _fmt(v.x), _fmt(v.y))
        for v in net.vertices
    )
    parts.append(f'"vertices": [{vert_items}]')
    warn_items = ", ".join(json.dumps(w) for w in net.warnings)
    parts.append(f'"warnings": [{warn_items}]')
    return "{" + ", ".join(parts[1:]) + "}\n"


def from_json(text) -> EdgeNetwork:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    doc = json.loads(text)
    bounds = tuple(float(v) for v in doc["bounds"])
    vertices = [
        NetworkVertex(int(v["id"]), float(v["x"]), float(v["y"]), str(v["kind"]))
        for v in doc["vertices"]
    ]
    ids = {v.id for v in vertices}
    segments = []
    for s in doc["segments"]:
        seg = NetworkSegment(int(s["v0"]), int(s["v1"]),
                             int(s["class_a"]), int(s["class_b"]))
        if seg.v0 not in ids or seg.v1 not in ids:
            raise ValueError(f"segment references unknown vertex: {s}")
        segments.append(seg)
    return EdgeNetwork(bounds=bounds, vertices=vertices, segments=segments,
                       warnings=[str(w) for w in doc.get("warnings", [])])


def _pair_colour(rank: int) -> str:
    hue = (rank * 0.6180339887498949) % 1.0
    r, g, b = colorsys.hls_to_rgb(hue, 0.45, 0.85)
    return "#%02x%02x%02x" % (round(r * 255), round(g * 255), round(b * 255))


def _chains(net: EdgeNetwork):
    """Maximal same-pair runs through degree-2 interior vertices."""
    adj: dict[tuple, dict[int, list[int]]] = {}
    for i, s in enumerate(net.segments):
        bucket = adj.setdefault(s.pair, {})
        bucket.setdefault(s.v0, []).append(i)
        bucket.setdefault(s.v1, []).append(i)

    verts = net.vertex_by_id()
    chains = []
    for pair in sorted(adj):
        bucket = adj[pair]
        seen = set()
        ends = sorted(v for v, lst in bucket.items() if len(lst) != 2)
        starts = ends + sorted(v for v, lst in bucket.items() if len(lst) == 2)
        for start in starts:
            for si in sorted(bucket[start]):
                if si in seen:
                    continue
                chain = [start]
                v = start
                i = si
                while True:
                    seen.add(i)
                    s = net.segments[i]
                    v = s.v1 if s.v0 == v else s.v0
                    chain.append(v)
                    if len(bucket[v]) != 2:
                        break
                    nxt = [j for j in bucket[v] if j not in seen]
                    if not nxt:
                        break
                    i = nxt[0]
                chains.append((pair, [verts[v] for v in chain]))
    return chains


def to_svg(net: EdgeNetwork, size: int = 800, stroke_width: float | None = None) -> str:
    """SVG 1.1 document: one path per connected chain, coloured by pair."""
    x_lo, y_lo, x_hi, y_hi = net.bounds
    w, h = x_hi - x_lo, y_hi - y_lo
    scale = size / max(w, h)
    width, height = w * scale, h * scale
    if stroke_width is None:
        stroke_width = max(width, height) / 400.0

    def sx(x):
        return (x - x_lo) * scale

    def sy(y):
        return (y_hi - y) * scale  # SVG y grows downward

    pair_ranks = {}
    for s in net.segments:
        pair_ranks.setdefault(s.pair, len(pair_ranks))

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width:.2f}" height="{height:.2f}" '
        f'viewBox="0 0 {width:.2f} {height:.2f}">',
        f'<rect x="0" y="0" width="{width:.2f}" height="{height:.2f}" '
        f'fill="white" stroke="#cccccc"/>',
    ]
    for pair, chain in _chains(net):
        colour = _pair_colour(pair_ranks[pair])
        d = "M " + " L ".join(f"{sx(v.x):.4f} {sy(v.y):.4f}" for v in chain)
        lines.append(
            f'<path d="{d}" fill="none" stroke="{colour}" '
            f'stroke-width="{stroke_width:.3f}" stroke-linecap="round" '
            f'data-pair="{pair[0]},{pair[1]}"/>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
