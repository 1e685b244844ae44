"""Adaptive 2D polygoniser.

Partitions an axis-aligned rectangle into pieces whose boundary topology is
decidable from the 1D transitions on their edges, then connects those
transitions into straight boundary segments.  A verification stack is
drained ahead of the normal subdivision stack; subdivision positions come
from midpoints between projected edge roots, so cuts land where boundary
structure changes.  All edge roots come from one shared cache, which makes
segment endpoints bit-identical across neighbouring rectangles and the
final network watertight by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field
from enum import Enum

from .field import MultiClassField, classify_point, gradient
from .junction import JunctionNotFoundError, JunctionProblem, find_triple_junction
from .net import EdgeNetwork, build_network
from .root1d import AxisLine, Interval1D, Root1D, RootCache, query_cached_roots

EDGES = ("bottom", "right", "top", "left")


class InternalConsistencyError(RuntimeError):
    """Edge roots and corner classes disagree; signals a 1D-finder defect."""


@dataclass(frozen=True)
class Rect:
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def __post_init__(self):
        if not (self.x_lo < self.x_hi and self.y_lo < self.y_hi):
            raise ValueError(f"degenerate rectangle {self}")

    @property
    def width(self) -> float:
        return self.x_hi - self.x_lo

    @property
    def height(self) -> float:
        return self.y_hi - self.y_lo

    @property
    def min_side(self) -> float:
        return min(self.width, self.height)

    @property
    def center(self) -> tuple[float, float]:
        return 0.5 * (self.x_lo + self.x_hi), 0.5 * (self.y_lo + self.y_hi)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return self.x_lo, self.y_lo, self.x_hi, self.y_hi

    def corners(self):
        return ((self.x_lo, self.y_lo), (self.x_hi, self.y_lo),
                (self.x_hi, self.y_hi), (self.x_lo, self.y_hi))

    def edge(self, name: str) -> tuple[AxisLine, Interval1D]:
        if name == "bottom":
            return AxisLine("x", self.y_lo), Interval1D(self.x_lo, self.x_hi)
        if name == "top":
            return AxisLine("x", self.y_hi), Interval1D(self.x_lo, self.x_hi)
        if name == "left":
            return AxisLine("y", self.x_lo), Interval1D(self.y_lo, self.y_hi)
        if name == "right":
            return AxisLine("y", self.x_hi), Interval1D(self.y_lo, self.y_hi)
        raise ValueError(f"unknown edge {name!r}")

    def split(self, axis: str, position: float) -> tuple["Rect", "Rect"]:
        if axis == "x":
            if not self.x_lo < position < self.x_hi:
                raise ValueError(f"split x={position} outside {self}")
            return (Rect(self.x_lo, position, self.y_lo, self.y_hi),
                    Rect(position, self.x_hi, self.y_lo, self.y_hi))
        if not self.y_lo < position < self.y_hi:
            raise ValueError(f"split y={position} outside {self}")
        return (Rect(self.x_lo, self.x_hi, self.y_lo, position),
                Rect(self.x_lo, self.x_hi, position, self.y_hi))


class RectClass(Enum):
    POLYGONISABLE = "polygonisable"
    AMBIGUOUS = "ambiguous"
    TRIPLE = "three_domains_meet"


@dataclass(frozen=True)
class EdgeTransitions:
    """Per-edge root lists (strictly interior, sorted) plus corner classes."""

    rect: Rect
    roots: dict  # edge name -> list[Root1D]
    corners: tuple[int, int, int, int]  # bl, br, tr, tl

    def total_roots(self) -> int:
        return sum(len(v) for v in self.roots.values())


@dataclass(frozen=True)
class Transition:
    point: tuple[float, float]
    before: int  # class before the crossing, walking the boundary ccw
    after: int

    @property
    def pair(self) -> frozenset:
        return frozenset((self.before, self.after))


@dataclass(frozen=True)
class SubdivisionChoice:
    axis: str
    position: float


@dataclass(frozen=True)
class BoundarySegment:
    p0: tuple[float, float]
    p1: tuple[float, float]
    class_a: int
    class_b: int

    def __post_init__(self):
        if self.p0 == self.p1:
            raise ValueError("degenerate boundary segment")
        if self.class_a == self.class_b:
            raise ValueError("segment classes must differ")

    @property
    def pair(self) -> frozenset:
        return frozenset((self.class_a, self.class_b))


def _segment(p0, p1, pair) -> BoundarySegment:
    a, b = sorted(pair)
    return BoundarySegment(p0, p1, a, b)


def collect_edge_transitions(cache: RootCache, field: MultiClassField, rect: Rect,
                             vn: int, epsilon: float) -> EdgeTransitions:
    """Edge roots from the shared cache plus the four corner classes.

    Roots exactly on a corner are excluded; corner classes carry that
    information instead.
    """
    roots = {}
    for name in EDGES:
        line, iv = rect.edge(name)
        found = query_cached_roots(cache, line, iv, field, vn, epsilon)
        roots[name] = [r for r in found if iv.lo < r.position < iv.hi]
    corners = tuple(classify_point(field, c) for c in rect.corners())
    return EdgeTransitions(rect=rect, roots=roots, corners=corners)


def boundary_walk(et: EdgeTransitions) -> list[Transition]:
    """Transitions in counter-clockwise order from the bottom-left corner.

    Raises InternalConsistencyError when root flanks contradict the corner
    classes they must meet.
    """
    rect = et.rect
    bl, br, tr, tl = et.corners
    out: list[Transition] = []
    current = bl

    def cross(point, new_class):
        nonlocal current
        if new_class != current:
            out.append(Transition(point, current, new_class))
            current = new_class

    def check_corner(name, cls):
        if current != cls:
            raise InternalConsistencyError(
                f"corner {name} of {rect} classifies {cls}, walk carries {current}"
            )

    for r in et.roots["bottom"]:
        if r.left_class != current:
            raise InternalConsistencyError(
                f"bottom-edge root at {r.position} flanks {r.left_class}|"
                f"{r.right_class}, walk carries {current}"
            )
        cross((r.position, rect.y_lo), r.right_class)
    check_corner("bottom-right", br)
    for r in et.roots["right"]:
        if r.left_class != current:
            raise InternalConsistencyError(
                f"right-edge root at {r.position} flanks {r.left_class}|"
                f"{r.right_class}, walk carries {current}"
            )
        cross((rect.x_hi, r.position), r.right_class)
    check_corner("top-right", tr)
    for r in reversed(et.roots["top"]):
        if r.right_class != current:
            raise InternalConsistencyError(
                f"top-edge root at {r.position} flanks {r.left_class}|"
                f"{r.right_class}, walk carries {current}"
            )
        cross((r.position, rect.y_hi), r.left_class)
    check_corner("top-left", tl)
    for r in reversed(et.roots["left"]):
        if r.right_class != current:
            raise InternalConsistencyError(
                f"left-edge root at {r.position} flanks {r.left_class}|"
                f"{r.right_class}, walk carries {current}"
            )
        cross((rect.x_lo, r.position), r.left_class)
    check_corner("bottom-left (closing)", bl)
    return out


def classify_rectangle(et: EdgeTransitions) -> RectClass:
    """Decide the rectangle's boundary topology from its edge data.

    More than one root on any edge is immediately ambiguous.  Otherwise the
    cyclic class-run sequence decides: zero or two transitions polygonise
    directly; three distinct pairwise transitions mean three domains meet
    inside; four transitions polygonise only when they form exactly two
    class pairs whose same-pair chords do not cross (the two-class
    alternating pattern is the classic saddle and stays ambiguous).
    """
    if any(len(v) >= 2 for v in et.roots.values()):
        return RectClass.AMBIGUOUS
    transitions = boundary_walk(et)
    n = len(transitions)
    if n == 0 or n == 2:
        return RectClass.POLYGONISABLE
    if n == 3:
        pairs = {t.pair for t in transitions}
        classes = set()
        for t in transitions:
            classes |= t.pair
        if len(pairs) == 3 and len(classes) == 3:
            return RectClass.TRIPLE
        return RectClass.AMBIGUOUS
    if n == 4:
        pairs = [t.pair for t in transitions]
        if len(set(pairs)) == 2 and pairs.count(pairs[0]) == 2:
            alternating = pairs[0] == pairs[2] and pairs[1] == pairs[3]
            if not alternating:
                return RectClass.POLYGONISABLE
        return RectClass.AMBIGUOUS
    return RectClass.AMBIGUOUS


def choose_subdivision(et: EdgeTransitions, rect: Rect, axis: str,
                       epsilon: float = 0.0) -> SubdivisionChoice:
    """Subdivision coordinate on ``axis`` from projected edge roots.

    Roots on the two edges parallel to the axis project onto it; the cut
    goes through a midpoint between consecutive projections, choosing the
    middle midpoint (odd count) or the neighbour with the wider gap (even
    count, ties to the lower index).  Without at least two projections the
    widest projection gap is bisected instead.

    A cut landing within float noise of a boundary crossing makes the
    crossing's root coincide with a rectangle corner, where it cannot be
    represented as an interior edge root; every candidate is therefore kept
    a safe distance from all projections, falling back to the widest gap.
    """
    if axis == "x":
        edges, lo, hi = ("bottom", "top"), rect.x_lo, rect.x_hi
    else:
        edges, lo, hi = ("left", "right"), rect.y_lo, rect.y_hi
    projections = sorted({r.position for name in edges for r in et.roots[name]})
    side = hi - lo
    safe = max(4.0 * epsilon, 1e-7 * side)

    # near-coincident projections are one boundary feature at this resolution
    reps: list[float] = []
    for p in projections:
        if not reps or p - reps[-1] > safe:
            reps.append(p)

    def usable(pos):
        return lo < pos < hi and all(abs(pos - p) > 0.25 * safe for p in projections)

    position = None
    if len(reps) >= 2:
        mids = [0.5 * (reps[i] + reps[i + 1]) for i in range(len(reps) - 1)]
        n = len(mids)
        if n % 2 == 1:
            position = mids[n // 2]
        else:
            i0, i1 = n // 2 - 1, n // 2
            gap0 = reps[i0 + 1] - reps[i0]
            gap1 = reps[i1 + 1] - reps[i1]
            position = mids[i0] if gap0 >= gap1 else mids[i1]
    if position is None or not usable(position):
        bounds_list = [lo] + reps + [hi]
        widest = max(range(len(bounds_list) - 1),
                     key=lambda i: bounds_list[i + 1] - bounds_list[i])
        position = 0.5 * (bounds_list[widest] + bounds_list[widest + 1])
        if not usable(position):
            position = 0.5 * (lo + hi)  # saturated with roots; cut plainly
    return SubdivisionChoice(axis, position)


def _flip(axis: str) -> str:
    return "y" if axis == "x" else "x"


def verify_rectangle(cache: RootCache, field: MultiClassField, rect: Rect,
                     cls: RectClass, vn: int, epsilon: float,
                     axis: str = "x", on_node=None) -> bool:
    """Confirm a classification by ``vn`` levels of root-guided subdivision.

    Exactly ``2**(vn+1) - 2`` nodes are created and classified, alternating
    the cut axis per level.  Polygonisable verifies when every node is
    polygonisable; three-domains-meet verifies when exactly one leaf keeps
    that condition and all other leaves are polygonisable.
    """
    if cls is RectClass.AMBIGUOUS:
        raise ValueError("only polygonisable or triple rectangles are verifiable")
    if vn < 1:
        raise ValueError("verification depth must be >= 1")

    level = [(rect, collect_edge_transitions(cache, field, rect, vn, epsilon), axis)]
    all_poly = True
    leaves: list[RectClass] = []
    for depth in range(1, vn + 1):
        nxt = []
        for node, node_et, node_axis in level:
            cut_axis = node_axis
            if node.width <= 2.0 * epsilon and cut_axis == "x":
                cut_axis = "y"
            if node.height <= 2.0 * epsilon and cut_axis == "y":
                cut_axis = "x"
            choice = choose_subdivision(node_et, node, cut_axis, epsilon)
            for child in node.split(choice.axis, choice.position):
                child_et = collect_edge_transitions(cache, field, child, vn, epsilon)
                try:
                    child_cls = classify_rectangle(child_et)
                except InternalConsistencyError:
                    child_cls = RectClass.AMBIGUOUS
                if on_node is not None:
                    on_node(child, child_cls)
                if child_cls is not RectClass.POLYGONISABLE:
                    all_poly = False
                nxt.append((child, child_et, _flip(choice.axis), child_cls))
        if depth == vn:
            leaves = [c for _, _, _, c in nxt]
        level = [(r, e, a) for r, e, a, _ in nxt]

    if cls is RectClass.POLYGONISABLE:
        return all_poly
    hits = sum(1 for c in leaves if c is RectClass.TRIPLE)
    others_poly = all(c is RectClass.POLYGONISABLE for c in leaves if c is not RectClass.TRIPLE)
    return hits == 1 and others_poly


@dataclass(frozen=True)
class GeoDecision:
    subdivide: bool
    axis: str | None = None
    position: float | None = None
    note: str | None = None

    KEEP = None  # populated after class creation


GeoDecision.KEEP = GeoDecision(False)


def apply_geometric_criterion(field: MultiClassField, seg: BoundarySegment,
                              delta: float | None) -> GeoDecision:
    """Tangent-intersection flatness test for one boundary-approximating chord.

    The contour tangents at both endpoints intersect at a point whose
    perpendicular distance ``d`` to the chord measures how much boundary
    curvature the chord hides.  Subdivision triggers when both ``d`` and
    the chord length exceed ``delta``; the cut is perpendicular to the
    chord's dominant direction, through its midpoint.
    """
    if delta is None or delta == math.inf:
        return GeoDecision.KEEP
    (x1, y1), (x2, y2) = seg.p0, seg.p1
    length = math.hypot(x2 - x1, y2 - y1)
    if length <= delta:
        return GeoDecision.KEEP

    a, b = seg.class_a, seg.class_b
    ga1 = gradient(field, seg.p0, a)
    gb1 = gradient(field, seg.p0, b)
    ga2 = gradient(field, seg.p1, a)
    gb2 = gradient(field, seg.p1, b)
    a1, b1 = ga1[0] - gb1[0], ga1[1] - gb1[1]
    a2, b2 = ga2[0] - gb2[0], ga2[1] - gb2[1]
    if math.hypot(a1, b1) < 1e-300 or math.hypot(a2, b2) < 1e-300:
        return GeoDecision(False, note=f"zero contour gradient on chord {seg.p0}-{seg.p1}")

    det = a1 * b2 - a2 * b1
    if abs(det) < 1e-14 * math.hypot(a1, b1) * math.hypot(a2, b2):
        return GeoDecision.KEEP  # parallel tangents: d treated as zero
    rhs1 = a1 * x1 + b1 * y1
    rhs2 = a2 * x2 + b2 * y2
    xi = (rhs1 * b2 - rhs2 * b1) / det
    yi = (a1 * rhs2 - a2 * rhs1) / det

    # perpendicular distance from the intersection to the chord
    ex, ey = x2 - x1, y2 - y1
    t = ((xi - x1) * ex + (yi - y1) * ey) / (length * length)
    t = min(max(t, 0.0), 1.0)
    d = math.hypot(xi - (x1 + t * ex), yi - (y1 + t * ey))
    if d > delta:
        axis = "x" if abs(ex) >= abs(ey) else "y"
        position = 0.5 * (x1 + x2) if axis == "x" else 0.5 * (y1 + y2)
        return GeoDecision(True, axis, position)
    return GeoDecision.KEEP


def connect_edges(et: EdgeTransitions, rect: Rect, cls: RectClass,
                  junction: tuple[float, float] | None = None) -> list[BoundarySegment]:
    """Straight segments joining the rectangle's edge transitions.

    Two transitions join directly; four join as two same-pair chords in
    cyclic order; three-domain rectangles connect every transition to the
    supplied junction point.
    """
    transitions = boundary_walk(et)
    n = len(transitions)
    if cls is RectClass.TRIPLE:
        if junction is None:
            raise ValueError("triple-domain rectangles need a junction point")
        if not (rect.x_lo <= junction[0] <= rect.x_hi
                and rect.y_lo <= junction[1] <= rect.y_hi):
            raise ValueError(f"junction {junction} outside {rect}")
        return [_segment(t.point, junction, t.pair) for t in transitions]
    if cls is not RectClass.POLYGONISABLE:
        raise ValueError("connect_edges needs a polygonisable or triple rectangle")
    if n == 0:
        return []
    if n == 2:
        t0, t1 = transitions
        if t0.pair != t1.pair:
            raise InternalConsistencyError(
                f"two transitions with mismatched pairs in {rect}: "
                f"{t0.pair} vs {t1.pair}"
            )
        return [_segment(t0.point, t1.point, t0.pair)]
    if n == 4:
        pairs = [t.pair for t in transitions]
        if pairs[0] == pairs[1]:
            matching = ((0, 1), (2, 3))
        elif pairs[0] == pairs[3]:
            matching = ((3, 0), (1, 2))
        else:
            raise InternalConsistencyError(
                f"unpairable transition set in {rect}: {pairs}"
            )
        out = []
        for i, j in matching:
            if pairs[i] != pairs[j]:
                raise InternalConsistencyError(
                    f"unpairable transition set in {rect}: {pairs}"
                )
            out.append(_segment(transitions[i].point, transitions[j].point, pairs[i]))
        return out
    raise InternalConsistencyError(
        f"polygonisable rectangle with {n} transitions in {rect}"
    )


def _best_effort_segments(et: EdgeTransitions, rect: Rect, warnings: list[str]):
    """Greedy same-pair pairing for rectangles finished at the size limit."""
    try:
        transitions = boundary_walk(et)
    except InternalConsistencyError as exc:
        warnings.append(f"size-limit rectangle dropped: {exc}")
        return [], None
    unmatched = list(range(len(transitions)))
    segments = []
    i = 0
    while i < len(unmatched):
        idx = unmatched[i]
        partner = None
        for j in range(i + 1, len(unmatched)):
            if transitions[unmatched[j]].pair == transitions[idx].pair:
                partner = j
                break
        if partner is None:
            i += 1
            continue
        other = unmatched[partner]
        p0, p1 = transitions[idx].point, transitions[other].point
        if p0 != p1:
            segments.append(_segment(p0, p1, transitions[idx].pair))
        del unmatched[partner]
        del unmatched[i]
    junction_point = None
    leftovers = [transitions[i] for i in unmatched]
    if leftovers:
        classes = set()
        for t in leftovers:
            classes |= t.pair
        pairs = {t.pair for t in leftovers}
        if len(leftovers) == 3 and len(pairs) == 3 and len(classes) == 3:
            junction_point = rect.center
            segments.extend(
                _segment(t.point, junction_point, t.pair) for t in leftovers
            )
        else:
            warnings.append(
                f"{len(leftovers)} unpairable transitions dropped in size-limit "
                f"rectangle {rect}"
            )
    return segments, junction_point


@dataclass
class _Node:
    rect: Rect
    axis: str
    cls: RectClass
    et: EdgeTransitions


def polygonise(field: MultiClassField, root_rect: Rect, vn: int,
               delta: float | None, epsilon: float,
               trace: list | None = None,
               junction_tolerance: float | None = None) -> EdgeNetwork:
    """Extract the full class-boundary network within ``root_rect``.

    Dual-stack driver: the verification stack always empties before the
    normal stack is touched.  Verified three-domain rectangles get a
    junction estimate before edge connection; rectangles whose chords fail
    the geometric criterion are re-split and re-enter the pipeline.
    Rectangles reaching the ``epsilon`` size limit are completed with
    best-effort segments and a warning rather than dropped, which keeps the
    network watertight.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if vn < 1:
        raise ValueError("verification depth must be >= 1")
    if delta is not None and delta <= 0:
        raise ValueError("delta must be positive (or None to disable)")
    if junction_tolerance is None:
        junction_tolerance = max(epsilon, 1e-14)

    cache = RootCache()
    segments: list[BoundarySegment] = []
    junctions: list[tuple[float, float]] = []
    verify_stack: list[_Node] = []
    normal_stack: list[_Node] = []

    def record(node: _Node, action: str):
        if trace is not None:
            trace.append({
                "x_lo": node.rect.x_lo, "x_hi": node.rect.x_hi,
                "y_lo": node.rect.y_lo, "y_hi": node.rect.y_hi,
                "class": node.cls.value, "action": action,
                "verify_pending": len(verify_stack),
                "normal_pending": len(normal_stack),
            })

    def classify_node(rect: Rect, axis: str) -> _Node:
        et = collect_edge_transitions(cache, field, rect, vn, epsilon)
        try:
            cls = classify_rectangle(et)
        except InternalConsistencyError as exc:
            cache.warnings.append(f"classification degraded to ambiguous: {exc}")
            cls = RectClass.AMBIGUOUS
        return _Node(rect, axis, cls, et)

    def push(node: _Node):
        if node.cls is RectClass.AMBIGUOUS:
            normal_stack.append(node)
        else:
            verify_stack.append(node)

    def finish_at_limit(node: _Node):
        cache.warnings.append(
            f"rectangle {node.rect} hit the size limit as {node.cls.value}"
        )
        if node.cls is RectClass.POLYGONISABLE:
            try:
                segs = connect_edges(node.et, node.rect, node.cls)
            except InternalConsistencyError:
                segs, _ = _best_effort_segments(node.et, node.rect, cache.warnings)
        else:
            segs, jp = _best_effort_segments(node.et, node.rect, cache.warnings)
            if jp is not None:
                junctions.append(jp)
        segments.extend(segs)
        record(node, "size_limit")

    def subdivide_into(node: _Node, axis: str, position: float):
        for child in node.rect.split(axis, position):
            push(classify_node(child, _flip(axis)))

    push(classify_node(root_rect, "x"))

    while verify_stack or normal_stack:
        if verify_stack:
            node = verify_stack.pop()
            if node.rect.min_side < epsilon:
                finish_at_limit(node)
                continue
            ok = verify_rectangle(cache, field, node.rect, node.cls, vn, epsilon,
                                  axis=node.axis)
            if not ok:
                record(node, "verify_failed")
                normal_stack.append(node)
                continue

            junction_point = None
            if node.cls is RectClass.TRIPLE:
                transitions = boundary_walk(node.et)
                classes = set()
                for t in transitions:
                    classes |= t.pair
                problem = JunctionProblem(
                    field, tuple(sorted(classes)), node.rect.bounds,
                    tolerance=junction_tolerance,
                )
                try:
                    junction_point = find_triple_junction(problem).point
                except JunctionNotFoundError as exc:
                    cache.warnings.append(f"junction search failed, subdividing: {exc}")
                    record(node, "junction_failed")
                    node.cls = RectClass.AMBIGUOUS
                    normal_stack.append(node)
                    continue

            try:
                segs = connect_edges(node.et, node.rect, node.cls, junction_point)
            except InternalConsistencyError as exc:
                cache.warnings.append(f"connection degraded to subdivision: {exc}")
                record(node, "connect_failed")
                node.cls = RectClass.AMBIGUOUS
                normal_stack.append(node)
                continue

            decision = GeoDecision.KEEP
            for seg in segs:
                decision = apply_geometric_criterion(field, seg, delta)
                if decision.note:
                    cache.warnings.append(decision.note)
                if decision.subdivide:
                    break
            if decision.subdivide:
                record(node, "geo_subdivide")
                subdivide_into(node, decision.axis, decision.position)
                continue

            if junction_point is not None:
                junctions.append(junction_point)
            segments.extend(segs)
            record(node, "connect")
        else:
            node = normal_stack.pop()
            if node.rect.min_side < epsilon:
                finish_at_limit(node)
                continue
            axis = node.axis
            if node.rect.width < 2.0 * epsilon and axis == "x":
                axis = "y"
            elif node.rect.height < 2.0 * epsilon and axis == "y":
                axis = "x"
            choice = choose_subdivision(node.et, node.rect, axis, epsilon)
            record(node, "subdivide")
            subdivide_into(node, choice.axis, choice.position)

    return build_network(segments, root_rect.bounds, junctions=junctions,
                         warnings=cache.warnings)
