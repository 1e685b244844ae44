"""One-dimensional multi-class transition finder.

Finds every coordinate on an axis-aligned line where the argmax class of a
multi-class field changes.  Intervals are classified from the top-two class
rankings at their endpoints, confirmed by recursive subdivision, localised
by tangent projections of the contested pair's probability difference, and
refined by a Newton/bisection hybrid.  A breadth-first search with a
prioritised verification queue drives the whole thing; a per-line cache
makes repeated queries of overlapping intervals bit-identical, which is
what keeps adjacent rectangles watertight in 2D.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field as dataclass_field
from enum import Enum

from .field import MultiClassField, _top_two_of

RESIDUAL_TOL = 1e-12
DERIV_FLOOR = 1e-300
MAX_REFINE_ITER = 200


class RefinementError(ArithmeticError):
    """Newton diverged and no sign-change bracket was available."""


@dataclass(frozen=True)
class AxisLine:
    """An axis-aligned line: ``axis`` is the varying coordinate."""

    axis: str  # "x" or "y"
    fixed: float

    def __post_init__(self):
        if self.axis not in ("x", "y"):
            raise ValueError(f"axis must be 'x' or 'y', got {self.axis!r}")
        if not math.isfinite(self.fixed):
            raise ValueError("fixed coordinate must be finite")

    def point(self, t: float) -> tuple[float, float]:
        return (t, self.fixed) if self.axis == "x" else (self.fixed, t)


@dataclass(frozen=True)
class Interval1D:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def halves(self) -> tuple["Interval1D", "Interval1D"]:
        m = self.mid
        return Interval1D(self.lo, m), Interval1D(m, self.hi)


class IntervalKind(Enum):
    CONSISTENT = "consistent"
    POTENTIAL_ROOT = "potential_root"
    AMBIGUOUS = "ambiguous"


@dataclass(frozen=True)
class IntervalClass:
    kind: IntervalKind
    a: int | None = None  # consistent class, or class on the low side of the pair
    b: int | None = None  # class on the high side of the pair

    @staticmethod
    def consistent(c: int) -> "IntervalClass":
        return IntervalClass(IntervalKind.CONSISTENT, c)

    @staticmethod
    def potential_root(a: int, b: int) -> "IntervalClass":
        if a == b:
            raise ValueError("potential-root classes must differ")
        return IntervalClass(IntervalKind.POTENTIAL_ROOT, a, b)

    @staticmethod
    def ambiguous() -> "IntervalClass":
        return IntervalClass(IntervalKind.AMBIGUOUS)


class Likelihood(Enum):
    DEFINITE = "definite_within"
    NEAR = "possible_near"
    UNLIKELY = "unlikely"


@dataclass(frozen=True)
class RootLikelihood:
    kind: Likelihood
    x1_star: float | None
    x2_star: float | None


@dataclass(frozen=True)
class Root1D:
    """A confirmed class transition on an axis-aligned line."""

    position: float
    left_class: int
    right_class: int
    line: AxisLine


def classify_interval(field: MultiClassField, line: AxisLine, iv: Interval1D) -> IntervalClass:
    """Classify an interval from the top-two class rankings at its endpoints."""
    x1, y1 = line.point(iv.lo)
    x2, y2 = line.point(iv.hi)
    i1, i2 = _top_two_of(field.probabilities(x1, y1))
    j1, j2 = _top_two_of(field.probabilities(x2, y2))
    return _classify_from_pairs(i1, i2, j1, j2)


def _classify_from_pairs(i1, i2, j1, j2) -> IntervalClass:
    if i1 == j1:
        return IntervalClass.consistent(i1)
    if i1 == j2 and j1 == i2:
        return IntervalClass.potential_root(i1, j1)
    return IntervalClass.ambiguous()


def localise_scalar(g, dg, lo: float, hi: float) -> RootLikelihood:
    """Judge root likelihood for scalar ``g`` on [lo, hi] by tangent projection.

    Each endpoint projects to where its tangent line crosses zero; a
    projection is undefined (and excluded from the window tests) when the
    derivative there is essentially zero.
    """
    glo, ghi = g(lo), g(hi)
    dlo, dhi = dg(lo), dg(hi)
    width = hi - lo

    x1_star = lo - glo / dlo if abs(dlo) >= DERIV_FLOOR else None
    x2_star = hi - ghi / dhi if abs(dhi) >= DERIV_FLOOR else None
    sign_change = glo * ghi < 0.0

    def inside(t):
        return t is not None and lo <= t <= hi

    def in_window(t):
        return t is not None and lo - width <= t <= hi + width

    if sign_change and inside(x1_star) and inside(x2_star):
        kind = Likelihood.DEFINITE
    elif sign_change or in_window(x1_star) or in_window(x2_star):
        kind = Likelihood.NEAR
    else:
        kind = Likelihood.UNLIKELY
    return RootLikelihood(kind, x1_star, x2_star)


def refine_scalar(g, dg, lo: float, hi: float, epsilon: float) -> float:
    """Newton from the low end with a bisection safeguard on the sign bracket.

    Returns x with ``|g(x)| < 1e-12`` or with the bracket narrower than
    ``epsilon``.  Raises RefinementError if Newton fails and no sign change
    brackets a root.
    """
    glo, ghi = g(lo), g(hi)
    if abs(glo) < RESIDUAL_TOL:
        return lo
    if abs(ghi) < RESIDUAL_TOL:
        return hi
    bracket = [lo, hi] if glo * ghi < 0.0 else None
    sign_at_lo = glo > 0.0

    x, gx = lo, glo
    for _ in range(MAX_REFINE_ITER):
        d = dg(x)
        xn = None
        if abs(d) >= DERIV_FLOOR:
            cand = x - gx / d
            limit = bracket if bracket is not None else (lo, hi)
            if limit[0] <= cand <= limit[1]:
                xn = cand
        if xn is None:
            if bracket is None:
                raise RefinementError(
                    f"Newton left [{lo}, {hi}] with no sign change to fall back on"
                )
            xn = 0.5 * (bracket[0] + bracket[1])
        gxn = g(xn)
        if abs(gxn) < RESIDUAL_TOL:
            return xn
        if bracket is not None:
            if (gxn > 0.0) == sign_at_lo:
                bracket[0] = xn
            else:
                bracket[1] = xn
            if bracket[1] - bracket[0] < epsilon:
                return 0.5 * (bracket[0] + bracket[1])
        x, gx = xn, gxn
    if bracket is not None:
        return 0.5 * (bracket[0] + bracket[1])
    raise RefinementError("refinement did not converge")


def _pair_funcs(field, line, pair):
    a, b = pair
    axis_is_x = line.axis == "x"

    def g(t):
        x, y = line.point(t)
        p = field.probabilities(x, y)
        return p[a] - p[b]

    def dg(t):
        x, y = line.point(t)
        gax, gay = field.gradient(x, y, a)
        gbx, gby = field.gradient(x, y, b)
        return (gax - gbx) if axis_is_x else (gay - gby)

    return g, dg


def gradient_localisation(field, line: AxisLine, iv: Interval1D, pair) -> RootLikelihood:
    """Tangent-projection likelihood for the contested pair on the interval."""
    g, dg = _pair_funcs(field, line, pair)
    return localise_scalar(g, dg, iv.lo, iv.hi)


def refine_root(field, line: AxisLine, iv: Interval1D, pair, epsilon: float | None = None) -> float:
    """Refine the transition of the contested pair to a single coordinate."""
    if epsilon is None:
        epsilon = 1e-14 * max(1.0, abs(iv.lo), abs(iv.hi))
    g, dg = _pair_funcs(field, line, pair)
    return refine_scalar(g, dg, iv.lo, iv.hi, epsilon)


def verify_interval(field, line: AxisLine, iv: Interval1D, cls: IntervalClass,
                    vn: int, on_node=None, classify=None) -> bool:
    """Confirm a classification by recursive bisection ``vn`` levels down.

    Creates and classifies exactly ``2**(vn+1) - 2`` nodes.  A consistent
    interval verifies when every node is consistent with the same class; a
    potential root verifies when exactly one leaf keeps the same pair and
    every other leaf is consistent.  ``on_node`` is called once per created
    node; ``classify`` lets a caller share memoised endpoint evaluations.
    """
    if cls.kind is IntervalKind.AMBIGUOUS:
        raise ValueError("only consistent or potential-root intervals are verifiable")
    if vn < 1:
        raise ValueError("verification depth must be >= 1")

    if classify is None:
        classify = _MemoLine(field, line).classify

    def node_class(sub):
        c = classify(sub)
        if on_node is not None:
            on_node(sub, c)
        return c

    level = [iv]
    all_consistent_same = True
    leaf_classes: list[IntervalClass] = []
    for depth in range(1, vn + 1):
        nxt = []
        for node in level:
            for child in node.halves():
                c = node_class(child)
                nxt.append((child, c))
                if not (c.kind is IntervalKind.CONSISTENT and c.a == cls.a):
                    all_consistent_same = False
        if depth == vn:
            leaf_classes = [c for _, c in nxt]
        level = [child for child, _ in nxt]

    if cls.kind is IntervalKind.CONSISTENT:
        return all_consistent_same
    hits = sum(1 for c in leaf_classes if c == cls)
    others_consistent = all(
        c.kind is IntervalKind.CONSISTENT for c in leaf_classes if c != cls
    )
    return hits == 1 and others_consistent


class _MemoLine:
    """Memoises per-line endpoint evaluations for one finder run."""

    def __init__(self, field, line):
        self.field = field
        self.line = line
        self._probs: dict[float, list[float]] = {}
        self._tops: dict[float, tuple[int, int]] = {}

    def probs(self, t):
        v = self._probs.get(t)
        if v is None:
            x, y = self.line.point(t)
            v = self.field.probabilities(x, y)
            self._probs[t] = v
        return v

    def tops(self, t):
        v = self._tops.get(t)
        if v is None:
            v = _top_two_of(self.probs(t))
            self._tops[t] = v
        return v

    def classify(self, iv: Interval1D) -> IntervalClass:
        i1, i2 = self.tops(iv.lo)
        j1, j2 = self.tops(iv.hi)
        return _classify_from_pairs(i1, i2, j1, j2)


def find_roots(field, line: AxisLine, iv: Interval1D, vn: int, epsilon: float,
               warnings: list[str] | None = None, on_event=None) -> list[Root1D]:
    """All argmax transitions on the interval, refined to within ``epsilon``.

    Breadth-first search over two queues; the verification queue is always
    drained before the normal queue is touched.  Intervals that reach the
    ``epsilon`` limit unresolved emit a best-effort midpoint root when their
    endpoint classes differ (and a warning either way), so no transition is
    silently dropped.  Roots closer than ``epsilon`` merge, keeping the
    outermost flank classes.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if iv.width <= epsilon:
        raise ValueError("interval must be wider than epsilon")
    if vn < 1:
        raise ValueError("verification depth must be >= 1")

    memo = _MemoLine(field, line)
    qv: deque[tuple[Interval1D, IntervalClass]] = deque()
    qn: deque[Interval1D] = deque()
    found: list[tuple[float, int, int]] = []

    def emit(kind, node):
        if on_event is not None:
            on_event({"queue": kind, "lo": node.lo, "hi": node.hi,
                      "verify_pending": len(qv), "normal_pending": len(qn)})

    def warn(msg):
        if warnings is not None:
            warnings.append(msg)

    def at_limit(node: Interval1D):
        cl = memo.tops(node.lo)[0]
        cr = memo.tops(node.hi)[0]
        warn(
            f"interval [{node.lo}, {node.hi}] on {line.axis}={line.fixed} hit the "
            f"resolution limit unresolved"
        )
        if cl != cr:
            found.append((node.mid, cl, cr))

    c0 = memo.classify(iv)
    if c0.kind in (IntervalKind.CONSISTENT, IntervalKind.POTENTIAL_ROOT):
        qv.append((iv, c0))
    else:
        qn.append(iv)

    while qv or qn:
        if qv:
            node, cls = qv.popleft()
            emit("verify", node)
            if node.width < epsilon:
                at_limit(node)
                continue
            ok = verify_interval(field, line, node, cls, vn, classify=memo.classify)
            if ok:
                if cls.kind is IntervalKind.POTENTIAL_ROOT:
                    pair = (cls.a, cls.b)
                    lik = gradient_localisation(field, line, node, pair)
                    if lik.kind is Likelihood.DEFINITE:
                        pos = refine_root(field, line, node, pair, epsilon)
                        found.append((pos, cls.a, cls.b))
                    else:
                        # near/unlikely: unresolved, demote for subdivision
                        qn.append(node)
                # verified consistent intervals carry no transitions
            else:
                qn.append(node)
        else:
            node = qn.popleft()
            emit("normal", node)
            if node.width < epsilon:
                at_limit(node)
                continue
            for child in node.halves():
                c = memo.classify(child)
                if c.kind in (IntervalKind.CONSISTENT, IntervalKind.POTENTIAL_ROOT):
                    qv.append((child, c))
                else:
                    qn.append(child)

    found.sort(key=lambda r: r[0])
    merged: list[list] = []
    for pos, left, right in found:
        if merged and pos - merged[-1][0] <= epsilon:
            merged[-1][2] = right  # keep outer flanks
        else:
            merged.append([pos, left, right])
    return [
        Root1D(pos, left, right, line)
        for pos, left, right in merged
        if left != right
    ]


@dataclass
class _LineCache:
    roots: list[Root1D] = dataclass_field(default_factory=list)  # sorted by position
    covered: list[tuple[float, float]] = dataclass_field(default_factory=list)  # disjoint, sorted


class RootCache:
    """Per-line store of confirmed transitions and covered intervals.

    Every query of an interval already covered is answered from the store,
    so overlapping queries (and adjacent rectangles sharing a line) always
    see bit-identical root positions.  A cache binds to the (vn, epsilon)
    of its first query; mixing settings would break that guarantee.
    """

    def __init__(self):
        self._lines: dict[tuple[str, float], _LineCache] = {}
        self._config: tuple[int, float] | None = None
        self.warnings: list[str] = []

    def _line(self, line: AxisLine) -> _LineCache:
        key = (line.axis, line.fixed)
        lc = self._lines.get(key)
        if lc is None:
            lc = _LineCache()
            self._lines[key] = lc
        return lc

    def check_config(self, vn: int, epsilon: float):
        if self._config is None:
            self._config = (vn, epsilon)
        elif self._config != (vn, epsilon):
            raise ValueError(
                f"cache was filled with (vn, epsilon)={self._config}, "
                f"queried with {(vn, epsilon)}"
            )


def _uncovered(covered, lo, hi):
    gaps = []
    cursor = lo
    for a, b in covered:
        if b <= cursor:
            continue
        if a >= hi:
            break
        if a > cursor:
            gaps.append((cursor, a))
        cursor = max(cursor, b)
        if cursor >= hi:
            break
    if cursor < hi:
        gaps.append((cursor, hi))
    return gaps


def _add_coverage(covered, lo, hi):
    merged = []
    placed = False
    for a, b in covered:
        if b < lo or a > hi:
            merged.append((a, b))
        else:
            lo, hi = min(lo, a), max(hi, b)
    for i, (a, b) in enumerate(merged):
        if lo < a:
            merged.insert(i, (lo, hi))
            placed = True
            break
    if not placed:
        merged.append((lo, hi))
    covered[:] = merged


def query_cached_roots(cache: RootCache, line: AxisLine, iv: Interval1D,
                       field, vn: int, epsilon: float) -> list[Root1D]:
    """Roots on the interval, running the finder only on uncovered gaps."""
    cache.check_config(vn, epsilon)
    lc = cache._line(line)
    for a, b in _uncovered(lc.covered, iv.lo, iv.hi):
        if b - a <= epsilon:
            # sub-resolution sliver: record a best-effort root if its flanks differ
            x1, y1 = line.point(a)
            x2, y2 = line.point(b)
            cl = _top_two_of(field.probabilities(x1, y1))[0]
            cr = _top_two_of(field.probabilities(x2, y2))[0]
            if cl != cr:
                _insert_roots(lc, [Root1D(0.5 * (a + b), cl, cr, line)], epsilon, cache.warnings)
                cache.warnings.append(
                    f"sliver [{a}, {b}] on {line.axis}={line.fixed} resolved by midpoint"
                )
        else:
            new = find_roots(field, line, Interval1D(a, b), vn, epsilon,
                             warnings=cache.warnings)
            _insert_roots(lc, new, epsilon, cache.warnings)
        _add_coverage(lc.covered, a, b)
    return [r for r in lc.roots if iv.lo <= r.position <= iv.hi]


def _insert_roots(lc: _LineCache, new_roots, epsilon, warnings):
    for root in new_roots:
        # keep previously returned positions authoritative
        clash = any(abs(r.position - root.position) <= epsilon for r in lc.roots)
        if clash:
            warnings.append(
                f"dropped duplicate root near {root.position} on "
                f"{root.line.axis}={root.line.fixed}"
            )
            continue
        lc.roots.append(root)
    lc.roots.sort(key=lambda r: r.position)
