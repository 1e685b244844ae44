"""Multi-class probability fields over the plane.

A field maps every point of R^2 to a probability vector over k >= 2 classes.
The class of a point is the argmax of that vector, with ties broken toward
the smallest class index.  Class indices are 0-based throughout.

Four analytic families are provided, all smooth and exactly normalised:

``softmax_rbf``
    Per-class scores are weighted sums of isotropic Gaussians (plus an
    optional constant bias), pushed through a temperature softmax.
``smoothed_voronoi``
    One site per class; scores are additively weighted negative squared
    distances, softmaxed.  The argmax regions are exact power-diagram cells.
``linear_planes``
    Affine per-class scores, normalised as ``1/k + scale * (s_i - mean(s))``
    so the probability channels themselves stay affine.  Only valid where
    the result lies in [0, 1]; pick ``scale`` against the intended bounds.
``sigmoid_1d``
    Two classes split along x by a sigmoid of ``sharpness * prod(x - t_i)``;
    the transitions sit exactly at the ``t_i``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

Point = tuple[float, float]

FIELD_KINDS = ("softmax_rbf", "smoothed_voronoi", "linear_planes", "sigmoid_1d")

PROB_SUM_TOL = 1e-9


class FieldSpecError(ValueError):
    """A field-spec document is malformed; the message names the bad path."""


class InvalidPointError(ValueError):
    """An evaluation point has non-finite coordinates."""


class NumericalError(ArithmeticError):
    """An evaluation or gradient produced a non-finite or invalid result."""


def _softmax(scores):
    m = max(scores)
    exps = [math.exp(s - m) for s in scores]
    t = sum(exps)
    return [e / t for e in exps]


def _top_two_of(values) -> tuple[int, int]:
    # strict '>' keeps the smallest index on exact ties
    best = 0
    for i in range(1, len(values)):
        if values[i] > values[best]:
            best = i
    second = 1 if best == 0 else 0
    for i in range(len(values)):
        if i == best or i == second:
            continue
        if values[i] > values[second]:
            second = i
    return best, second


class MultiClassField:
    """Base class: a deterministic k-channel probability field with gradients.

    Subclasses implement ``probabilities`` (scalar) and usually override
    ``probabilities_batch`` (vectorised) and ``gradient`` (analytic).  The
    base ``gradient`` is a central finite difference with step
    ``1e-5 * max(1, |p|)``.
    """

    k: int

    def probabilities(self, x: float, y: float) -> list[float]:
        raise NotImplementedError

    def probabilities_batch(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        out = np.empty((pts.shape[0], self.k))
        for i in range(pts.shape[0]):
            out[i] = self.probabilities(float(pts[i, 0]), float(pts[i, 1]))
        return out

    def gradient(self, x: float, y: float, c: int) -> tuple[float, float]:
        h = 1e-5 * max(1.0, math.hypot(x, y))
        gx = (self.probabilities(x + h, y)[c] - self.probabilities(x - h, y)[c]) / (2.0 * h)
        gy = (self.probabilities(x, y + h)[c] - self.probabilities(x, y - h)[c]) / (2.0 * h)
        return gx, gy


class CallableField(MultiClassField):
    """Field defined by arbitrary callables; used for hand-built test fields.

    ``func(x, y)`` must return a length-k sequence of probabilities.
    ``grad(x, y, c)`` is optional; without it gradients fall back to
    finite differences.
    """

    def __init__(self, k, func, grad=None):
        self.k = k
        self._func = func
        self._grad = grad

    def probabilities(self, x, y):
        return list(self._func(x, y))

    def gradient(self, x, y, c):
        if self._grad is None:
            return super().gradient(x, y, c)
        return self._grad(x, y, c)


class SoftmaxRbfField(MultiClassField):
    def __init__(self, centers, weights, biases, sharpness=1.0, temperature=1.0):
        self.k = len(centers)
        self._centers = [[(float(cx), float(cy)) for cx, cy in cs] for cs in centers]
        self._weights = [[float(w) for w in ws] for ws in weights]
        self._biases = [float(b) for b in biases]
        self._sharp = float(sharpness)
        self._temp = float(temperature)
        # flat arrays for the batch path
        self._b_cx = [np.array([c[0] for c in cs]) for cs in self._centers]
        self._b_cy = [np.array([c[1] for c in cs]) for cs in self._centers]
        self._b_w = [np.array(ws) for ws in self._weights]

    def _scores_and_grads(self, x, y):
        scores, gxs, gys = [], [], []
        g2 = 2.0 * self._sharp
        for ci in range(self.k):
            s = self._biases[ci]
            gx = gy = 0.0
            for (cx, cy), w in zip(self._centers[ci], self._weights[ci]):
                dx = x - cx
                dy = y - cy
                e = w * math.exp(-self._sharp * (dx * dx + dy * dy))
                s += e
                gx -= g2 * dx * e
                gy -= g2 * dy * e
            scores.append(s / self._temp)
            gxs.append(gx / self._temp)
            gys.append(gy / self._temp)
        return scores, gxs, gys

    def probabilities(self, x, y):
        scores = []
        for ci in range(self.k):
            s = self._biases[ci]
            for (cx, cy), w in zip(self._centers[ci], self._weights[ci]):
                dx = x - cx
                dy = y - cy
                s += w * math.exp(-self._sharp * (dx * dx + dy * dy))
            scores.append(s / self._temp)
        return _softmax(scores)

    def probabilities_batch(self, pts):
        pts = np.asarray(pts, dtype=float)
        scores = np.empty((pts.shape[0], self.k))
        for ci in range(self.k):
            dx = pts[:, 0:1] - self._b_cx[ci][None, :]
            dy = pts[:, 1:2] - self._b_cy[ci][None, :]
            g = np.exp(-self._sharp * (dx * dx + dy * dy))
            scores[:, ci] = self._biases[ci] + g @ self._b_w[ci]
        scores /= self._temp
        scores -= scores.max(axis=1, keepdims=True)
        np.exp(scores, out=scores)
        scores /= scores.sum(axis=1, keepdims=True)
        return scores

    def gradient(self, x, y, c):
        scores, gxs, gys = self._scores_and_grads(x, y)
        p = _softmax(scores)
        mx = sum(pj * gj for pj, gj in zip(p, gxs))
        my = sum(pj * gj for pj, gj in zip(p, gys))
        return p[c] * (gxs[c] - mx), p[c] * (gys[c] - my)


class SmoothedVoronoiField(MultiClassField):
    """One site per class; argmax regions are exact power-diagram cells."""

    def __init__(self, centers, weights=None, temperature=1.0):
        self.k = len(centers)
        self._centers = [(float(cx), float(cy)) for cx, cy in centers]
        self._weights = [float(w) for w in (weights if weights is not None else [0.0] * self.k)]
        self._temp = float(temperature)
        self._b_c = np.array(self._centers)
        self._b_w = np.array(self._weights)

    def _scores_and_grads(self, x, y):
        scores, gxs, gys = [], [], []
        for (cx, cy), w in zip(self._centers, self._weights):
            dx = x - cx
            dy = y - cy
            scores.append((w - dx * dx - dy * dy) / self._temp)
            gxs.append(-2.0 * dx / self._temp)
            gys.append(-2.0 * dy / self._temp)
        return scores, gxs, gys

    def probabilities(self, x, y):
        scores = [
            (w - (x - cx) ** 2 - (y - cy) ** 2) / self._temp
            for (cx, cy), w in zip(self._centers, self._weights)
        ]
        return _softmax(scores)

    def probabilities_batch(self, pts):
        pts = np.asarray(pts, dtype=float)
        dx = pts[:, 0:1] - self._b_c[None, :, 0]
        dy = pts[:, 1:2] - self._b_c[None, :, 1]
        scores = (self._b_w[None, :] - dx * dx - dy * dy) / self._temp
        scores -= scores.max(axis=1, keepdims=True)
        np.exp(scores, out=scores)
        scores /= scores.sum(axis=1, keepdims=True)
        return scores

    def gradient(self, x, y, c):
        scores, gxs, gys = self._scores_and_grads(x, y)
        p = _softmax(scores)
        mx = sum(pj * gj for pj, gj in zip(p, gxs))
        my = sum(pj * gj for pj, gj in zip(p, gys))
        return p[c] * (gxs[c] - mx), p[c] * (gys[c] - my)


class LinearPlanesField(MultiClassField):
    """Affine probability channels: p_i = 1/k + scale * (s_i - mean(s)).

    Channels sum to one identically and remain affine, so tangent-plane
    methods are exact on this family.  Values leave [0, 1] far from the
    origin; keep ``scale * max|s_i - mean(s)|`` below 1/k on the working
    bounds.
    """

    def __init__(self, coeffs, scale=0.1):
        self.k = len(coeffs)
        self._coeffs = [(float(a), float(b), float(c)) for a, b, c in coeffs]
        self._scale = float(scale)
        arr = np.array(self._coeffs)
        self._dev = arr - arr.mean(axis=0, keepdims=True)  # (k, 3), rows sum to 0

    def probabilities(self, x, y):
        base = 1.0 / self.k
        return [
            base + self._scale * (da * x + db * y + dc)
            for da, db, dc in self._dev
        ]

    def probabilities_batch(self, pts):
        pts = np.asarray(pts, dtype=float)
        vals = 1.0 / self.k + self._scale * (
            pts[:, 0:1] * self._dev[None, :, 0]
            + pts[:, 1:2] * self._dev[None, :, 1]
            + self._dev[None, :, 2]
        )
        return vals

    def gradient(self, x, y, c):
        return self._scale * self._dev[c, 0], self._scale * self._dev[c, 1]


class Sigmoid1DField(MultiClassField):
    """Two classes split along x; transitions exactly at the given positions."""

    def __init__(self, transitions=(0.0,), sharpness=1.0):
        self.k = 2
        self._ts = [float(t) for t in transitions]
        self._sharp = float(sharpness)

    def _h(self, x):
        h = self._sharp
        for t in self._ts:
            h *= x - t
        return h

    def probabilities(self, x, y):
        p1 = 1.0 / (1.0 + math.exp(-self._h(x)))
        return [1.0 - p1, p1]

    def probabilities_batch(self, pts):
        pts = np.asarray(pts, dtype=float)
        h = np.full(pts.shape[0], self._sharp)
        for t in self._ts:
            h *= pts[:, 0] - t
        p1 = 1.0 / (1.0 + np.exp(-h))
        return np.stack([1.0 - p1, p1], axis=1)

    def gradient(self, x, y, c):
        # h'(x) by the product rule over the transition factors
        dh = 0.0
        for j in range(len(self._ts)):
            term = self._sharp
            for i, t in enumerate(self._ts):
                if i != j:
                    term *= x - t
            dh += term
        p1 = 1.0 / (1.0 + math.exp(-self._h(x)))
        d1 = p1 * (1.0 - p1) * dh
        return (d1, 0.0) if c == 1 else (-d1, 0.0)


# ---------------------------------------------------------------------------
# Field specs (the JSON interchange format) and the public operations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassSpec:
    centers: tuple[Point, ...] = ()
    weights: tuple[float, ...] = ()
    bias: float = 0.0
    coeffs: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class FieldSpec:
    kind: str
    k: int
    temperature: float = 1.0
    sharpness: float = 1.0
    scale: float = 0.1
    transitions: tuple[float, ...] = (0.0,)
    classes: tuple[ClassSpec, ...] = ()


def _fail(path: str, msg: str):
    raise FieldSpecError(f"{path}: {msg}")


def _finite_number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected a number, got {type(value).__name__}")
    value = float(value)
    if not math.isfinite(value):
        _fail(path, "must be finite")
    return value


def _point_list(value, path: str) -> tuple[Point, ...]:
    if not isinstance(value, list) or not value:
        _fail(path, "expected a non-empty list of [x, y] points")
    pts = []
    for i, item in enumerate(value):
        if not isinstance(item, list) or len(item) != 2:
            _fail(f"{path}[{i}]", "expected [x, y]")
        pts.append((_finite_number(item[0], f"{path}[{i}][0]"),
                    _finite_number(item[1], f"{path}[{i}][1]")))
    return tuple(pts)


def parse_field_spec(text) -> FieldSpec:
    """Parse and validate a field-spec JSON document (str or bytes)."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FieldSpecError(f"$: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        _fail("$", "expected a JSON object")

    kind = doc.get("kind")
    if kind not in FIELD_KINDS:
        _fail("$.kind", f"expected one of {FIELD_KINDS}, got {kind!r}")
    k = doc.get("k")
    if not isinstance(k, int) or isinstance(k, bool):
        _fail("$.k", "expected an integer")
    if k < 2:
        _fail("$.k", f"need at least 2 classes, got {k}")

    temperature = _finite_number(doc.get("temperature", 1.0), "$.temperature")
    if temperature <= 0:
        _fail("$.temperature", "must be positive")
    sharpness = _finite_number(doc.get("sharpness", 1.0), "$.sharpness")
    if sharpness <= 0:
        _fail("$.sharpness", "must be positive")
    scale = _finite_number(doc.get("scale", 0.1), "$.scale")

    if kind == "sigmoid_1d":
        if k != 2:
            _fail("$.k", "sigmoid_1d fields are two-class")
        raw = doc.get("transitions", [0.0])
        if not isinstance(raw, list) or not raw:
            _fail("$.transitions", "expected a non-empty list of numbers")
        transitions = tuple(
            _finite_number(t, f"$.transitions[{i}]") for i, t in enumerate(raw)
        )
        return FieldSpec(kind=kind, k=k, temperature=temperature,
                         sharpness=sharpness, transitions=transitions)

    raw_classes = doc.get("classes")
    if not isinstance(raw_classes, list):
        _fail("$.classes", "expected a list with one entry per class")
    if len(raw_classes) != k:
        _fail("$.classes", f"expected {k} entries, got {len(raw_classes)}")

    classes = []
    for ci, entry in enumerate(raw_classes):
        path = f"$.classes[{ci}]"
        if not isinstance(entry, dict):
            _fail(path, "expected an object")
        if kind == "linear_planes":
            raw_coeffs = entry.get("coeffs")
            if not isinstance(raw_coeffs, list) or len(raw_coeffs) != 3:
                _fail(f"{path}.coeffs", "expected [a, b, c]")
            coeffs = tuple(
                _finite_number(v, f"{path}.coeffs[{i}]") for i, v in enumerate(raw_coeffs)
            )
            classes.append(ClassSpec(coeffs=coeffs))
            continue
        centers = _point_list(entry.get("centers"), f"{path}.centers")
        if kind == "smoothed_voronoi" and len(centers) != 1:
            _fail(f"{path}.centers", "smoothed_voronoi takes exactly one center per class")
        raw_w = entry.get("weights", [1.0] * len(centers))
        if not isinstance(raw_w, list) or len(raw_w) != len(centers):
            _fail(f"{path}.weights", "expected one weight per center")
        weights = tuple(_finite_number(w, f"{path}.weights[{i}]") for i, w in enumerate(raw_w))
        bias = _finite_number(entry.get("bias", 0.0), f"{path}.bias")
        classes.append(ClassSpec(centers=centers, weights=weights, bias=bias))

    return FieldSpec(kind=kind, k=k, temperature=temperature, sharpness=sharpness,
                     scale=scale, classes=tuple(classes))


def spec_to_json(spec: FieldSpec) -> str:
    """Canonical JSON for a spec; byte-stable for identical specs."""
    doc: dict = {"kind": spec.kind, "k": spec.k, "temperature": spec.temperature}
    if spec.kind == "sigmoid_1d":
        doc["sharpness"] = spec.sharpness
        doc["transitions"] = list(spec.transitions)
    elif spec.kind == "linear_planes":
        doc["scale"] = spec.scale
        doc["classes"] = [{"coeffs": list(c.coeffs)} for c in spec.classes]
    else:
        if spec.kind == "softmax_rbf":
            doc["sharpness"] = spec.sharpness
        doc["classes"] = [
            {"centers": [list(p) for p in c.centers], "weights": list(c.weights), "bias": c.bias}
            for c in spec.classes
        ]
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def build_field(spec: FieldSpec) -> MultiClassField:
    if spec.kind == "sigmoid_1d":
        return Sigmoid1DField(spec.transitions, spec.sharpness)
    if spec.kind == "linear_planes":
        return LinearPlanesField([c.coeffs for c in spec.classes], spec.scale)
    if spec.kind == "smoothed_voronoi":
        return SmoothedVoronoiField(
            [c.centers[0] for c in spec.classes],
            [c.weights[0] if c.weights else 0.0 for c in spec.classes],
            spec.temperature,
        )
    if spec.kind == "softmax_rbf":
        return SoftmaxRbfField(
            [c.centers for c in spec.classes],
            [c.weights for c in spec.classes],
            [c.bias for c in spec.classes],
            spec.sharpness,
            spec.temperature,
        )
    raise FieldSpecError(f"$.kind: unknown kind {spec.kind!r}")


def load_field(path) -> MultiClassField:
    with open(path, "rb") as fh:
        return build_field(parse_field_spec(fh.read()))


def evaluate(field: MultiClassField, p: Point) -> tuple[float, ...]:
    """Evaluate the field at a point, validating the probability vector."""
    x, y = float(p[0]), float(p[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise InvalidPointError(f"non-finite point ({p[0]}, {p[1]})")
    vals = field.probabilities(x, y)
    total = sum(vals)
    if not math.isfinite(total) or abs(total - 1.0) > PROB_SUM_TOL:
        raise NumericalError(f"probabilities at ({x}, {y}) sum to {total}")
    if min(vals) < -PROB_SUM_TOL or max(vals) > 1.0 + PROB_SUM_TOL:
        raise NumericalError(f"probability out of [0, 1] at ({x}, {y})")
    return tuple(vals)


def classify_point(field: MultiClassField, p: Point) -> int:
    """Smallest index attaining the maximum probability."""
    vals = field.probabilities(float(p[0]), float(p[1]))
    best = 0
    for i in range(1, len(vals)):
        if vals[i] > vals[best]:
            best = i
    return best


def top_two(field: MultiClassField, p: Point) -> tuple[int, int]:
    """Indices of the two largest probabilities, ties toward smaller index."""
    vals = field.probabilities(float(p[0]), float(p[1]))
    return _top_two_of(vals)


def gradient(field: MultiClassField, p: Point, c: int) -> tuple[float, float]:
    """Spatial gradient of probability channel c at p."""
    if not 0 <= c < field.k:
        raise ValueError(f"class {c} out of range for k={field.k}")
    gx, gy = field.gradient(float(p[0]), float(p[1]), c)
    if not (math.isfinite(gx) and math.isfinite(gy)):
        raise NumericalError(f"non-finite gradient at ({p[0]}, {p[1]}) for class {c}")
    return gx, gy
