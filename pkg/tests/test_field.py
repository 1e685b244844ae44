import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from classedge.field import (
    CallableField,
    FieldSpecError,
    InvalidPointError,
    LinearPlanesField,
    Sigmoid1DField,
    SmoothedVoronoiField,
    SoftmaxRbfField,
    _top_two_of,
    build_field,
    classify_point,
    evaluate,
    gradient,
    parse_field_spec,
    spec_to_json,
    top_two,
)


def rbf_three_corners(sharpness=4.0, temperature=1.0):
    return SoftmaxRbfField(
        centers=[[(0.0, 0.0)], [(1.0, 0.0)], [(0.5, 1.0)]],
        weights=[[1.0], [1.0], [1.0]],
        biases=[0.0, 0.0, 0.0],
        sharpness=sharpness,
        temperature=temperature,
    )


def test_sigmoid_midpoint_is_even_split():
    f = Sigmoid1DField(transitions=[0.0])
    assert evaluate(f, (0.0, 3.7)) == (0.5, 0.5)


def test_linear_planes_symmetric_at_origin():
    f = LinearPlanesField([(1, 0, 0), (0, 1, 0), (-1, -1, 0)], scale=0.1)
    p = evaluate(f, (0.0, 0.0))
    assert p == pytest.approx((1 / 3, 1 / 3, 1 / 3), abs=1e-15)


def test_rbf_center_has_strict_maximum():
    f = rbf_three_corners()
    # independent closed-form softmax at the class-1 center
    d = [(1.0, 0.0), (0.0, 0.0), (0.5, 1.0)]
    scores = [math.exp(-4.0 * (dx * dx + dy * dy)) for dx, dy in d]
    m = max(scores)
    expected = [math.exp(s - m) for s in scores]
    expected = [e / sum(expected) for e in expected]
    got = evaluate(f, (1.0, 0.0))
    assert got == pytest.approx(expected, abs=1e-15)
    assert got[1] > max(got[0], got[2])
    assert classify_point(f, (1.0, 0.0)) == 1


def test_classify_tie_takes_smallest_index():
    f = CallableField(3, lambda x, y: (0.4, 0.4, 0.2))
    assert classify_point(f, (0.0, 0.0)) == 0
    f = CallableField(3, lambda x, y: (0.2, 0.5, 0.3))
    assert classify_point(f, (0.0, 0.0)) == 1


def test_linear_planes_argmax_preserved():
    f = LinearPlanesField([(1, 0, 0), (0, 1, 0), (-1, -1, 0)], scale=0.1)
    assert classify_point(f, (1.0, 0.0)) == 0


def test_top_two_cases():
    assert _top_two_of((0.1, 0.6, 0.3)) == (1, 2)
    assert _top_two_of((0.5, 0.5, 0.0)) == (0, 1)
    assert _top_two_of((1 / 3, 1 / 3, 1 / 3)) == (0, 1)


def test_top_two_matches_classify():
    f = rbf_three_corners()
    rng = np.random.default_rng(0)
    for x, y in rng.uniform(-1, 2, size=(50, 2)):
        first, second = top_two(f, (x, y))
        assert first != second
        assert first == classify_point(f, (x, y))


@given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=2, max_size=8))
def test_top_two_property(vals):
    first, second = _top_two_of(vals)
    assert first != second
    assert vals[first] == max(vals)
    others = [v for i, v in enumerate(vals) if i != first]
    assert vals[second] == max(others)
    # smallest-index tie rule
    assert all(vals[i] < vals[first] for i in range(first))
    assert all(vals[i] < vals[second] for i in range(second) if i != first)


def test_non_finite_point_rejected():
    f = Sigmoid1DField()
    with pytest.raises(InvalidPointError):
        evaluate(f, (float("nan"), 0.0))
    with pytest.raises(InvalidPointError):
        evaluate(f, (float("inf"), 0.0))


@pytest.mark.parametrize(
    "make",
    [
        lambda: rbf_three_corners(sharpness=3.0, temperature=0.7),
        lambda: SmoothedVoronoiField([(0, 0), (1, 0.2), (0.3, 1)], [0.0, 0.1, -0.05], 0.25),
        lambda: LinearPlanesField([(1, 0, 0), (0, 1, 0), (-1, -1, 0)], scale=0.05),
        lambda: Sigmoid1DField(transitions=[0.2, 0.9], sharpness=2.0),
    ],
    ids=["softmax_rbf", "smoothed_voronoi", "linear_planes", "sigmoid_1d"],
)
def test_gradient_matches_finite_difference(make):
    f = make()
    rng = np.random.default_rng(7)
    for x, y in rng.uniform(-0.5, 1.5, size=(100, 2)):
        for c in range(f.k):
            gx, gy = gradient(f, (x, y), c)
            h = 1e-5 * max(1.0, math.hypot(x, y))
            fx = (f.probabilities(x + h, y)[c] - f.probabilities(x - h, y)[c]) / (2 * h)
            fy = (f.probabilities(x, y + h)[c] - f.probabilities(x, y - h)[c]) / (2 * h)
            assert gx == pytest.approx(fx, abs=1e-4)
            assert gy == pytest.approx(fy, abs=1e-4)


def test_constant_field_gradient_zero():
    f = CallableField(2, lambda x, y: (0.25, 0.75))
    assert gradient(f, (0.3, -2.0), 0) == (0.0, 0.0)


def test_linear_planes_gradient_exact():
    f = LinearPlanesField([(1, 0, 0), (0, 1, 0), (-1, -1, 0)], scale=0.1)
    # channel 0 deviation is x - mean = x, so grad = scale * (1 - 0, ...)
    gx, gy = gradient(f, (0.4, -0.2), 0)
    assert gx == pytest.approx(0.1, abs=1e-15)
    assert gy == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize(
    "make",
    [
        lambda: rbf_three_corners(sharpness=2.0),
        lambda: SmoothedVoronoiField([(0, 0), (1, 0), (0, 1), (1, 1)], temperature=0.2),
        lambda: LinearPlanesField([(1, 0, 0), (0, 1, 0), (-1, -1, 0)], scale=0.05),
        lambda: Sigmoid1DField(transitions=[0.4]),
    ],
    ids=["softmax_rbf", "smoothed_voronoi", "linear_planes", "sigmoid_1d"],
)
def test_batch_matches_scalar(make):
    f = make()
    rng = np.random.default_rng(3)
    pts = rng.uniform(-0.5, 1.5, size=(64, 2))
    batch = f.probabilities_batch(pts)
    assert batch.shape == (64, f.k)
    for i, (x, y) in enumerate(pts):
        scalar = f.probabilities(float(x), float(y))
        assert batch[i] == pytest.approx(scalar, abs=1e-12)
    sums = batch.sum(axis=1)
    assert np.all(np.abs(sums - 1.0) <= 1e-9)


def test_evaluation_deterministic():
    f = rbf_three_corners(sharpness=5.0, temperature=0.3)
    a = evaluate(f, (0.123456, -0.98765))
    b = evaluate(f, (0.123456, -0.98765))
    assert a == b  # bit-identical


def test_argmax_invariant_under_score_scaling():
    # scaling all unnormalised scores by a positive constant is the same as
    # scaling weights/biases by c with temperature also scaled by c
    base = dict(
        centers=[[(0.0, 0.0)], [(1.0, 0.0)], [(0.5, 1.0)]],
        weights=[[1.0], [1.3], [0.8]],
        biases=[0.05, 0.0, 0.1],
        sharpness=3.0,
    )
    c = 7.5
    f1 = SoftmaxRbfField(**base, temperature=1.0)
    f2 = SoftmaxRbfField(
        centers=base["centers"],
        weights=[[w * c for w in ws] for ws in base["weights"]],
        biases=[b * c for b in base["biases"]],
        sharpness=base["sharpness"],
        temperature=c,
    )
    rng = np.random.default_rng(11)
    for x, y in rng.uniform(-1, 2, size=(200, 2)):
        assert classify_point(f1, (x, y)) == classify_point(f2, (x, y))


# ---------------------------------------------------------------------------
# spec parsing
# ---------------------------------------------------------------------------


def test_parse_minimal_sigmoid_spec():
    spec = parse_field_spec(b'{"kind": "sigmoid_1d", "k": 2}')
    assert spec.k == 2
    f = build_field(spec)
    assert evaluate(f, (0.0, 0.0)) == (0.5, 0.5)


def test_parse_rejects_single_class():
    with pytest.raises(FieldSpecError, match=r"\$\.k"):
        parse_field_spec('{"kind": "sigmoid_1d", "k": 1}')


def test_parse_fourteen_class_rbf():
    classes = [
        {"centers": [[i * 0.1, 0.0]], "weights": [1.0]} for i in range(14)
    ]
    doc = json.dumps({"kind": "softmax_rbf", "k": 14, "classes": classes})
    spec = parse_field_spec(doc)
    assert spec.k == 14
    f = build_field(spec)
    assert len(evaluate(f, (0.2, 0.0))) == 14


def test_parse_error_names_offending_path():
    doc = json.dumps({
        "kind": "softmax_rbf",
        "k": 2,
        "classes": [
            {"centers": [[0, 0]], "weights": [1.0]},
            {"centers": [[0, "bad"]], "weights": [1.0]},
        ],
    })
    with pytest.raises(FieldSpecError, match=r"classes\[1\]\.centers\[0\]\[1\]"):
        parse_field_spec(doc)
    with pytest.raises(FieldSpecError, match=r"\$\.kind"):
        parse_field_spec('{"kind": "mystery", "k": 2}')


def test_spec_roundtrip_and_stability():
    doc = json.dumps({
        "kind": "smoothed_voronoi",
        "k": 3,
        "temperature": 0.25,
        "classes": [
            {"centers": [[0.1, 0.2]], "weights": [0.0]},
            {"centers": [[0.7, 0.3]], "weights": [0.1]},
            {"centers": [[0.4, 0.9]], "weights": [-0.2]},
        ],
    })
    spec = parse_field_spec(doc)
    text = spec_to_json(spec)
    assert parse_field_spec(text) == spec
    assert spec_to_json(parse_field_spec(text)) == text
