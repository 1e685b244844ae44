"""Watertight class-boundary edge networks from multi-class 2D fields."""

from .field import (
    CallableField,
    FieldSpec,
    FieldSpecError,
    LinearPlanesField,
    MultiClassField,
    Sigmoid1DField,
    SmoothedVoronoiField,
    SoftmaxRbfField,
    build_field,
    classify_point,
    evaluate,
    gradient,
    load_field,
    parse_field_spec,
    spec_to_json,
    top_two,
)

__version__ = "0.1.0"
