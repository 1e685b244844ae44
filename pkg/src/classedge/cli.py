"""Command-line driver.

Subcommands: ``extract`` runs the polygoniser and writes the network as
JSON (plus SVG and a JSONL trace on request); ``compare`` scores an
extraction against the dense oracle; ``gen-field`` writes a deterministic
synthetic field spec; ``roots`` dumps the 1D transitions of one line;
``report`` runs the full pipeline and renders figures next to a metrics
CSV.

Exit codes: 0 success, 1 error, and for ``extract`` 2 when the run
completed with resolution-limit warnings.
"""

from __future__ import annotations

import argparse
import json
import math
import random
import sys
from dataclasses import dataclass
from pathlib import Path

from .field import FieldSpec, ClassSpec, FieldSpecError, build_field, parse_field_spec, spec_to_json
from .net import check_watertight, from_json, to_json, to_svg
from .oracle import (
    agreement_map,
    analytic_boundary,
    boundary_hausdorff,
    grid_to_text,
    rasterize,
    scan_line_roots,
)
from .poly2d import Rect, polygonise
from .root1d import AxisLine, Interval1D, RootCache, query_cached_roots

DEFAULT_BOUNDS = (0.0, 0.0, 1.0, 1.0)


@dataclass
class RunConfig:
    field_spec_path: str
    bounds: Rect
    vn: int = 2
    delta: float | None = None  # None means derived default; inf means off
    epsilon: float | None = None
    out_json: str | None = None
    out_svg: str | None = None
    trace_path: str | None = None
    oracle_res: int = 1000
    agreement_threshold: float = 0.999
    seed: int = 0

    def resolved(self):
        width = self.bounds.width
        epsilon = self.epsilon if self.epsilon is not None else 1e-12 * width
        delta = self.delta
        if delta is None:
            delta = 1e-3 * width
        elif delta == math.inf:
            delta = None
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if epsilon >= self.bounds.min_side:
            raise ValueError("epsilon must be smaller than the bounds sides")
        return delta, epsilon


def _parse_bounds(text) -> Rect:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("bounds must be x0,y0,x1,y1")
    return Rect(parts[0], parts[2], parts[1], parts[3])


def _parse_delta(text):
    if text == "off":
        return math.inf
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("delta must be positive or 'off'")
    return value


def _load(config: RunConfig):
    with open(config.field_spec_path, "rb") as fh:
        spec = parse_field_spec(fh.read())
    return spec, build_field(spec)


def cmd_extract(config: RunConfig) -> int:
    try:
        spec, field = _load(config)
        delta, epsilon = config.resolved()
    except (OSError, FieldSpecError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    trace = [] if config.trace_path else None
    net = polygonise(field, config.bounds, config.vn, delta, epsilon, trace=trace)
    if config.out_json:
        Path(config.out_json).write_text(to_json(net))
    if config.out_svg:
        Path(config.out_svg).write_text(to_svg(net))
    if config.trace_path:
        with open(config.trace_path, "w") as fh:
            for record in trace:
                fh.write(json.dumps(record, sort_keys=True) + "\n")
    for w in net.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 2 if net.warnings else 0


def compare_metrics(config: RunConfig, net) -> dict:
    spec, field = _load(config)
    _, epsilon = config.resolved()
    report = check_watertight(net)
    metrics = {
        "watertight": report.ok,
        "odd_degree_vertices": len(report.odd_interior),
        "malformed_junctions": len(report.bad_junctions),
        "segment_crossings": len(report.crossings),
        "segments": len(net.segments),
        "vertices": len(net.vertices),
        "warnings": len(net.warnings),
    }
    if not report.ok:
        metrics["agreement"] = 0.0
        return metrics

    grid = rasterize(field, net.bounds, config.oracle_res)
    exclusion = 2.0 * epsilon * max(config.bounds.width, config.bounds.height)
    amap = agreement_map(net, grid, exclusion)
    considered = int((amap >= 0).sum())
    agree = int((amap == 1).sum())
    metrics["agreement"] = agree / considered if considered else 1.0
    metrics["considered_cells"] = considered
    metrics["excluded_cells"] = int((amap == -1).sum())

    analytic = analytic_boundary(spec, net.bounds)
    if analytic is not None:
        sampler, distance = analytic
        metrics["hausdorff"] = boundary_hausdorff(net, sampler, 5000,
                                                  distance_fn=distance)
    return metrics


def cmd_compare(config: RunConfig, network_path, dump_grid=None) -> int:
    try:
        net = from_json(Path(network_path).read_bytes())
        metrics = compare_metrics(config, net)
    except (OSError, FieldSpecError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if dump_grid:
        spec, field = _load(config)
        grid = rasterize(field, net.bounds, config.oracle_res)
        Path(dump_grid).write_text(grid_to_text(grid))
    print(json.dumps(metrics, sort_keys=True))
    if not metrics["watertight"]:
        report = check_watertight(net)
        print(f"error: network is not watertight: {report.summary()}",
              file=sys.stderr)
        return 1
    return 0 if metrics["agreement"] >= config.agreement_threshold else 1


def generate_field_spec(kind: str, k: int, seed: int) -> FieldSpec:
    """Deterministic synthetic field spec; same seed, same spec."""
    if k < 2:
        raise FieldSpecError("$.k: need at least 2 classes")
    rng = random.Random(seed)
    if kind == "smoothed_voronoi":
        classes = tuple(
            ClassSpec(centers=((rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)),),
                      weights=(0.0,))
            for _ in range(k)
        )
        return FieldSpec(kind=kind, k=k, temperature=0.05, classes=classes)
    if kind == "softmax_rbf":
        classes = []
        for _ in range(k):
            n_centers = rng.randint(1, 2)
            centers = tuple(
                (rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9))
                for _ in range(n_centers)
            )
            weights = tuple(rng.uniform(0.8, 1.2) for _ in range(n_centers))
            classes.append(ClassSpec(centers=centers, weights=weights))
        return FieldSpec(kind=kind, k=k, temperature=0.15, sharpness=6.0,
                         classes=tuple(classes))
    if kind == "linear_planes":
        classes = tuple(
            ClassSpec(coeffs=(rng.uniform(-1, 1), rng.uniform(-1, 1),
                              rng.uniform(-1, 1)))
            for _ in range(k)
        )
        return FieldSpec(kind=kind, k=k, scale=1.0 / (8.0 * k), classes=classes)
    if kind == "sigmoid_1d":
        if k != 2:
            raise FieldSpecError("$.k: sigmoid_1d fields are two-class")
        n = rng.randint(1, 3)
        transitions = tuple(sorted(rng.uniform(0.1, 0.9) for _ in range(n)))
        return FieldSpec(kind=kind, k=2, sharpness=5.0, transitions=transitions)
    raise FieldSpecError(f"$.kind: unsupported kind {kind!r}")


def cmd_gen_field(kind, k, seed, out_path) -> int:
    try:
        spec = generate_field_spec(kind, k, seed)
    except FieldSpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    text = spec_to_json(spec)
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_roots(config: RunConfig, axis, fixed, lo, hi) -> int:
    try:
        spec, field = _load(config)
        _, epsilon = config.resolved()
        line = AxisLine(axis, fixed)
        cache = RootCache()
        roots = query_cached_roots(cache, line, Interval1D(lo, hi), field,
                                   config.vn, epsilon)
    except (OSError, FieldSpecError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    doc = {
        "axis": axis,
        "fixed": fixed,
        "roots": [
            {"pos": r.position, "left": r.left_class, "right": r.right_class}
            for r in roots
        ],
    }
    print(json.dumps(doc, sort_keys=True))
    return 0


def cmd_report(config: RunConfig, out_dir) -> int:
    from . import report as report_mod

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        spec, field = _load(config)
        delta, epsilon = config.resolved()
    except (OSError, FieldSpecError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    net = polygonise(field, config.bounds, config.vn, delta, epsilon)
    (out / "network.json").write_text(to_json(net))
    (out / "network.svg").write_text(to_svg(net))

    metrics = compare_metrics(config, net)
    grid = rasterize(field, net.bounds, config.oracle_res)
    report_mod.render_class_grid(grid, out / "field_classes.png", net,
                                 title="classes and extracted boundaries")
    report_mod.render_network(net, out / "network.png",
                              title="extracted boundary network")
    if metrics["watertight"]:
        exclusion = 2.0 * epsilon * max(config.bounds.width, config.bounds.height)
        amap = agreement_map(net, grid, exclusion)
        report_mod.render_agreement(amap, grid, out / "agreement.png")
    report_mod.write_metrics_csv(metrics, out / "metrics.csv")
    print(json.dumps(metrics, sort_keys=True))
    return 0 if metrics["watertight"] else 1


def _add_common(p):
    p.add_argument("--field", required=True, help="field-spec JSON path")
    p.add_argument("--bounds", type=_parse_bounds, default=None,
                   help="extraction bounds as x0,y0,x1,y1 (default 0,0,1,1)")
    p.add_argument("--vn", type=int, default=2, help="verification depth")
    p.add_argument("--epsilon", type=float, default=None,
                   help="subdivision limit (default 1e-12 * width)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="classedge",
        description="Class-boundary edge networks from multi-class 2D fields",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="run the polygoniser")
    _add_common(p)
    p.add_argument("--delta", type=_parse_delta, default=None,
                   help="geometric threshold, or 'off' (default 1e-3 * width)")
    p.add_argument("--out-json", required=True, help="network JSON output path")
    p.add_argument("--out-svg", default=None, help="SVG output path")
    p.add_argument("--trace", default=None, help="JSONL trace output path")

    p = sub.add_parser("compare", help="score an extraction against the oracle")
    _add_common(p)
    p.add_argument("--network", required=True, help="network JSON to score")
    p.add_argument("--oracle-res", type=int, default=1000)
    p.add_argument("--agreement-threshold", type=float, default=0.999)
    p.add_argument("--dump-grid", default=None,
                   help="write the oracle grid as PGM-style text")

    p = sub.add_parser("gen-field", help="write a deterministic field spec")
    p.add_argument("--kind", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", default=None)

    p = sub.add_parser("roots", help="dump 1D transitions on one line")
    _add_common(p)
    p.add_argument("--axis", choices=("x", "y"), required=True)
    p.add_argument("--fixed", type=float, required=True)
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, required=True)

    p = sub.add_parser("report", help="extract, compare and render figures")
    _add_common(p)
    p.add_argument("--delta", type=_parse_delta, default=None)
    p.add_argument("--oracle-res", type=int, default=1000)
    p.add_argument("--agreement-threshold", type=float, default=0.999)
    p.add_argument("--out-dir", required=True)

    return parser


def _config_from(args) -> RunConfig:
    bounds = args.bounds if args.bounds is not None else Rect(*(
        DEFAULT_BOUNDS[0], DEFAULT_BOUNDS[2], DEFAULT_BOUNDS[1], DEFAULT_BOUNDS[3]))
    return RunConfig(
        field_spec_path=args.field,
        bounds=bounds,
        vn=args.vn,
        delta=getattr(args, "delta", None),
        epsilon=args.epsilon,
        oracle_res=getattr(args, "oracle_res", 1000),
        agreement_threshold=getattr(args, "agreement_threshold", 0.999),
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "gen-field":
        return cmd_gen_field(args.kind, args.k, args.seed, args.out)
    config = _config_from(args)
    if args.command == "extract":
        config.out_json = args.out_json
        config.out_svg = args.out_svg
        config.trace_path = args.trace
        return cmd_extract(config)
    if args.command == "compare":
        return cmd_compare(config, args.network, args.dump_grid)
    if args.command == "roots":
        return cmd_roots(config, args.axis, args.fixed, args.lo, args.hi)
    if args.command == "report":
        return cmd_report(config, args.out_dir)
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
