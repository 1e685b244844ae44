import json
import math

import pytest

from classedge.cli import main


def run(args):
    return main([str(a) for a in args])


@pytest.fixture
def voronoi_spec(tmp_path):
    path = tmp_path / "field.json"
    assert run(["gen-field", "--kind", "smoothed_voronoi", "--k", 4,
                "--seed", 7, "-o", path]) == 0
    return path


@pytest.fixture
def sigmoid_spec(tmp_path):
    path = tmp_path / "sig.json"
    path.write_text(json.dumps({
        "kind": "sigmoid_1d", "k": 2, "sharpness": 6.0, "transitions": [0.4],
    }))
    return path


def test_gen_field_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(["gen-field", "--kind", "softmax_rbf", "--k", 5, "--seed", 42,
                "-o", a]) == 0
    assert run(["gen-field", "--kind", "softmax_rbf", "--k", 5, "--seed", 42,
                "-o", b]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_gen_field_fourteen_classes(tmp_path):
    out = tmp_path / "f.json"
    assert run(["gen-field", "--kind", "softmax_rbf", "--k", 14, "--seed", 1,
                "-o", out]) == 0
    doc = json.loads(out.read_text())
    assert doc["k"] == 14 and len(doc["classes"]) == 14


def test_gen_field_single_class_fails(tmp_path, capsys):
    assert run(["gen-field", "--kind", "softmax_rbf", "--k", 1]) == 1
    assert "error" in capsys.readouterr().err


def test_gen_field_unsupported_kind(capsys):
    assert run(["gen-field", "--kind", "mystery", "--k", 3]) == 1


def test_extract_constant_field_empty_network(tmp_path):
    spec = tmp_path / "f.json"
    spec.write_text(json.dumps({
        "kind": "smoothed_voronoi", "k": 2, "temperature": 0.2,
        "classes": [
            {"centers": [[0.5, 0.5]], "weights": [0.0]},
            {"centers": [[5.0, 5.0]], "weights": [0.0]},
        ],
    }))
    out = tmp_path / "net.json"
    assert run(["extract", "--field", spec, "--out-json", out]) == 0
    doc = json.loads(out.read_text())
    assert doc["segments"] == [] and doc["vertices"] == []


def test_extract_writes_all_outputs(sigmoid_spec, tmp_path):
    out_json = tmp_path / "net.json"
    out_svg = tmp_path / "net.svg"
    trace = tmp_path / "trace.jsonl"
    code = run(["extract", "--field", sigmoid_spec, "--out-json", out_json,
                "--out-svg", out_svg, "--trace", trace, "--epsilon", 1e-10])
    assert code == 0
    assert json.loads(out_json.read_text())["segments"]
    assert out_svg.read_text().startswith("<?xml")
    records = [json.loads(line) for line in trace.read_text().splitlines()]
    assert all({"x_lo", "x_hi", "y_lo", "y_hi", "class", "action"} <= set(r)
               for r in records)


def test_extract_deterministic_bytes(voronoi_spec, tmp_path):
    outs = []
    for name in ("n1.json", "n2.json"):
        out = tmp_path / name
        assert run(["extract", "--field", voronoi_spec, "--out-json", out,
                    "--epsilon", 1e-10, "--delta", 0.01]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_extract_missing_spec_errors(tmp_path, capsys):
    assert run(["extract", "--field", tmp_path / "nope.json",
                "--out-json", tmp_path / "o.json"]) == 1
    assert "error" in capsys.readouterr().err


def test_extract_epsilon_validation(sigmoid_spec, tmp_path, capsys):
    assert run(["extract", "--field", sigmoid_spec,
                "--out-json", tmp_path / "o.json", "--epsilon", 2.0]) == 1


def test_compare_good_extraction_passes(voronoi_spec, tmp_path, capsys):
    out = tmp_path / "net.json"
    assert run(["extract", "--field", voronoi_spec, "--out-json", out,
                "--epsilon", 1e-10]) == 0
    code = run(["compare", "--field", voronoi_spec, "--network", out,
                "--oracle-res", 300, "--epsilon", 1e-10,
                "--agreement-threshold", 0.995])
    captured = capsys.readouterr()
    metrics = json.loads(captured.out.strip().splitlines()[-1])
    assert code == 0
    assert metrics["watertight"] is True
    assert metrics["agreement"] >= 0.995


def test_compare_corrupted_network_fails(voronoi_spec, tmp_path, capsys):
    out = tmp_path / "net.json"
    assert run(["extract", "--field", voronoi_spec, "--out-json", out,
                "--epsilon", 1e-10]) == 0
    doc = json.loads(out.read_text())
    assert doc["segments"]
    doc["segments"] = doc["segments"][:-1]  # break watertightness
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps(doc))
    code = run(["compare", "--field", voronoi_spec, "--network", broken,
                "--oracle-res", 200, "--epsilon", 1e-10])
    captured = capsys.readouterr()
    assert code == 1
    assert "not watertight" in captured.err


def test_compare_reports_hausdorff_for_sigmoid(sigmoid_spec, tmp_path, capsys):
    out = tmp_path / "net.json"
    assert run(["extract", "--field", sigmoid_spec, "--out-json", out,
                "--epsilon", 1e-10]) == 0
    code = run(["compare", "--field", sigmoid_spec, "--network", out,
                "--oracle-res", 200, "--epsilon", 1e-10])
    metrics = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert code == 0
    assert metrics["hausdorff"] < 1e-8


def test_compare_dump_grid(sigmoid_spec, tmp_path):
    out = tmp_path / "net.json"
    run(["extract", "--field", sigmoid_spec, "--out-json", out,
         "--epsilon", 1e-10])
    dump = tmp_path / "grid.txt"
    run(["compare", "--field", sigmoid_spec, "--network", out,
         "--oracle-res", 50, "--epsilon", 1e-10, "--dump-grid", dump])
    header = dump.read_text().splitlines()[0]
    assert header == "50 50 2"


def test_roots_subcommand(sigmoid_spec, capsys):
    code = run(["roots", "--field", sigmoid_spec, "--axis", "x",
                "--fixed", 0.5, "--lo", 0.0, "--hi", 1.0])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["axis"] == "x" and doc["fixed"] == 0.5
    assert len(doc["roots"]) == 1
    assert doc["roots"][0]["pos"] == pytest.approx(0.4, abs=1e-9)
    assert (doc["roots"][0]["left"], doc["roots"][0]["right"]) == (0, 1)


def test_report_writes_figures_and_csv(voronoi_spec, tmp_path, capsys):
    out_dir = tmp_path / "report"
    code = run(["report", "--field", voronoi_spec, "--out-dir", out_dir,
                "--oracle-res", 120, "--epsilon", 1e-10])
    assert code == 0
    for name in ("network.json", "network.svg", "field_classes.png",
                 "network.png", "agreement.png", "metrics.csv"):
        assert (out_dir / name).exists(), name
    rows = (out_dir / "metrics.csv").read_text().splitlines()
    assert rows[0] == "metric,value"
    assert any(r.startswith("agreement,") for r in rows)
