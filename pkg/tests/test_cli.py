import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decomp_solve.cli import main
from decomp_solve.config import dumps_canonical, parse_config, report_schema
from decomp_solve.errors import InputError

CONFIGS = Path(__file__).parent / "configs"


def run(cmd, cfg, out, *extra):
    return main([cmd, "--config", str(CONFIGS / cfg), "--out", str(out), *extra])


def report(out):
    return json.loads((Path(out) / "report.json").read_text())


def test_analyze_not_exists(tmp_path):
    assert run("analyze", "remark1.json", tmp_path) == 3
    r = report(tmp_path)
    verdicts = " ".join(e["verdict"] for e in r["existence"]["evidence"])
    assert "series term norm non-decaying" in verdicts
    assert r["existence"]["status"] == "not_exists"


def test_analyze_exists_stationary(tmp_path):
    assert run("analyze", "gauss2_split.json", tmp_path) == 0
    r = report(tmp_path)["existence"]
    assert r["route"] == "stationary_thm"


def test_malformed_matrix_exit_1(tmp_path, capsys):
    assert run("analyze", "bad_matrix.json", tmp_path) == 1
    assert "field map" in capsys.readouterr().err


def test_unknown_field_and_bad_json(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"dim": 1,\n "map": [[0.5]],\n "process": {}, "extra": 1}')
    assert main(["analyze", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert "field extra" in capsys.readouterr().err
    bad.write_text('{"dim": 1,\n "map": [[0.5]]\n "process": {}}')
    assert main(["analyze", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert "line 3" in capsys.readouterr().err


def test_bad_flags_exit_1(tmp_path):
    assert main(["analyze"]) == 1
    assert main(["explode", "--config", "x"]) == 1
    assert run("solve", "gauss1.json", tmp_path, "--shift-v", "a,b") == 1
    assert run("solve", "gauss1.json", tmp_path, "--shift-v", "1,2") == 1


def test_singular_map_exit_2(tmp_path):
    cfg = tmp_path / "sing.json"
    cfg.write_text('{"dim": 1, "map": [[0]], "process": {}}')
    assert main(["analyze", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_decay_mixture_analyze(tmp_path):
    assert run("analyze", "decay_mixture.json", tmp_path) == 0


def test_solve_gaussian_and_shift(tmp_path):
    assert run("solve", "gauss1.json", tmp_path) == 0
    sol = report(tmp_path)["solution"]
    assert sol["kind"] == "gaussian_closed_form"
    assert all(abs(m["cov"][0][0] - 4 / 3) < 1e-12 for m in sol["marginals"])
    out2 = tmp_path / "shift"
    assert run("solve", "gauss1.json", out2, "--shift-v", "3") == 0
    for m in report(out2)["solution"]["marginals"]:
        assert m["mean"][0] == pytest.approx(3 * 0.5 ** m["k"], rel=1e-15)


def test_solve_not_exists_without_force(tmp_path):
    assert run("solve", "remark1.json", tmp_path) == 3
    assert not (tmp_path / "solution.json").exists()


def test_solve_empirical_emits_csv(tmp_path):
    assert run("solve", "uniform1.json", tmp_path) == 0
    sol = report(tmp_path)["solution"]
    assert sol["kind"] == "empirical"
    assert sol["N_truncation"] > 0 and sol["tol"] == 1e-8
    for k in range(-2, 3):
        lines = (tmp_path / f"samples_k{k}.csv").read_text().splitlines()
        assert lines[0] == "x0" and len(lines) == 5001


def test_verify_round_trip_and_perturbation(tmp_path):
    assert run("solve", "gauss1.json", tmp_path) == 0
    assert run("verify", "gauss1.json", tmp_path) == 0
    r = report(tmp_path)
    assert r["verification"]["passed"]
    assert r["decay"]["verdict"] == "decays"
    data = json.loads((tmp_path / "solution.json").read_text())
    data["solution"]["marginals"][12]["cov"][0][0] *= 1.1
    bad = tmp_path / "bad_solution.json"
    bad.write_text(json.dumps(data))
    assert run("verify", "gauss1.json", tmp_path, "--solution", str(bad)) == 5
    assert 2 in report(tmp_path)["verification"]["failed_k"]


def test_verify_empirical_round_trip(tmp_path):
    assert run("solve", "uniform1.json", tmp_path) == 0
    assert run("verify", "uniform1.json", tmp_path) == 0


def test_verify_dirac_exact(tmp_path):
    assert run("solve", "dirac1.json", tmp_path) == 0
    assert run("verify", "dirac1.json", tmp_path) == 0
    assert report(tmp_path)["verification"]["max_residual"] == 0.0


def test_verify_window_mismatch(tmp_path):
    assert run("solve", "gauss1.json", tmp_path) == 0
    assert run("verify", "dirac1.json", tmp_path) == 1


def test_simulate(tmp_path):
    assert run("simulate", "dirac1.json", tmp_path) == 0
    sim = report(tmp_path)["simulation"]
    assert sim["comparison"]["passed"] and sim["comparison"]["max_gap"] == 0.0
    rows = (tmp_path / "paths.csv").read_text().splitlines()[1:]
    assert {float(r.split(",")[2]) for r in rows} == {2.0}
    out = tmp_path / "g"
    assert run("simulate", "gauss1.json", out) == 0
    assert report(out)["simulation"]["comparison"]["p_value"] > 0.01


def test_simulate_bad_bounds(tmp_path):
    cfg = json.loads((CONFIGS / "gauss1.json").read_text())
    cfg["options"] = {"k_start": 3, "k_end": 3}
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg))
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path)]) == 1


def test_reports_validate_against_schema(tmp_path):
    schema = report_schema()
    for i, (cmd, cfg) in enumerate([("analyze", "remark1.json"), ("solve", "uniform1.json"), ("verify", "uniform1.json"), ("simulate", "dirac1.json")]):
        run(cmd, cfg, tmp_path)
        jsonschema.validate(report(tmp_path), schema)


def test_reruns_are_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run("solve", "uniform1.json", out, "--seed", "7") == 0
        assert run("simulate", "gauss1.json", out / "sim", "--seed", "7") == 0
    for f in ["solution.json"] + [f"samples_k{k}.csv" for k in range(-2, 3)] + ["sim/paths.csv"]:
        assert (a / f).read_bytes() == (b / f).read_bytes(), f
    ra, rb = report(a), report(b)
    ra.pop("wall_clock_s"), rb.pop("wall_clock_s")
    assert ra == rb


def test_config_echo_is_reproducible(tmp_path):
    run("solve", "gauss1.json", tmp_path, "--seed", "5", "--tol", "1e-9")
    r = report(tmp_path)
    cfg = parse_config(json.dumps(r["config"]))
    assert cfg.options.seed == 5 and cfg.options.tol == 1e-9
    import hashlib

    assert hashlib.sha256(cfg.canonical().encode()).hexdigest() == r["config_hash"]


def test_canonical_round_trip_is_byte_identical():
    for f in CONFIGS.glob("*.json"):
        if f.name == "bad_matrix.json":
            continue
        text = parse_config(f.read_text()).canonical()
        assert parse_config(text).canonical() == text


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False), min_size=4, max_size=4),
    st.floats(1e-300, 1e300),
    st.dictionaries(st.integers(-50, 50), st.floats(-1e9, 1e9), max_size=5),
)
def test_canonical_round_trip_property(entries, var, window):
    cfg = {
        "dim": 2,
        "map": [entries[:2], entries[2:]],
        "process": {
            "window": {str(k): {"tag": "Dirac", "point": [v, -v]} for k, v in window.items()},
            "tail_rule": {"tag": "Stationary", "model": {"tag": "Gaussian", "mean": [0.1, 1 / 3], "cov": [[var, 0], [0, 0]]}},
        },
    }
    text = parse_config(json.dumps(cfg)).canonical()
    again = parse_config(text)
    assert again.canonical() == text
    assert again.map == [entries[:2], entries[2:]]


def test_dumps_canonical_numbers():
    assert dumps_canonical({"x": 0.1}) == '{\n  "x": 0.10000000000000001\n}\n'
    assert dumps_canonical({2: 1, -1: 2, 10: 3}).index('"-1"') < dumps_canonical({2: 1, -1: 2, 10: 3}).index('"10"')
