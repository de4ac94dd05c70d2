import json
import subprocess
import sys

import numpy as np
import pytest

from pushsum_penalty.cli import EXIT_INVALID, EXIT_OK, EXIT_RUNTIME, cmd_check, cmd_check_schedule, cmd_oracle, cmd_run, main
from pushsum_penalty.schema import CHECK_SCHEMA, FINAL_SCHEMA, ORACLE_SCHEMA, validate

from conftest import CONFIGS, SHIPPED, raw_config, write_config


def read_csv(path):
    lines = path.read_bytes().split(b"\n")
    assert lines[-1] == b"" and b"\r" not in path.read_bytes()
    header = lines[0].decode().split(",")
    rows = [ln.decode().split(",") for ln in lines[1:-1]]
    return header, rows


def short(raw, rounds=200, every=10):
    raw["run"] = dict(raw.get("run", {}), max_rounds=rounds, record_every=every)
    return raw


@pytest.fixture(scope="module")
def demo_artifacts(tmp_path_factory):
    """Oracle, then a full run against it with figures."""
    base = tmp_path_factory.mktemp("demo")
    cfg = CONFIGS / "energy_demo.json"
    assert cmd_oracle(cfg, base / "oracle") == EXIT_OK
    code = cmd_run(cfg, base / "run", solution=base / "oracle" / "oracle.json", plot=True)
    assert code == EXIT_OK
    return base


# -- run -----------------------------------------------------------------------


def test_demo_run_rows(demo_artifacts):
    header, rows = read_csv(demo_artifacts / "run" / "metrics.csv")
    assert header[:5] == ["round", "disagreement", "mean_penalty", "objective", "walltime_ms"]
    assert header[5:] == [f"x_bar_{k}" for k in range(6)]
    assert len(rows) == 30_000 // 10
    assert rows[-1][0] == "30000" and all(r[4] == "" for r in rows)


def test_demo_final_json(demo_artifacts):
    doc = json.loads((demo_artifacts / "run" / "final.json").read_text())
    validate(doc, FINAL_SCHEMA)
    assert doc["rounds"] == 30_000 and len(doc["z"]) == 4
    assert doc["y"] and abs(sum(doc["y"]) - 4) <= 1e-10 * 4


def test_demo_relative_error_and_plots(demo_artifacts):
    header, rows = read_csv(demo_artifacts / "run" / "relative_error.csv")
    assert header == ["round", "error_0", "error_1", "error_2", "error_3"]
    assert len(rows) == 3000
    assert max(float(x) for x in rows[-1][1:]) <= 0.02
    for name in ("metrics.png", "relative_error.png"):
        assert (demo_artifacts / "run" / name).read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_demo_oracle_json(demo_artifacts):
    doc = json.loads((demo_artifacts / "oracle" / "oracle.json").read_text())
    validate(doc, ORACLE_SCHEMA)
    assert doc["prop2"] is True
    assert doc["kkt"]["max"] <= 1e-4
    assert len(doc["point"]) == 6 and doc["slacks"]
    bf, cz = np.array(doc["brute_force"]["point"][:4]), np.array(doc["centralized"]["point"][:4])
    assert np.max(np.abs(bf - cz) / bf) <= 1e-2


def test_schedule_b_half_rejected(tmp_path, capsys):
    raw = raw_config("quadratic.json")
    raw["schedule"]["b"] = 0.5
    code = cmd_run(write_config(tmp_path, raw), tmp_path / "out")
    assert code == EXIT_INVALID
    assert "(iv)" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_missing_config_leaves_no_output(tmp_path, capsys):
    code = cmd_run(tmp_path / "nope.json", tmp_path / "out")
    assert code == EXIT_INVALID
    assert "cannot read config" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_unknown_field_rejected(tmp_path, capsys):
    raw = raw_config("toy.json")
    raw["run"]["max_round"] = 10
    assert cmd_run(write_config(tmp_path, raw), tmp_path / "out") == EXIT_INVALID
    assert "max_round" in capsys.readouterr().err


def test_bad_json_rejected(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert cmd_run(p, tmp_path / "out") == EXIT_INVALID
    assert cmd_check(p) == EXIT_INVALID


def bounds_violating():
    raw = raw_config("energy_demo.json")
    for d, hi in zip(raw["problem"]["demands"], (12.0, 15.0)):
        d["p_min"], d["p_max"] = 1.0, hi
    return raw


@pytest.mark.parametrize("cmd", [cmd_run, cmd_oracle])
def test_bounds_condition_violation_named(tmp_path, capsys, cmd):
    code = cmd(write_config(tmp_path, bounds_violating()), tmp_path / "out")
    assert code == EXIT_INVALID
    assert "bounds condition" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_engine_abort_is_runtime_failure(tmp_path, capsys):
    raw = short(raw_config("quadratic.json"))
    raw["schedule"]["a_scale"] = 1e300
    assert cmd_run(write_config(tmp_path, raw), tmp_path / "out") == EXIT_RUNTIME
    assert "round" in capsys.readouterr().err


def test_uncertified_schedule_needs_opt_in(tmp_path):
    raw = short(raw_config("averaging.json"))
    raw["schedule"]["allow_uncertified"] = False
    assert cmd_run(write_config(tmp_path, raw), tmp_path / "out") == EXIT_INVALID


def test_trace_csv(tmp_path):
    raw = short(raw_config("quadratic.json"), rounds=20, every=5)
    raw["run"]["trace"] = True
    assert cmd_run(write_config(tmp_path, raw), tmp_path / "out") == EXIT_OK
    header, rows = read_csv(tmp_path / "out" / "trace.csv")
    assert header == ["round", "agent", "y", "z_0", "z_1"]
    assert len(rows) == 4 * 4


def test_timing_fills_walltime(tmp_path):
    raw = short(raw_config("quadratic.json"), rounds=20, every=5)
    raw["run"]["timing"] = True
    assert cmd_run(write_config(tmp_path, raw), tmp_path / "out") == EXIT_OK
    _, rows = read_csv(tmp_path / "out" / "metrics.csv")
    assert all(float(r[4]) >= 0 for r in rows)


def test_seed_override_changes_x0(tmp_path):
    cfg = write_config(tmp_path, short(raw_config("averaging.json"), rounds=10, every=10))
    outs = []
    for seed in (1, 1, 2):
        out = tmp_path / f"s{len(outs)}"
        assert cmd_run(cfg, out, seed=seed) == EXIT_OK
        outs.append((out / "metrics.csv").read_bytes())
    assert outs[0] == outs[1] != outs[2]


def test_solution_shape_checked(tmp_path, capsys):
    sol = {"version": 1, "problem": "toy", "point": [1.0, 2.0], "objective": 1.0, "slacks": {}}
    (tmp_path / "sol.json").write_text(json.dumps(sol))
    cfg = write_config(tmp_path, short(raw_config("toy.json")))
    assert cmd_run(cfg, tmp_path / "out", solution=tmp_path / "sol.json") == EXIT_INVALID
    assert "dimension" in capsys.readouterr().err


# -- oracle --------------------------------------------------------------------


def test_toy_oracle_point(tmp_path):
    assert cmd_oracle(CONFIGS / "toy.json", tmp_path) == EXIT_OK
    doc = json.loads((tmp_path / "oracle.json").read_text())
    validate(doc, ORACLE_SCHEMA)
    assert abs(doc["point"][0] - 1.0) <= 1e-2
    assert abs(doc["centralized"]["point"][0] - 1.0) <= 1e-2
    rs = [p["r"] for p in doc["path"]]
    assert rs == [1, 10, 100, 1000]


def test_quadratic_oracle_matches_closed_form(tmp_path):
    raw = raw_config("quadratic.json")
    assert cmd_oracle(write_config(tmp_path, raw), tmp_path) == EXIT_OK
    doc = json.loads((tmp_path / "oracle.json").read_text())
    mean = np.mean(raw["problem"]["centers"], axis=0)
    np.testing.assert_allclose(doc["point"], mean, rtol=0, atol=1e-12)
    np.testing.assert_allclose(doc["brute_force"]["point"], mean, atol=1e-6)


# -- check ---------------------------------------------------------------------


def run_check(tmp_path, raw, capsys, fn=cmd_check):
    code = fn(write_config(tmp_path, raw), tmp_path / "out")
    doc = json.loads(capsys.readouterr().out)
    validate(doc, CHECK_SCHEMA)
    return code, doc


def test_check_demo_B2_passes(tmp_path, capsys):
    code, doc = run_check(tmp_path, raw_config("energy_demo.json"), capsys)
    assert code == EXIT_OK and doc["passed"]
    assert doc["graph"]["verified"] is True
    assert doc["graph"]["per_graph_strongly_connected"] == [False, False]
    assert doc["energy"]["slater_point"]["found"] is True
    assert doc["energy"]["bounds_condition"] is True
    saved = json.loads((tmp_path / "out" / "check.json").read_text())
    assert saved == doc


def test_check_B1_fails(tmp_path, capsys):
    raw = raw_config("energy_demo.json")
    raw["graph"]["claimed_B"] = 1
    code, doc = run_check(tmp_path, raw, capsys)
    assert code == EXIT_INVALID and doc["graph"]["verified"] is False


def test_check_reports_bounds_violation(tmp_path, capsys):
    code, doc = run_check(tmp_path, bounds_violating(), capsys)
    assert code == EXIT_INVALID and doc["energy"]["bounds_condition"] is False


def test_check_schedule_only(tmp_path, capsys):
    raw = raw_config("quadratic.json")
    code, doc = run_check(tmp_path, raw, capsys, cmd_check_schedule)
    assert code == EXIT_OK and doc["schedule"]["passed"]
    raw["schedule"]["b"] = 0.45
    code, doc = run_check(tmp_path, raw, capsys, cmd_check_schedule)
    assert code == EXIT_INVALID and doc["schedule"]["clause"] == "iv"


@pytest.mark.parametrize("name", SHIPPED)
def test_shipped_configs_check_clean(tmp_path, capsys, name):
    code, doc = run_check(tmp_path, raw_config(name), capsys)
    # the averaging config runs a_t = 0 on purpose and is not certified
    assert code == (EXIT_INVALID if name == "averaging.json" else EXIT_OK)
    assert doc["graph"]["passed"]


# -- entry points --------------------------------------------------------------


def test_main_dispatch(tmp_path):
    cfg = write_config(tmp_path, short(raw_config("toy.json"), rounds=50))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK
    assert (tmp_path / "o" / "metrics.csv").exists()
    with pytest.raises(SystemExit):
        main(["run", "--config", str(cfg)])


def test_module_entry_point(tmp_path):
    cfg = write_config(tmp_path, short(raw_config("toy.json"), rounds=50))
    proc = subprocess.run(
        [sys.executable, "-m", "pushsum_penalty", "check-schedule", "--config", str(cfg)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["passed"] is True
