import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from wgnls.cli import (ConfigError, apply_overrides, build_parser, load_config, main,
                       validate_config)

GRID = {"L": 64 * 3.141592653589793, "n_x": 512, "p_max": 7}


def manifests_cover_csvs(root: Path) -> bool:
    # every CSV under root belongs to exactly one manifest
    owners = {}
    for m in root.rglob("manifest.json"):
        for f in json.loads(m.read_text())["files"]:
            key = (m.parent / f).resolve()
            owners[key] = owners.get(key, 0) + 1
    csvs = [p.resolve() for p in root.rglob("*.csv")]
    return bool(csvs) and all(owners.get(p) == 1 for p in csvs)


def test_schema_names_missing_field(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"grid": {"L": 100.0, "p_max": 3}}))
    assert main(["waveguide", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "grid.n_x" in capsys.readouterr().err


def test_schema_errors():
    with pytest.raises(ConfigError, match="grid.n_x"):
        validate_config({"grid": {"L": 1.0, "n_x": "big", "p_max": 3}})
    with pytest.raises(ConfigError, match="gird"):
        validate_config({"gird": {}})
    with pytest.raises(ConfigError, match="data.modes"):
        validate_config({"data": {"modes": {"one": 1.0}}})
    with pytest.raises(ConfigError, match="grid"):
        validate_config({}, "resonant")
    validate_config({"grid": GRID, "data": {"modes": {"1": 1.0, "-3": [0.0, 0.5]}}})


def test_overrides(tmp_path):
    cfg = apply_overrides({"grid": dict(GRID)}, ["grid.n_x=1024", "run.T=2.5", "run.method=direct"])
    assert cfg["grid"]["n_x"] == 1024 and cfg["run"] == {"T": 2.5, "method": "direct"}
    with pytest.raises(ConfigError):
        apply_overrides({}, ["novalue"])
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="JSON"):
        load_config(p)


def test_unknown_run_parameter(tmp_path, capsys):
    assert main(["scatter", "--set", "run.bogus=1", "--out", str(tmp_path)]) == 2
    assert "run.bogus" in capsys.readouterr().err


def test_parser_flags():
    a = build_parser().parse_args(["sweep", "--param", "eps=0.2,0.1", "--threads", "2",
                                   "--seed", "3", "cascade"])
    assert a.experiment == "cascade" and a.threads == 2 and a.seed == 3


def test_verify_resonance_suite(tmp_path):
    out = tmp_path / "v"
    r = subprocess.run([sys.executable, "-m", "wgnls", "verify", "--suite", "resonance",
                        "--out", str(out)], capture_output=True, text=True)
    assert r.returncode == 0, r.stdout + r.stderr
    m = json.loads((out / "manifest.json").read_text())
    assert m["passed"] and set(m["criteria"]) == {"1:level-set classification", "2:decoupling"}
    assert {"experiment", "config", "build", "wall_clock_s"} <= set(m)
    assert manifests_cover_csvs(out)


def test_szego_run_outputs(tmp_path):
    out = tmp_path / "s"
    assert main(["szego", "--set", "run.T=10", "--set", "run.n_snap=11", "--out", str(out)]) == 0
    with open(out / "series" / "szego.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert set(rows[0]) == {"t", "series", "value"}
    assert {r["series"] for r in rows} >= {"mass", "momentum", "hamiltonian"}
    lines = (out / "checkpoints" / "szego.jsonl").read_text().splitlines()
    assert len(lines) == 11 and json.loads(lines[0])["t"] == 0.0


def test_seeded_random_data_reproducible(tmp_path):
    args = ["szego", "--set", 'data.random={"p_max": 6}', "--set", "run.T=1",
            "--set", "run.n_snap=2", "--seed", "7"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    read = lambda d: (tmp_path / d / "series" / "szego.csv").read_text()
    assert read("a") == read("b")


def test_resonant_and_waveguide_runs(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"grid": GRID, "data": {"modes": {"1": 1.0, "-1": 0.6, "3": 0.4},
                                                      "width": 2.0, "amplitude": 0.5}}))
    # one mode per sector keeps the trace norms exact despite the truncation
    assert main(["resonant", "--config", str(cfg), "--set", 'data.modes={"1": 1, "-3": 0.5}',
                 "--set", "run.tau_end=2",
                 "--set", "run.n_snap=3", "--out", str(tmp_path / "r")]) == 0
    assert main(["waveguide", "--config", str(cfg), "--set", "run.T=0.5",
                 "--set", "run.checkpoint_every=250", "--out", str(tmp_path / "w")]) == 0
    m = json.loads((tmp_path / "w" / "manifest.json").read_text())
    assert m["config"]["run"]["T"] == 0.5 and m["passed"]


def test_guard_exit_code(tmp_path):
    assert main(["waveguide", "--set", f"grid={json.dumps(GRID)}", "--set", "run.T=1e4",
                 "--out", str(tmp_path)]) == 3


def test_cascade_sweep(tmp_path):
    out = tmp_path / "sw"
    code = main(["sweep", "--param", "eps=0.4,0.3,0.2", "--set", "run.n_snap=801",
                 "--out", str(out), "cascade"])
    assert code == 0
    m = json.loads((out / "manifest.json").read_text())
    assert len(m["children"]) == 3
    with open(out / "series" / "aggregate.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["series"] for r in rows].count("sup") == 3
    assert any(r["series"] == "fit_slope" for r in rows)
    assert manifests_cover_csvs(out)
