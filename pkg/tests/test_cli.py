import json
import subprocess
import sys

import pytest

from henonspec.cli import RunConfig, Runner, main, run_pipeline, table_text
from henonspec.errors import ConfigError, StageError


def test_config_defaults_and_unknown_keys():
    cfg = RunConfig()
    assert cfg.a == "auto-astar" and cfg.orders == [10, 12, 14]
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"b": 2.0})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"stages": ["nope"]})


def test_config_file_round_trip(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"a": 2.0, "orders": [6, 8]}))
    cfg = RunConfig.load(f)
    assert cfg.a == 2.0 and cfg.orders == [6, 8]
    assert RunConfig.from_dict(cfg.to_dict()) == cfg


def test_table_text():
    txt = table_text(["t", "v"], [(1, 0.5)], {"n": 3})
    assert txt.splitlines() == ["# n=3", "t,v", "1,0.5"]


def test_plan_adds_astar_for_geometry_stages():
    r = Runner(RunConfig(a=2.0), "unused")
    assert r.plan(["orbits"]) == ["orbits"]
    assert r.plan(["induce"]) == ["find-astar", "geometry", "induce"]
    r = Runner(RunConfig(), "unused")
    assert r.plan(["saddles"]) == ["find-astar", "saddles"]


def test_orbits_and_pressure_with_cache(tmp_path):
    cfg = RunConfig(a=2.2, orders=[6, 8], t_grid=[-1.0, 2.0, 10])
    out, cache = tmp_path / "out", tmp_path / "cache"
    m1 = run_pipeline(cfg, out, cache_dir=cache, targets=["pressure"])
    assert m1["status"] == "ok" and not m1["stages"]["pressure"]["cached"]
    assert (out / "pressure_n8.csv").exists() and (out / "orbits_n6.csv").exists()
    thermo = json.loads((out / "thermo.json").read_text())
    assert 0 < thermo["t_u"] < 1
    m2 = run_pipeline(cfg, tmp_path / "out2", cache_dir=cache, targets=["pressure"])
    assert all(s["cached"] for s in m2["stages"].values())
    assert (tmp_path / "out2" / "pressure_n8.csv").read_text() == \
        (out / "pressure_n8.csv").read_text()
    # a changed config field invalidates the dependent stages only
    cfg.t_grid = [-1.0, 2.0, 12]
    m3 = run_pipeline(cfg, tmp_path / "out3", cache_dir=cache, targets=["pressure"])
    assert m3["stages"]["orbits"]["cached"] and not m3["stages"]["pressure"]["cached"]


def test_stage_failure_is_reported(tmp_path):
    # a below the horseshoe range: the pressure root has no sign change
    cfg = RunConfig(a=0.5, orders=[4])
    with pytest.raises(StageError) as ei:
        run_pipeline(cfg, tmp_path, targets=["pressure"])
    assert ei.value.stage in ("orbits", "pressure")
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["status"] == "failed" and man["failed_stage"] == ei.value.stage


def test_main_exit_codes(tmp_path, capsys):
    assert main(["saddles", "--set", "a=2.0", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "saddles.json").read_text())["P"]["eig_u"] < 0
    assert main(["saddles", "--set", "nonsense=1", "--out", str(tmp_path)]) == 2
    assert main(["pressure", "--set", "a=0.5", "--set", "orders=[4]",
                 "--out", str(tmp_path / "x")]) == 3


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "henonspec.cli", "baseline", "--set", "a=2.0",
                          "--set", "baseline_samples=10", "--set", "baseline_time=1000",
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert json.loads(res.stdout)["status"] == "ok"
    assert (tmp_path / "baseline.csv").exists()
