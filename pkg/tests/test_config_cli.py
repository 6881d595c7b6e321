"""Config parsing, model-mismatch flags, and CLI behavior."""

import copy
import json
import types
import subprocess
import sys

import numpy as np
import pytest

from diffsim import config
from diffsim.config import ConfigError, apply_model_flags, parse_scene, scene_to_config


BASE_CFG = {
    "dt": 1.0 / 240.0,
    "horizon": 40,
    "render_stride": 4,
    "contact": {"ke": 400.0, "kd": 40.0, "kf": 50.0, "mu": 0.5},
    "planes": [{"normal": [0, 1, 0], "offset": 0.0}],
    "camera": {"position": [0.0, 1.0, 3.0], "target": [0.0, 0.3, 0.0],
               "width": 16, "height": 16},
    "raster": {"background": [1.0, 1.0, 1.0]},
    "bodies": [
        {"type": "rigid", "shape": {"kind": "box", "extents": [0.6, 0.6, 0.6]},
         "mass": 3.0, "init_pos": [0.0, 0.32, 0.0], "init_vel": [1.0, -2.0, 0.0],
         "material": {"mode": "phong", "color": [0.2, 0.4, 0.8]}}
    ],
}


def cfg_copy():
    return copy.deepcopy(BASE_CFG)


def test_parse_scene_roundtrip():
    sc, bodies = parse_scene(cfg_copy())
    assert sc.horizon == 40
    assert sc.contact_ke == 400.0
    assert len(sc.bodies) == 1 and sc.bodies[0].kind == "rigid"
    out = scene_to_config(sc, bodies)
    sc2, _ = parse_scene(out)
    assert sc2.dt == sc.dt
    np.testing.assert_array_equal(sc2.gravity, sc.gravity)
    assert sc2.bodies[0].mass == sc.bodies[0].mass


def test_unknown_top_level_key_reports_path():
    c = cfg_copy()
    c["friction"] = 1.0
    with pytest.raises(ConfigError, match="friction"):
        parse_scene(c)


def test_unknown_body_key_reports_indexed_path():
    c = cfg_copy()
    c["bodies"][0]["density"] = 5.0
    with pytest.raises(ConfigError, match=r"bodies\[0\]"):
        parse_scene(c)


def test_unknown_body_type_rejected():
    c = cfg_copy()
    c["bodies"][0]["type"] = "fluid"
    with pytest.raises(ConfigError, match="unknown body type"):
        parse_scene(c)


def test_horizon_must_be_positive():
    c = cfg_copy()
    c["horizon"] = 0
    with pytest.raises(ConfigError, match="horizon must be >= 1"):
        parse_scene(c)


def test_no_friction_flag_zeroes_friction_only():
    c = cfg_copy()
    out = apply_model_flags(c, types.SimpleNamespace(no_friction=True))
    assert out["contact"]["kf"] == 0.0
    assert out["contact"]["mu"] == 0.0
    assert out["contact"]["ke"] == 400.0
    assert c["contact"]["kf"] == 50.0  # input untouched


def test_perfect_elastic_flag_zeroes_damping():
    out = apply_model_flags(cfg_copy(), types.SimpleNamespace(perfect_elastic=True))
    assert out["contact"]["kd"] == 0.0


def test_rigid_and_deformable_swaps():
    out = apply_model_flags(cfg_copy(), types.SimpleNamespace(rigid_as_deformable=True))
    assert out["bodies"][0]["type"] == "fem"
    assert out["bodies"][0]["shape"]["kind"] == "box_tet"
    fem_cfg = cfg_copy()
    fem_cfg["bodies"][0] = {
        "type": "fem", "shape": {"kind": "box_tet", "counts": [1, 1, 1],
                                 "size": [0.6, 0.6, 0.6]},
        "mass": 1.0, "mu": 5e3, "lam": 5e3, "init_pos": [0, 0.32, 0]}
    back = apply_model_flags(fem_cfg, types.SimpleNamespace(deformable_as_rigid=True))
    assert back["bodies"][0]["type"] == "rigid"
    assert back["bodies"][0]["shape"]["kind"] == "box"


def run_cli(args, cwd):
    return subprocess.run([sys.executable, "-m", "diffsim.cli", *args],
                          capture_output=True, text=True, cwd=cwd)


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "scene.json"
    p.write_text(json.dumps(BASE_CFG))
    return p


def test_cli_simulate_writes_states_and_frames(tmp_path, cfg_file):
    out = tmp_path / "out"
    r = run_cli(["simulate", str(cfg_file), "--out", str(out)], tmp_path)
    assert r.returncode == 0, r.stderr
    states = (out / "states.csv").read_text().strip().splitlines()
    assert len(states) == BASE_CFG["horizon"] + 2  # header + horizon+1 rows
    assert states[0].startswith("step,")
    frames = sorted(out.glob("frame_*.ppm"))
    assert len(frames) == BASE_CFG["horizon"] // BASE_CFG["render_stride"]


def test_cli_is_deterministic(tmp_path, cfg_file):
    outs = []
    for d in ("a", "b"):
        out = tmp_path / d
        r = run_cli(["simulate", str(cfg_file), "--out", str(out)], tmp_path)
        assert r.returncode == 0, r.stderr
        blob = (out / "states.csv").read_bytes()
        blob += b"".join(p.read_bytes() for p in sorted(out.glob("*.ppm")))
        outs.append(blob)
    assert outs[0] == outs[1]


def test_cli_missing_config_exits_2(tmp_path):
    r = run_cli(["simulate", str(tmp_path / "nope.json")], tmp_path)
    assert r.returncode == 2
    assert r.stderr.strip() != ""


def test_cli_bad_config_exits_2(tmp_path):
    p = tmp_path / "bad.json"
    c = cfg_copy()
    c["horizon"] = 0
    p.write_text(json.dumps(c))
    r = run_cli(["simulate", str(p)], tmp_path)
    assert r.returncode == 2
    assert "horizon" in r.stderr


def test_cli_divergence_exits_1(tmp_path):
    c = cfg_copy()
    c["dt"] = 0.05
    c["bodies"][0] = {"type": "fem",
                      "shape": {"kind": "box_tet", "counts": [1, 1, 1],
                                "size": [0.5, 0.5, 0.5]},
                      "mass": 0.01, "mu": 1e9, "lam": 1e9,
                      "init_pos": [0, 0.1, 0], "init_vel": [0, -10, 0]}
    c["contact"]["ke"] = 1e9
    p = tmp_path / "div.json"
    p.write_text(json.dumps(c))
    r = run_cli(["simulate", str(p)], tmp_path)
    assert r.returncode == 1
    assert "diverged" in r.stderr


def test_cli_sweep_rejects_degenerate_grid(tmp_path, cfg_file):
    r = run_cli(["sweep", str(cfg_file), "--param", "body.0.mass",
                 "--grid", "1:2:1"], tmp_path)
    assert r.returncode == 2


def test_cli_bench_table_shape(tmp_path):
    r = run_cli(["bench", "--tets", "100", "--steps", "10"], tmp_path)
    assert r.returncode == 0, r.stderr
    lines = [l for l in r.stdout.strip().splitlines() if l.strip()]
    assert "tets" in lines[0]
    assert len(lines) == 2
    vals = lines[1].split()
    assert len(vals) == 4
    float(vals[1]), float(vals[2]), float(vals[3])


def test_worker_count_env(monkeypatch):
    from diffsim.cli import worker_count
    monkeypatch.delenv("GRADSIM_THREADS", raising=False)
    assert worker_count() == 1
    monkeypatch.setenv("GRADSIM_THREADS", "1")
    assert worker_count() == 1
    monkeypatch.setenv("GRADSIM_THREADS", "4")
    assert worker_count() == 4
    monkeypatch.setenv("GRADSIM_THREADS", "0")
    with pytest.raises(ConfigError):
        worker_count()
    monkeypatch.setenv("GRADSIM_THREADS", "two")
    with pytest.raises(ConfigError):
        worker_count()
