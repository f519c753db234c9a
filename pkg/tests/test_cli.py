"""CLI: config parsing, run modes, artifacts, exit codes, determinism."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from steklovmax.cli import (RunConfig, main, parse_config, read_config_file,
                            run)
from steklovmax.errors import ConfigError

FAST = ["--n-angles", "100", "--mesh-h-factor", "0.1"]


def test_defaults():
    cfg, ks = parse_config([])
    assert cfg.mode == "optimize-convex"
    assert ks == [1]
    assert cfg.n_angles == 200
    assert cfg.diameter == 2.0
    assert cfg.mesh_h_factor == 0.05


def test_flag_parsing():
    cfg, ks = parse_config(["--mode", "spectrum", "--k", "2", "--n-angles",
                            "100", "--diameter", "2", "--seed", "3"])
    assert cfg.mode == "spectrum"
    assert ks == [2]
    assert cfg.n_angles == 100
    assert cfg.seed == 3


def test_k_list():
    _, ks = parse_config(["--k", "1,2,3", "--jobs", "2"])
    assert ks == [1, 2, 3]


def test_odd_n_angles_rejected():
    with pytest.raises(ConfigError):
        parse_config(["--n-angles", "201"])


def test_unknown_mode_rejected():
    with pytest.raises(ConfigError):
        parse_config(["--mode", "nonsense"])


def test_bad_initial_rejected():
    with pytest.raises(ConfigError):
        RunConfig(initial="circle")


def test_config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nmode = spectrum\nn-angles = 100  # inline\n"
                    "seed = 9\n")
    vals = read_config_file(path)
    assert vals == {"mode": "spectrum", "n_angles": 100, "seed": 9}
    cfg, _ = parse_config(["--config", str(path)])
    assert cfg.mode == "spectrum" and cfg.n_angles == 100 and cfg.seed == 9


def test_flags_override_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("seed = 9\nn-angles = 100\n")
    cfg, _ = parse_config(["--config", str(path), "--seed", "4"])
    assert cfg.seed == 4
    assert cfg.n_angles == 100


def test_config_file_unknown_key(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("bogus = 1\n")
    with pytest.raises(ConfigError):
        read_config_file(path)


def test_config_file_bad_value(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("n-angles = many\n")
    with pytest.raises(ConfigError):
        read_config_file(path)


def test_out_dir_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("STEKLOV_OUT_DIR", str(tmp_path))
    cfg, _ = parse_config([])
    assert cfg.out_dir == str(tmp_path)


def test_exit_code_config_error():
    assert main(["--n-angles", "15"]) == 3


def test_benchmark_disk_run(tmp_path):
    rc = main(["--mode", "benchmark-disk", "--out-dir", str(tmp_path)] + FAST)
    assert rc == 0
    rows = np.loadtxt(tmp_path / "spectrum.csv", delimiter=",")
    assert np.allclose(rows[:9, 1], [0, 1, 1, 2, 2, 3, 3, 4, 4], atol=5e-3)
    payload = json.loads((tmp_path / "result.json").read_text())
    assert payload["passed"]
    for name in ("shape.csv", "shape.svg", "history.csv", "result.json"):
        assert (tmp_path / name).exists() or name == "history.csv"


def test_spectrum_roundtrip(tmp_path):
    d1 = tmp_path / "a"
    rc = main(["--mode", "spectrum", "--out-dir", str(d1)] + FAST)
    assert rc == 0
    first = json.loads((d1 / "result.json").read_text())
    # reload the emitted shape and re-solve: eigenvalues must reproduce
    d2 = tmp_path / "b"
    rc = main(["--mode", "spectrum", "--initial", f"file:{d1/'shape.csv'}",
               "--out-dir", str(d2)] + FAST)
    assert rc == 0
    second = json.loads((d2 / "result.json").read_text())
    w1 = np.asarray(first["eigenvalues"])
    w2 = np.asarray(second["eigenvalues"])
    assert np.allclose(w1[1:], w2[1:], rtol=1e-6)


def test_determinism_bit_identical(tmp_path):
    out = tmp_path / "det"
    args = ["--mode", "spectrum", "--seed", "11", "--out-dir", str(out)] + FAST
    assert main(args) == 0
    first = (out / "result.json").read_bytes()
    assert main(args) == 0
    assert (out / "result.json").read_bytes() == first


def test_optimize_convex_quick(tmp_path):
    cfg = RunConfig(mode="optimize-convex", k=1, n_angles=60,
                    mesh_h_factor=0.1, max_iters=5, out_dir=str(tmp_path))
    # restarts are baked into OptimOptions defaults; a short run is enough
    payload = run(cfg)
    assert payload["objective"] > 2.0
    assert "support" in payload
    assert (tmp_path / "history.csv").exists()
    assert payload["bound_check"]["passed"]


def test_optimize_nonconvex_quick(tmp_path):
    cfg = RunConfig(mode="optimize-nonconvex", k=1, n_angles=60,
                    mesh_h_factor=0.1, max_iters=5, out_dir=str(tmp_path))
    payload = run(cfg)
    assert "graphs" in payload
    assert payload["diameter"] <= 2.0 * (1 + 1e-3)


def test_experiment_bound_mode(tmp_path):
    cfg = RunConfig(mode="experiment:bound", k=1, n_angles=100,
                    mesh_h_factor=0.1, out_dir=str(tmp_path))
    payload = run(cfg)
    assert payload["passed"]


def test_jobs_fanout_namespaced(tmp_path):
    rc = main(["--mode", "spectrum", "--k", "1,2", "--jobs", "2",
               "--out-dir", str(tmp_path)] + FAST)
    assert rc == 0
    assert (tmp_path / "k1" / "result.json").exists()
    assert (tmp_path / "k2" / "result.json").exists()


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "steklovmax.cli", "--mode", "benchmark-disk",
         "--out-dir", str(tmp_path)] + FAST,
        capture_output=True, text=True)
    assert proc.returncode == 0
