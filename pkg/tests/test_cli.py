import json

import numpy as np
import pytest

from wildeuler import io
from wildeuler.cli import main
from wildeuler.config import ConfigError, RunConfig


def _write_cfg(path, cfg):
    path.write_text(cfg.dumps())
    return path


def test_config_round_trip(tiny_config):
    again = RunConfig.from_dict(json.loads(tiny_config.dumps()))
    assert again == tiny_config


@pytest.mark.parametrize("patch", [
    {"grid": {"res": 24}}, {"grid": {"N": 4}}, {"grid": {"dt": 0.3}}, {"noise": {"a": 0.5}},
    {"noise": {"kind": "cubic"}}, {"scheme": {"ns": [32, 16]}}, {"scheme": {"seeds": [1, 1]}},
    {"initial": {"preset": "huge"}}, {"bogus": 1}, {"grid": {"bogus": 1}},
])
def test_config_rejects(patch):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(patch)


def test_bad_config_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"grid": {"res": 12}}))
    assert main(["simulate-paths", "--config", str(bad), "--out", str(tmp_path)]) == 2


def test_field_round_trip(tmp_path, rng):
    a = rng.standard_normal((3, 4, 5))
    io.write_field(tmp_path / "a.bin", a, name="test")
    b, head = io.read_field(tmp_path / "a.bin")
    assert np.array_equal(a, b) and head["name"] == "test" and head["shape"] == [3, 4, 5]
    (tmp_path / "x.bin").write_bytes(b"junk\n")
    with pytest.raises(ValueError):
        io.read_field(tmp_path / "x.bin")


def test_json_non_finite(tmp_path):
    out = json.loads(io.dumps_json({"a": np.float64(np.inf), "b": np.arange(2)}))
    assert out == {"a": "inf", "b": [0, 1]}


def _outputs(d):
    return json.loads((d / "manifest.json").read_text())["outputs"]


def test_simulate_paths_deterministic(tmp_path, tiny_config):
    cfg = _write_cfg(tmp_path / "c.json", tiny_config)
    assert main(["simulate-paths", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate-paths", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    a, b = tmp_path / "a" / "simulate-paths", tmp_path / "b" / "simulate-paths"
    assert _outputs(a) == _outputs(b)
    tab = io.read_path_table(a / "paths" / "path_0.txt")
    assert tab.shape == (65, 4) and tab[0, 1] == 0.0


def test_huge_M_never_stops(tmp_path, tiny_config):
    d = tiny_config.to_dict()
    d["noise"]["M"] = 1e6
    cfg = _write_cfg(tmp_path / "c.json", RunConfig.from_dict(d))
    assert main(["simulate-paths", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "simulate-paths" / "tau_table.csv").read_text().splitlines()[1:]
    assert all(float(r.split(",")[2]) == 1.0 for r in rows)


def test_build_frame_outputs(tmp_path, tiny_config):
    cfg = _write_cfg(tmp_path / "c.json", tiny_config)
    assert main(["build-frame", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    d = tmp_path / "build-frame" / "frames" / "seed_0"
    rho, head = io.read_field(d / "rho.bin")
    assert rho.shape[1:] == (16, 16) and rho.min() > 0


def test_verify_and_report(tmp_path, tiny_config):
    cfg = _write_cfg(tmp_path / "c.json", tiny_config)
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "verify" / "report.json").read_text())
    assert rep["ok"] and len(rep["checks"]) >= 15
    assert main(["report", "--config", str(cfg), "--out", str(tmp_path), str(tmp_path / "verify")]) == 0
    assert (tmp_path / "report" / "checks.csv").exists()


def test_verify_fails_honestly(tmp_path, tiny_config):
    d = tiny_config.to_dict()
    d["tol"]["mass"] = 0.0
    d["scheme"]["method"] = "characteristics"
    cfg = _write_cfg(tmp_path / "c.json", RunConfig.from_dict(d))
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path)]) == 1


@pytest.mark.parametrize("name", ["default", "tiny", "multiplicative"])
def test_shipped_configs_load(name):
    from pathlib import Path
    cfg = RunConfig.load(Path(__file__).parents[1] / "configs" / f"{name}.json")
    assert cfg.grid.N == 2
