import dataclasses
import json
import math
import os

import numpy as np
import pytest
import yaml

from cavityrecon import ReconPlan, StateSpec, reconstruct_grid
from cavityrecon.cli import PRESETS, RunConfig, grid_to_csv, main, read_grid
from cavityrecon.exceptions import ConfigError


def _write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


SMALL_YAML = """
dim: 40
x: {start: -1.0, stop: 1.0, step: 0.5}
y: {start: -0.5, stop: 0.5, step: 0.5}
"""


def test_config_round_trip():
    cfg = RunConfig(state=StateSpec("cat", 1.5 - 0.5j, 0.3), path="probe", seed=2**64 - 1,
                    delays=(0.0, 0.1), format="json", noise_sigma=0.02)
    again = RunConfig.load(cfg.dump())
    assert again == cfg
    assert again.plan() == cfg.plan()


def test_config_units_scale_with_gamma():
    cfg = RunConfig(gamma=4.0, t_d=0.02, t_meas=0.1, lam=200.0, path="probe")
    plan = cfg.plan()
    assert plan.gamma_t == pytest.approx(0.12)
    assert plan.probe.lam == 800.0


@pytest.mark.parametrize("text", ["gamma: -1", "dim: 0", "bogus: 1", "state: {kind: squeezed}",
                                  "x: {start: 0, stop: 1}\n: :", "format: xml", "[1, 2]"])
def test_malformed_configs(text):
    with pytest.raises(ConfigError):
        cfg = RunConfig.load(text)
        cfg.plan()


def test_reconstruct_writes_grid_and_metadata(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["reconstruct", "--config", _write(tmp_path, SMALL_YAML), "--out", str(out)])
    assert code == 0
    assert sorted(os.listdir(out)) == ["grid.csv", "metadata.json"]
    text = (out / "grid.csv").read_text()
    assert text.splitlines()[0] == "# s=0 gamma=1 t_d=0.01 t_meas=0.10000000000000001 dim=40 seed=0"
    assert text.splitlines()[1] == "x,y,value"
    grid = read_grid(out / "grid.csv")
    cfg = RunConfig.load(SMALL_YAML)
    ref = reconstruct_grid(cfg.plan())
    assert grid.values.tobytes() == ref.values.tobytes()
    assert grid.x_axis.tolist() == [-1.0, -0.5, 0.0, 0.5, 1.0]
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["command"] == "reconstruct" and meta["config"]["dim"] == 40


def test_json_format_and_traces(tmp_path):
    out = tmp_path / "run"
    cfg = SMALL_YAML + "format: json\npath: probe\ntraces: true\ntau_samples: 128\nnoise_sigma: 0.01\n"
    assert main(["reconstruct", "--config", _write(tmp_path, cfg), "--out", str(out), "--seed", "9"]) == 0
    assert sorted(os.listdir(out)) == ["grid.json", "metadata.json", "traces.csv"]
    grid = read_grid(out / "grid.json")
    ref = reconstruct_grid(RunConfig.load(cfg + "seed: 9\n").plan())
    assert grid.values.tobytes() == ref.values.tobytes()
    rows = (out / "traces.csv").read_text().splitlines()
    assert rows[0] == "index,x,y,tau,inversion" and len(rows) == 1 + 15 * 128


def test_output_identical_across_threads(tmp_path):
    cfg = _write(tmp_path, SMALL_YAML + "path: probe\nnoise_sigma: 0.01\n")
    blobs = []
    for threads in (1, 4):
        out = tmp_path / f"t{threads}"
        assert main(["reconstruct", "--config", cfg, "--out", str(out), "--threads", str(threads)]) == 0
        blobs.append(((out / "grid.csv").read_bytes(), (out / "metadata.json").read_bytes()))
    assert blobs[0] == blobs[1]


def test_malformed_config_exit_code_and_no_files(tmp_path, capsys):
    out = tmp_path / "never"
    code = main(["reconstruct", "--config", _write(tmp_path, "gamma: [oops"), "--out", str(out)])
    assert code == 2
    assert not out.exists()
    assert [p.name for p in tmp_path.iterdir()] == ["cfg.yaml"]
    rec = json.loads(capsys.readouterr().err.strip())
    assert rec["error"] == "config"


def test_module_error_exit_code(tmp_path, capsys):
    out = tmp_path / "never"
    assert main(["reconstruct", "--config", _write(tmp_path, "dim: 8\n"), "--out", str(out)]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "truncation-unsafe"
    assert not out.exists()


def test_grid_failures_reported_with_indices(tmp_path, capsys):
    cfg = "state: {kind: vacuum}\ndim: 4\nx: {start: 0, stop: 3, step: 3}\ny: {start: 0, stop: 0, step: 1}\npath: probe\ntau_samples: 32\n"
    assert main(["reconstruct", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 1
    rec = json.loads(capsys.readouterr().err)
    assert rec["error"] == "grid" and rec["failures"][0]["index"] == 1


def test_snapshot_command(tmp_path):
    out = tmp_path / "snap"
    code = main(["snapshot", "--config", _write(tmp_path, SMALL_YAML), "--out", str(out),
                 "--delays", "0", "0.1"])
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert [e["delay"] for e in manifest["snapshots"]] == [0.0, 0.1]
    g0 = read_grid(out / manifest["snapshots"][0]["file"])
    g1 = read_grid(out / manifest["snapshots"][1]["file"])
    ref = reconstruct_grid(RunConfig.load(SMALL_YAML).plan())
    assert g0.values.tobytes() == ref.values.tobytes()
    # the central fringe point (0, 0) shrinks by the cat decoherence factor
    ratio = g1.values[1, 2] / g0.values[1, 2]
    assert abs(ratio - math.exp(-8 * (1 - math.exp(-0.1)))) < 0.01
    assert g0.x_axis.tolist() == g1.x_axis.tolist()


def test_snapshot_without_delays_is_config_error(tmp_path):
    out = tmp_path / "snap"
    assert main(["snapshot", "--config", _write(tmp_path, SMALL_YAML), "--out", str(out)]) == 2
    assert not out.exists()


def test_validate_default_passes(capsys):
    assert main(["validate"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.startswith("PASS") for line in lines)


def test_validate_reports_truncation(tmp_path, capsys):
    assert main(["validate", "--config", _write(tmp_path, "dim: 8\n")]) == 1
    assert "truncation-unsafe" in capsys.readouterr().out


def test_validate_negative_gamma_is_config_error(tmp_path, capsys):
    assert main(["validate", "--config", _write(tmp_path, "gamma: -1\n")]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "config"


def test_csv_is_lossless():
    plan = ReconPlan(dim=40, x_axis=(0.1, 0.7), y_axis=(-0.3,))
    grid = reconstruct_grid(plan)
    text = grid_to_csv(grid)
    parsed = np.array([float(r.split(",")[2]) for r in text.splitlines()[2:]])
    assert parsed.tobytes() == grid.values.ravel().tobytes()


def test_presets_are_valid():
    assert PRESETS["cat-wigner"].plan().t_meas == 0
    p3 = PRESETS["cat-probe"].plan()
    assert p3.path == "probe" and p3.probe.noise_sigma > 0 and p3.gamma_t == pytest.approx(0.11)
    assert any(abs(y - math.pi / 8) < 1e-12 for y in p3.y_axis)
    assert yaml.safe_load(PRESETS["cat-probe"].dump())["path"] == "probe"


def test_cat_presets_end_to_end(tmp_path):
    w_dir, p_dir = tmp_path / "wigner", tmp_path / "probe"
    assert main(["reconstruct", "--preset", "cat-wigner", "--out", str(w_dir), "--threads", "4"]) == 0
    assert main(["reconstruct", "--preset", "cat-probe", "--out", str(p_dir), "--threads", "4"]) == 0
    ideal = read_grid(w_dir / "grid.csv").values
    noisy = read_grid(p_dir / "grid.csv").values
    # the interference fringes show up with both signs
    assert ideal.max() > 0.6 and ideal.min() < -0.4
    assert np.max(np.abs(noisy - ideal)) <= 0.05
