import json
import subprocess
import sys
from importlib import resources

import numpy as np
import pytest

from vpil.cli import EXIT_ABORTED, EXIT_CONFIG, EXIT_OK, dispatch, main
from vpil.config import ConfigError, parse_config, parse_text
from vpil.diagnostics import read_csv
from vpil.simulation import read_snapshot

MINIMAL_HOMOGENEOUS = """
mode = homogeneous
grid.radial.n = 40
grid.radial.r_max = 5
dt = 0.001
t_end = 0.005
"""

SMALL_VPIL = """
mode = vpil
sign = gravitational
grid.space.n = 4
grid.space.L = 3
grid.velocity.n = 4
grid.velocity.L = 3
dt = 0.1
t_end = 0.2
collisions = false
"""

CUBIC = """
criterion.I0 = 0.01
criterion.Ip0 = -1
criterion.KE0 = 1
criterion.EE0 = 20
criterion.C1 = 6
criterion.k = 1
"""


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


# --- parsing ---------------------------------------------------------------------


def test_minimal_homogeneous_defaults():
    cfg = parse_text(MINIMAL_HOMOGENEOUS)
    assert cfg.command == "simulate"
    sim = cfg.sim_config()
    assert sim.mode == "homogeneous" and sim.radial.points == 40
    assert sim.collision.potential_variant == "conservative"
    assert sim.collision.stepper == "explicit-euler"
    assert sim.collision.positivity_floor == 0.0


def test_vpil_without_sign_names_key():
    text = SMALL_VPIL.replace("sign = gravitational\n", "")
    with pytest.raises(ConfigError, match="sign"):
        parse_text(text)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="grid.radial.m"):
        parse_text(MINIMAL_HOMOGENEOUS + "grid.radial.m = 3\n")


@pytest.mark.parametrize(
    "line, key",
    [("dt = fast", "dt"), ("dt = -1", "dt"), ("collision.stepper = rk4", "collision.stepper"), ("grid.radial.n = 3.5", "grid.radial.n")],
)
def test_type_and_invariant_errors(line, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        parse_text(MINIMAL_HOMOGENEOUS + line + "\n")


def test_duplicate_and_malformed_lines():
    with pytest.raises(ConfigError):
        parse_text(MINIMAL_HOMOGENEOUS + "dt = 0.002\n")
    with pytest.raises(ConfigError):
        parse_text(MINIMAL_HOMOGENEOUS + "just words\n")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "absent.cfg")


@pytest.mark.parametrize("text", [MINIMAL_HOMOGENEOUS, SMALL_VPIL, CUBIC])
def test_normalized_round_trip(text):
    cfg = parse_text(text)
    again = parse_text(cfg.normalized())
    assert again.values == cfg.values
    assert again.normalized() == cfg.normalized()


def test_comments_and_blank_lines():
    cfg = parse_text("# header\n\n" + CUBIC.replace("criterion.k = 1", "criterion.k = 1  # folded"))
    assert cfg["criterion.k"] == 1.0


def test_presets_parse():
    presets = resources.files("vpil") / "presets"
    names = sorted(p.name for p in presets.iterdir() if p.name.endswith(".cfg"))
    assert {"homogeneous-gaussian.cfg", "free-streaming-virial.cfg", "gravitational-collapse.cfg", "plasma-reference.cfg"} <= set(names)
    for name in names:
        with resources.as_file(presets / name) as path:
            parse_config(path)


def test_random_initial_data_depends_on_seed():
    cfg = parse_text(MINIMAL_HOMOGENEOUS + "initial.kind = random\n")
    a, b = cfg.initial_data(1), cfg.initial_data(2)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, cfg.initial_data(1))


# --- dispatch ------------------------------------------------------------------------


def test_simulate_t_end_zero(tmp_path):
    path = _write(tmp_path, SMALL_VPIL.replace("t_end = 0.2", "t_end = 0"))
    assert dispatch("simulate", path, tmp_path / "out") == EXIT_OK
    lines = (tmp_path / "out" / "diagnostics.csv").read_text().splitlines()
    assert len(lines) == 2
    assert (tmp_path / "out" / "config.normalized").exists()


def test_simulate_snapshots(tmp_path):
    path = _write(tmp_path, SMALL_VPIL + "snapshot_every = 1\n")
    assert dispatch("simulate", path, tmp_path / "out") == EXIT_OK
    snap = read_snapshot(tmp_path / "out" / "snapshots" / "step_2.bin")
    assert snap.step_index == 2 and snap.f.shape == (4,) * 6
    assert len(read_csv(tmp_path / "out" / "diagnostics.csv")) == 3
    summary = json.loads((tmp_path / "out" / "run.json").read_text())
    assert summary["abort_reason"] is None and summary["records"] == 3


def test_simulate_abort_exit_code(tmp_path):
    path = _write(tmp_path, SMALL_VPIL.replace("dt = 0.1", "dt = 2").replace("t_end = 0.2", "t_end = 4"))
    assert dispatch("simulate", path, tmp_path / "out") == EXIT_ABORTED
    rows = read_csv(tmp_path / "out" / "diagnostics.csv")
    assert len(rows) == 1
    assert json.loads((tmp_path / "out" / "run.json").read_text())["abort_reason"].startswith("stability")


def test_config_error_exit_code(tmp_path):
    path = _write(tmp_path, SMALL_VPIL.replace("sign = gravitational\n", ""))
    assert dispatch("simulate", path, tmp_path / "out") == EXIT_CONFIG
    assert dispatch("simulate", tmp_path / "missing.cfg", tmp_path / "out") == EXIT_CONFIG
    # a criterion file handed to simulate is a configuration error
    assert dispatch("simulate", _write(tmp_path, CUBIC, "c.cfg"), tmp_path / "out") == EXIT_CONFIG


def test_criterion_worked_example(tmp_path):
    path = _write(tmp_path, CUBIC)
    assert dispatch("criterion", path, tmp_path / "out") == EXIT_OK
    rep = json.loads((tmp_path / "out" / "criterion.json").read_text())
    assert rep["t2"] == pytest.approx(4.0817, abs=1e-4)
    assert rep["discriminant"] == pytest.approx(156.0)
    assert rep["verdict"] == "blowup_predicted"


def test_iterate_smoke(tmp_path):
    text = """
iterate.N = 2
grid.space.n = 4
grid.space.L = 3
grid.velocity.n = 4
grid.velocity.L = 3
weight.T = 0.25
"""
    assert dispatch("iterate", _write(tmp_path, text), tmp_path / "out") == EXIT_OK
    lines = (tmp_path / "out" / "iterates.jsonl").read_text().splitlines()
    assert [json.loads(x)["n"] for x in lines] == [1, 2]


def test_byte_identical_outputs(tmp_path):
    path = _write(tmp_path, SMALL_VPIL + "initial.kind = random\nsnapshot_every = 2\n")
    for d in ("a", "b"):
        assert dispatch("simulate", path, tmp_path / d, seed=7) == EXIT_OK
    for name in ("diagnostics.csv", "run.json", "config.normalized", "snapshots/step_2.bin"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert dispatch("simulate", path, tmp_path / "c", seed=8) == EXIT_OK
    assert (tmp_path / "a" / "diagnostics.csv").read_bytes() != (tmp_path / "c" / "diagnostics.csv").read_bytes()


def test_main_argument_errors(tmp_path, capsys):
    with pytest.raises(SystemExit):
        main(["simulate", "--config", "x.cfg"])
    with pytest.raises(SystemExit):
        main(["simulate", "--config", "x.cfg", "--out", str(tmp_path), "--seed", "-1"])
    assert main(["criterion", "--config", str(_write(tmp_path, CUBIC)), "--out", str(tmp_path / "o")]) == EXIT_OK


def test_module_entry_point(tmp_path):
    path = _write(tmp_path, CUBIC)
    proc = subprocess.run(
        [sys.executable, "-m", "vpil", "criterion", "--config", str(path), "--out", str(tmp_path / "o")],
        capture_output=True, text=True, check=False,
    )  # fmt: skip
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "o" / "criterion.json").exists()
