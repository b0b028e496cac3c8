import json
from pathlib import Path

import numpy as np
import pytest

from sandhomog import cli
from sandhomog.config import SCHEMA, ConfigError, RunConfig, config_fields, parse_config
from sandhomog.grid import load_field

SMALL = """
[grid]
nx = 8
ny = 8
[time]
T_final = 0.125
[cell]
theta_steps = 32
"""


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def run(tmp_path, command, text, *extra, out="out"):
    return cli.run([command, "--config", write(tmp_path, text), "--out", str(tmp_path / out), *extra])


def test_default_config_validates(tmp_path):
    code, summary = run(tmp_path, "validate", "")
    assert code == 0 and summary["ok"] and summary["violations"] == 0
    assert (tmp_path / "out" / "validate.txt").exists()
    assert json.loads((tmp_path / "out" / "summary.json").read_text())["command"] == "validate"


@pytest.mark.parametrize("text", [
    "[flux]\ng_thr = 6.0\n",                            # G_thr > d
    "[forcing]\ntheta_alpha = 0.4\ntheta_omega = 0.4\n",
    "[forcing]\nunknown_key = 1\n",
    "[nonsense]\nx = 1\n",
    "[grid]\nnx = eight\n",
    "[data]\nz0 = gaussian(0.5, 0.5)\n",
    "[model]\nregime = yearly\n",
    "this is not an ini file",
])
def test_bad_configs_exit_2(tmp_path, text):
    code, _ = run(tmp_path, "validate", text)
    assert code == 2


def test_missing_config_file_exits_2(tmp_path):
    assert cli.run(["validate", "--config", str(tmp_path / "nope.ini")])[0] == 2


def test_unknown_command_exits_2(tmp_path):
    assert cli.run(["explode", "--config", write(tmp_path, "")])[0] == 2


def test_solve_writes_deterministic_files(tmp_path):
    code, summary = run(tmp_path, "solve", SMALL, out="a")
    assert code == 0
    assert summary["identity_ok"] and summary["max_identity_gap"] <= 1e-10
    code, _ = run(tmp_path, "solve", SMALL, out="b")
    assert code == 0
    files_a = sorted(p.name for p in (tmp_path / "a").iterdir())
    files_b = sorted(p.name for p in (tmp_path / "b").iterdir())
    assert files_a == files_b and "diagnostics.csv" in files_a
    for name in files_a:
        if name.endswith(".csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    header = (tmp_path / "a" / "diagnostics.csv").read_text().splitlines()[0]
    assert header == "t,l2,h1,mass,boundary_flux,identity_gap"
    diag = np.loadtxt(tmp_path / "a" / "diagnostics.csv", delimiter=",", skiprows=1)
    assert np.all(np.isfinite(diag)) and np.all(diag[:, 5] <= 1e-10)


def test_zero_data_gives_zero_trajectory(tmp_path):
    text = SMALL + "[data]\nz0 = zero\n[forcing]\nmean_flow = 0, 0\nu_peak = 0\nm_peak = 0\n"
    code, summary = run(tmp_path, "solve", text)
    assert code == 0 and summary["sup_l2"] == 0.0
    for p in (tmp_path / "out").glob("snapshot_*.csv"):
        assert np.all(load_field(p)[1] == 0.0)


def test_eps_override(tmp_path):
    # default dt = min(0.1 eps, T_final / 256)
    code, summary = run(tmp_path, "solve", SMALL.replace("0.125", "0.25"), "--eps", "0.005")
    assert code == 0 and np.isclose(summary["dt"], 0.0005) and summary["steps"] == 500


def test_cell_default_is_periodic(tmp_path):
    code, summary = run(tmp_path, "cell", SMALL + "[model]\nmu = 0.1\nnu = 0.1\n")
    assert code == 0 and summary["periodic_residual"] <= 1e-9
    meta = np.loadtxt(tmp_path / "out" / "profile_meta.csv", delimiter=",", skiprows=1)
    assert meta.shape == (32, 6) and np.all(meta[:, 1] <= 1e-9)
    assert len(list((tmp_path / "out").glob("profile_*.csv"))) == 33


def test_cell_nonconvergence_exits_1_with_history(tmp_path):
    text = SMALL.replace("theta_steps = 32", "theta_steps = 32\nmax_periods = 1\ntol_periodic = 1e-14")
    code, summary = run(tmp_path, "cell", text)
    assert code == 1 and summary["failed"]
    assert (tmp_path / "out" / "residual_history.txt").exists()


def test_homogeneous_cell_is_zero(tmp_path):
    text = SMALL + "[forcing]\nmean_flow = 0, 0\nu_peak = 0\nm_peak = 0\nfreeze_level = 0.1\nfreeze_width = 0.05\n"
    code, summary = run(tmp_path, "homogenize", text)
    assert code == 0
    assert summary["norms"]["Linf_L2"] == 0.0


def test_homogenize_long_always_active_has_no_threshold_nodes(tmp_path):
    code, summary = run(tmp_path, "homogenize", SMALL + "[model]\nregime = long\n[data]\ng = constant(0.1)\n")
    assert code == 0
    assert summary["threshold_nodes"] == 0
    assert summary["max_elliptic_residual"] <= 1e-9
    meta = np.loadtxt(tmp_path / "out" / "profile_meta.csv", delimiter=",", skiprows=1)
    assert np.all(meta[:, 2] == 0)


def test_homogenize_long_dead_window_flags(tmp_path):
    text = SMALL + ("[model]\nregime = long\n[forcing]\nmean_flow = 0.6, 0\nu_peak = 0.9\n"
                    "freeze_level = 0.1\nfreeze_width = 0.05\n")
    code, summary = run(tmp_path, "homogenize", text)
    assert code == 0 and 0 < summary["threshold_nodes"] < 32


def test_short_ladder_exits_2(tmp_path):
    code, _ = run(tmp_path, "twoscale", SMALL, "--ladder", "0.25,0.125")
    assert code == 2
    code, _ = run(tmp_path, "corrector", SMALL + "[model]\neps_ladder = 0.25, 0.125\n")
    assert code == 2


def test_twoscale_command_writes_report(tmp_path):
    code, summary = run(tmp_path, "twoscale", SMALL, "--ladder", "0.25,0.125,0.0625")
    assert code == 0 and isinstance(summary["monotone_decrease"], bool)
    lines = (tmp_path / "out" / "twoscale_report.csv").read_text().splitlines()
    assert lines[0] == "psi_id,epsilon,pairing,limit_pairing,abs_error" and len(lines) == 1 + 3 * 32


def test_synthetic_corrector_is_bounded(tmp_path):
    text = SMALL + "[twoscale]\ncorrector_source = synthetic\n"
    code, summary = run(tmp_path, "corrector", text, "--ladder", "0.125,0.0625,0.03125")
    assert code == 0 and summary["corrector_bounded"] is True
    assert np.allclose(summary["corrector_ratios"], 1.0, atol=0.01)
    lines = (tmp_path / "out" / "corrector_report.csv").read_text().splitlines()
    assert lines[0] == "epsilon,sup_corrector_l2,ladder_ratio" and len(lines) == 4


def test_config_round_trip():
    cfg = parse_config("[model]\nregime = long\neps_ladder = 0.5, 0.25, 0.125\n[time]\ndt = 0.01\n"
                       "[data]\nz0 = cos-decay(2.0)\ng = trace-of(cos-decay, 2.0)\n")
    again = parse_config(cfg.to_ini())
    assert again == cfg
    assert parse_config(again.to_ini()) == again
    assert parse_config(RunConfig().to_ini()) == RunConfig()


def test_every_field_has_a_documented_key():
    attrs = {a: key for (sec, key), (a, _) in SCHEMA.items()}
    assert set(config_fields()) == set(attrs)
    doc = (Path(__file__).parents[1] / "docs" / "config.md").read_text()
    for (sec, key) in SCHEMA:
        assert f"`{key}`" in doc, f"[{sec}] {key} is not documented"


def test_parse_rejects_unknown_key():
    with pytest.raises(ConfigError):
        parse_config("[time]\nT_finale = 1\n")
