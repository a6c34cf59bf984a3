import json

import numpy as np
import pytest

from hermetia.cli import EXIT_CONFIG, EXIT_NUMERIC, run_command
from hermetia.io import load_sensor_csv, read_json, write_json


def _err(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_simulate_short_run(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    assert run_command(["simulate", "--config", "tg2.yaml", "--hours", "1", "--out", str(out)]) == 0
    log = load_sensor_csv(out)
    assert log.times[-1] == 3600.0
    assert "phi_Q_bio" in log.channels and "T_air" in log.channels
    summary = json.loads(capsys.readouterr().out)
    assert summary["rows"] == len(log)


def test_simulate_without_fluxes(tmp_path):
    out = tmp_path / "traj.csv"
    assert run_command(["simulate", "--hours", "0.5", "--no-fluxes", "--out", str(out)]) == 0
    assert "phi_Q_bio" not in load_sensor_csv(out).channels


def test_fluxes_command(tmp_path):
    out = tmp_path / "f.json"
    assert run_command(["fluxes", "--set", "T_sigma=270", "--input", "u_T=0.5", "--out", str(out)]) == 0
    doc = read_json(out)
    assert doc["kind"] == "flux_report"
    assert doc["state"]["T_sigma"] == 270.0
    assert doc["rates"]["r_B_mat"] == 1.0
    assert doc["fluxes"]["phi_B_mat"] > 0


@pytest.mark.parametrize(
    "argv",
    [
        ["fluxes", "--set", "T_nothing=1"],
        ["fluxes", "--set", "T_med=warm"],
        ["fluxes", "--input", "u_warp=1"],
        ["fluxes", "--config", "does-not-exist.yaml"],
        ["simulate", "--config", "does-not-exist.yaml", "--out", "x.csv"],
    ],
)
def test_config_errors_exit_2(argv, capsys):
    assert run_command(argv) == EXIT_CONFIG
    err = _err(capsys)
    assert err["exit_code"] == EXIT_CONFIG and err["message"]


def test_bad_parameter_in_config(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("setup: closed\nparameters:\n  k_bogus: 1.0\n")
    assert run_command(["fluxes", "--config", str(cfg)]) == EXIT_CONFIG
    assert _err(capsys)["error"] == "ConfigError"


def test_numeric_failure_exit_3(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("setup: closed\nparameters:\n  k_C_hx: 0.0\n")
    assert run_command(["fluxes", "--config", str(cfg)]) == EXIT_NUMERIC
    assert _err(capsys)["exit_code"] == EXIT_NUMERIC


def test_usage_error():
    assert run_command(["frobnicate"]) == 2




def test_compare_identical_files_is_unity(tmp_path, capsys):
    from hermetia.ocp.baseline import ResourceAccount

    fields = list(ResourceAccount.__dataclass_fields__)
    acct = {k: 1.0 + i for i, k in enumerate(fields)}
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    write_json(a, {"account": acct}, "baseline")
    write_json(b, {"account": acct}, "baseline")
    out = tmp_path / "cmp.json"
    assert run_command(["compare", "--optimal", str(a), "--baseline", str(b), "--out", str(out)]) == 0
    ratios = read_json(out)["ratios"]
    assert ratios.pop("B_dry_delta") == 0.0
    assert all(v == 1.0 for v in ratios.values())
    assert "1" in capsys.readouterr().out


def test_compare_rejects_missing_account(tmp_path, capsys):
    a = tmp_path / "a.json"
    write_json(a, {"nothing": 1}, "baseline")
    assert run_command(["compare", "--optimal", str(a), "--baseline", str(a)]) == EXIT_CONFIG


def test_baseline_short_horizon(tmp_path):
    out, csv = tmp_path / "b.json", tmp_path / "b.csv"
    assert run_command(["baseline", "--scenario", "1", "--hours", "4", "--out", str(out), "--csv", str(csv)]) == 0
    doc = read_json(out)
    assert doc["kind"] == "baseline"
    assert doc["account"]["heating_energy"] >= 0
    assert np.isfinite(load_sensor_csv(csv)["B_dry"]).all()
