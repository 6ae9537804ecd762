import json
from pathlib import Path

import pytest

from recool import cli, io
from recool.errors import ConfigError, DegenerateInputError, LookupFailure, MissingFileError, ParseError, UsageError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), (json.loads(err) if err.strip() else None)


@pytest.fixture
def small(tmp_path):
    p = tmp_path / "small.yaml"
    p.write_text("schema_version: 1\nseed: 7\nmc:\n  repetitions: 30\n  efficiency: 1.0\n"
                 "experiment:\n  delays_s: [3, 7]\n", encoding="utf-8")
    return p


def test_transitions_176_row(capsys, tmp_path):
    code, out, _ = run(capsys, "transitions", "--isotope", "176", "--out", str(tmp_path), "--format", "json")
    assert code == 0
    rows = {r["transition"]: (r["wavelength_vacuum_nm"], r["uncertainty_nm"]) for r in out["rows"]}
    assert rows == {
        "ionization_1S0_1P1": (398.91144, 0.00006),
        "cooling_2S12_2P12": (369.52550, 0.00006),
        "repump_2D32_3D32": (935.17252, 0.00020),
    }
    saved = json.loads((tmp_path / "transitions.json").read_text())
    assert saved["meta"]["config"]["seed"] == 0


def test_simulate_recool_is_byte_identical(capsys, tmp_path, small):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        code, _, _ = run(capsys, "simulate-recool", "--config", str(small), "--seed", "7", "--out", str(d))
        assert code == 0
    files = sorted(p.name for p in a.iterdir())
    assert "trace_delay_3s.csv" in files and "trace_delay_3s.json" in files
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_outputs_embed_config_and_seed(capsys, tmp_path, small):
    run(capsys, "simulate-recool", "--config", str(small), "--out", str(tmp_path))
    _, meta = io.read_table(tmp_path / "trace_delay_7s.csv", io.TRACE_COLUMNS)
    assert meta["run"]["seed"] == 7
    assert meta["run"]["config"]["mc"]["repetitions"] == 30
    assert meta["rng"]


def test_fit_heating_from_saved_traces(capsys, tmp_path, small):
    run(capsys, "simulate-recool", "--config", str(small), "--out", str(tmp_path / "sim"))
    traces = sorted(str(p) for p in (tmp_path / "sim").glob("trace_*.csv"))
    code, out, _ = run(capsys, "fit-heating", "--config", str(small), "--out", str(tmp_path / "fit"),
                       *sum((["--trace", t] for t in traces), []))
    assert code == 0
    assert out["n_points"] == 2
    assert out["ndot_quanta_s"] == pytest.approx(38094.0, rel=0.3)
    series = io.load_series(tmp_path / "fit" / "series.csv")
    code, nd, _ = run(capsys, "noise-density", "--series", str(tmp_path / "fit" / "series.csv"),
                      "--out", str(tmp_path / "nd"))
    assert code == 0
    assert nd["omega_z_rad_s"] == series.omega_z


def test_scaling_fit_from_points(capsys, tmp_path):
    C = 4.765e16
    pts = [(w, C / w**2, 0.05 * C / w**2) for w in (1.1184e6, 1.8033e6, 2.2305e6)]
    io.save_points(pts, tmp_path / "pts.csv")
    code, out, _ = run(capsys, "scaling-fit", "--points", str(tmp_path / "pts.csv"), "--out", str(tmp_path))
    assert code == 0
    assert out["exponent"] == pytest.approx(-2.0, abs=1e-6)


def test_lock_sim_command(capsys, tmp_path):
    code, out, _ = run(capsys, "lock-sim", "--scans", "300", "--drift", "10e6", "--noise", "0.02",
                       "--out", str(tmp_path), "--svg")
    assert code == 0
    assert out["lock_lost_scans"] == []
    assert out["rms_laser_error_Hz_after_settling"] < 5e6
    cols, _ = io.load_lock_run(tmp_path / "lock_run.csv")
    assert cols["scan_index"].size == 300
    assert (tmp_path / "lock_run.svg").exists()


def test_resonator_command(capsys, tmp_path):
    code, out, _ = run(capsys, "resonator", "--voltage", "680", "--forward", "10", "--reflected", "0.5",
                       "--out", str(tmp_path))
    assert code == 0
    assert out["power_W_from_voltage"] == pytest.approx(4.0139, rel=1e-4)
    assert out["coupling_ok"] is True
    code, _, err = run(capsys, "resonator", "--out", str(tmp_path))
    assert code == UsageError.exit_code


def test_fixtures_command(capsys, tmp_path):
    code, out, _ = run(capsys, "fixtures", "--out", str(tmp_path))
    assert code == 0
    assert out["table2"]["1"] == 148.88
    assert out["resonator"]["f0"] == 21.5


def test_error_codes_are_distinct(capsys, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("schema_version: 1\nmc:\n  repetitons: 3\n", encoding="utf-8")
    code, _, err = run(capsys, "fixtures", "--config", str(bad), "--out", str(tmp_path))
    assert code == ConfigError.exit_code and err["error"] == "ConfigError"
    assert "repetitons" in err["message"]

    nov = tmp_path / "nov.yaml"
    nov.write_text("seed: 1\n", encoding="utf-8")
    assert run(capsys, "fixtures", "--config", str(nov), "--out", str(tmp_path))[0] == ConfigError.exit_code

    code, _, err = run(capsys, "fixtures", "--config", str(tmp_path / "nope.yaml"))
    assert code == MissingFileError.exit_code

    code, _, err = run(capsys, "transitions", "--isotope", "173", "--out", str(tmp_path))
    assert code == LookupFailure.exit_code

    malformed = tmp_path / "s.csv"
    malformed.write_text('# meta: {"omega_z_rad_s": 1e6}\ndelay_s,n_mean,n_err\n1,x,1\n', encoding="utf-8")
    code, _, err = run(capsys, "noise-density", "--series", str(malformed), "--out", str(tmp_path))
    assert code == ParseError.exit_code and err["line"] == 3

    code, _, err = run(capsys, "no-such-command")
    assert code == UsageError.exit_code

    flat = tmp_path / "flat.yaml"
    flat.write_text("schema_version: 1\nmc:\n  repetitions: 5\n  efficiency: 1.0\n"
                    "experiment:\n  delays_s: [1, 2]\n  ndot_quanta_s: 0\n", encoding="utf-8")
    code, _, err = run(capsys, "fit-heating", "--config", str(flat), "--out", str(tmp_path))
    assert code == DegenerateInputError.exit_code

    codes = {ConfigError, MissingFileError, LookupFailure, ParseError, UsageError, DegenerateInputError}
    assert len({c.exit_code for c in codes}) == len(codes)


def test_output_dir_from_environment(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert run(capsys, "fixtures")[0] == 0
    assert (tmp_path / "env" / "fixtures.json").exists()


@pytest.mark.slow
def test_noise_density_acceptance_scenario(capsys, tmp_path):
    code, out, _ = run(capsys, "noise-density", "--config", str(CONFIGS / "acceptance.yaml"), "--out", str(tmp_path))
    assert code == 0
    assert out["target_frequency_Hz"] == 1e6
    assert out["se_at_target"] == pytest.approx(3.6e-11, rel=0.25)
    assert (tmp_path / "series.csv").exists() and (tmp_path / "noise_density.json").exists()
