import pytest

from recool.config import DEFAULTS, RunConfig
from recool.errors import ConfigError, LookupFailure
from recool.physics import HBAR, angular


def load(tmp_path, text):
    p = tmp_path / "c.yaml"
    p.write_text(text, encoding="utf-8")
    return RunConfig.load(p)


def test_defaults_validate():
    cfg = RunConfig.from_dict({})
    assert cfg.data == DEFAULTS
    p = cfg.params()
    assert p.omega_z == pytest.approx(angular(178e3))
    assert p.beam.detuning == -6e6
    assert cfg.mc(p).efficiency == 0.002


def test_unknown_keys_rejected(tmp_path):
    with pytest.raises(ConfigError, match="beem"):
        load(tmp_path, "schema_version: 1\nbeem: {}\n")
    with pytest.raises(ConfigError, match="mc"):
        load(tmp_path, "schema_version: 1\nmc:\n  reps: 3\n")


def test_schema_version_required(tmp_path):
    with pytest.raises(ConfigError, match="schema_version"):
        load(tmp_path, "seed: 1\n")
    with pytest.raises(ConfigError):
        load(tmp_path, "schema_version: 2\n")
    with pytest.raises(ConfigError, match="YAML"):
        load(tmp_path, "schema_version: 1\nbeam: [\n")


def test_exponent_without_sign_is_a_number(tmp_path):
    cfg = load(tmp_path, "schema_version: 1\ntrap:\n  axial_frequency_Hz: 178.0e3\nmc:\n  bin_width_s: 5e-5\n")
    assert cfg["trap"]["axial_frequency_Hz"] == 178000.0
    assert cfg["mc"]["bin_width_s"] == 5e-5
    cfg = load(tmp_path, "schema_version: 1\nspecies: 174Yb+\nexperiment:\n  delays_s: [1, 2e0]\n")
    assert cfg["experiment"]["delays_s"] == [1, 2.0]


def test_override_and_validation():
    cfg = RunConfig.from_dict({}).override(seed=5, species=None)
    assert cfg["seed"] == 5
    with pytest.raises(ConfigError):
        cfg.override(format="xml")


def test_ndot_reference_scaling():
    cfg = RunConfig.from_dict({"experiment": {"ndot_reference": {"ndot_quanta_s": 100.0, "frequency_Hz": 1e5}}})
    assert cfg.ndot_at(2e5) == pytest.approx(25.0)
    assert RunConfig.from_dict({}).ndot_at(3e5) == 38094.0


def test_baseline_and_species(tmp_path):
    cfg = RunConfig.from_dict({"mc": {"baseline": {"kind": "exponential", "mean_quanta": 10.0}}})
    p = cfg.params()
    assert cfg.mc(p).dist.mean_energy == pytest.approx(10 * HBAR * p.omega_z)
    with pytest.raises(LookupFailure):
        RunConfig.from_dict({"species": "173Zz+"}).species()


def test_lock_scenario():
    sc = RunConfig.from_dict({"seed": 4, "lock": {"n_scans": 9, "cavity": {"fsr": 2e9, "scan_span": 8e9}}}).scenario()
    assert sc.seed == 4 and sc.n_scans == 9 and sc.cavity.fsr == 2e9
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"lock": {"bogus": 1}}).scenario()
