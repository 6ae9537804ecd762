import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from recool.errors import DomainError, LookupFailure
from recool.physics import (AMU, HBAR, SPECIES, IonSpecies, LaserBeam, TrapFrequencies, angular,
                            doppler_shift, energy_from_quanta, get_species, load_species_table,
                            max_doppler, quanta_from_energy, recoil_energy, scatter_rate_instant,
                            wavevector)


def test_wavevector_examples():
    assert wavevector(2 * math.pi) == pytest.approx(1.0, rel=1e-15)
    assert wavevector(369.5e-9) == pytest.approx(1.7004e7, rel=1e-4)
    assert wavevector(739.05e-9) == pytest.approx(wavevector(369.525e-9) / 2, rel=1e-4)


@pytest.mark.parametrize("bad", [0.0, -1e-9])
def test_wavevector_rejects_nonpositive(bad):
    with pytest.raises(DomainError):
        wavevector(bad)


@given(st.floats(1e-9, 1e3))
def test_wavevector_involution(x):
    assert wavevector(wavevector(x)) == pytest.approx(x, rel=1e-12)


def test_doppler_shift_examples():
    assert doppler_shift(1.7004e7, 0.0) == 0.0
    assert doppler_shift(1.7004e7, 1.0) == pytest.approx(-1.7004e7)
    assert doppler_shift(1.7004e7, 1.0) / (2 * math.pi) == pytest.approx(-2.706e6, rel=1e-3)
    assert doppler_shift(1.7004e7, -1.0) == pytest.approx(1.7004e7)


def test_quanta_examples():
    w = angular(178e3)
    assert quanta_from_energy(HBAR * w, w) == pytest.approx(1.0, rel=1e-15)
    assert quanta_from_energy(0.0, w) == 0.0
    assert quanta_from_energy(1.179e-25, w) == pytest.approx(1.0e3, rel=1e-3)
    with pytest.raises(DomainError):
        quanta_from_energy(1.0, 0.0)
    with pytest.raises(DomainError):
        energy_from_quanta(1.0, -1.0)


@pytest.mark.parametrize("n", [0.0, 1.0, 1e6])
def test_quanta_round_trip(n):
    w = angular(1.03e6)
    assert quanta_from_energy(energy_from_quanta(n, w), w) == pytest.approx(n, rel=1e-12, abs=0)


def test_max_doppler_examples(yb174):
    m = yb174.mass
    assert max_doppler(0.0, m, 1.7004e7, 0.45) == 0.0
    val = max_doppler(m * 10.0**2 / 2, m, 1.7004e7, 0.45)
    assert val == pytest.approx(7.652e7, rel=1e-4)
    assert val / (2 * math.pi) == pytest.approx(12.18e6, rel=1e-3)
    assert max_doppler(1e-20, m, 1.7004e7, 0.0) == 0.0


@given(st.floats(1e-30, 1e-15))
def test_max_doppler_sqrt_scaling(E):
    m, k = SPECIES["174Yb+"].mass, 1.7e7
    assert max_doppler(4 * E, m, k, 0.45) == pytest.approx(2 * max_doppler(E, m, k, 0.45), rel=1e-12)


def test_scatter_rate_examples():
    L = 40e6
    assert scatter_rate_instant(0.0, 1.0, L) == pytest.approx(math.pi * L / 2)
    assert scatter_rate_instant(0.0, 1.0, L) == pytest.approx(6.283e7, rel=1e-4)
    half = math.pi * L * math.sqrt(2.0)
    assert scatter_rate_instant(half, 1.0, L) == pytest.approx(scatter_rate_instant(0, 1.0, L) / 2, rel=1e-12)


@given(st.floats(0, 1e10), st.floats(0, 10), st.floats(1e6, 1e9))
def test_scatter_rate_symmetric(x, s, L):
    assert scatter_rate_instant(x, s, L) == scatter_rate_instant(-x, s, L)


@given(st.floats(0, 1e9), st.floats(1e-3, 1e9), st.floats(0.01, 10))
def test_scatter_rate_monotone_in_detuning(x, dx, s):
    L = 40e6
    assert scatter_rate_instant(x + dx, s, L) <= scatter_rate_instant(x, s, L)


@given(st.floats(0, 100), st.floats(1e-3, 100))
def test_scatter_rate_monotone_in_saturation(s, ds):
    assert scatter_rate_instant(0.0, s + ds, 40e6) > scatter_rate_instant(0.0, s, 40e6)


def test_species_table(yb174):
    assert set(SPECIES) == {"170Yb+", "171Yb+", "172Yb+", "174Yb+", "176Yb+"}
    assert yb174.mass_amu == pytest.approx(173.938867548 - 5.48579909e-4, rel=1e-10)
    assert yb174.natural_linewidth == 19.6e6
    assert yb174.cooling_wavelength == pytest.approx(369.52494e-9, rel=1e-12)
    assert get_species("174") is yb174
    with pytest.raises(LookupFailure):
        get_species("40Ca+")


def test_species_validation():
    with pytest.raises(DomainError):
        IonSpecies("x", -1.0, 1.0, 1.0, 1.0)


def test_species_override_file(tmp_path):
    rec = {"name": "40Ca+", "mass_amu": 39.96, "charge_e": 1, "cooling_wavelength_nm": 396.96,
           "natural_linewidth_MHz": 22.4}
    p = tmp_path / "species.json"
    p.write_text(json.dumps([rec, {**SPECIES["171Yb+"].to_dict(), "natural_linewidth_MHz": 20.0}]))
    table = load_species_table(p)
    assert table["40Ca+"].mass == pytest.approx(39.96 * AMU)
    assert table["171Yb+"].natural_linewidth == pytest.approx(20e6)
    assert table["174Yb+"] is SPECIES["174Yb+"]


def test_beam_and_trap_validation():
    with pytest.raises(DomainError):
        LaserBeam(369.5e-9, -6e6, -0.1, 40e6)
    with pytest.raises(DomainError):
        LaserBeam(369.5e-9, -6e6, 1.0, 40e6, kz_fraction=1.5)
    f = TrapFrequencies.from_hz(2.069e6, 2.110e6, 1.030e6, 21.48e6)
    assert f.omega_z == pytest.approx(angular(1.030e6))
    with pytest.raises(DomainError):
        TrapFrequencies.from_hz(11e6, 2e6, 1e6, 21.48e6)


def test_recoil_energy(yb174):
    k = wavevector(yb174.cooling_wavelength)
    assert recoil_energy(k, yb174.mass) == pytest.approx((HBAR * k) ** 2 / (2 * yb174.mass))
    assert np.isfinite(recoil_energy(k, yb174.mass))
