import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_params
from recool.errors import DegenerateInputError, DomainError
from recool.fitting import (FitOptions, HeatingSeries, extrapolate_se, fit_initial_energy, fit_power_law,
                            heating_from_se, heating_rate_from_series, se_from_heating)
from recool.model import Bins, EnergyDistribution, expected_fluorescence, get_model
from recool.montecarlo import FluorescenceTrace, McConfig, simulate_repetitions
from recool.physics import HBAR, SPECIES, angular, IonSpecies

OMEGAS = [angular(f) for f in (178e3, 287e3, 355e3)]


def model_trace(params, mean_energy, scale=1.0, background=0.0, reps=500, kind="chi1"):
    """Noise-free trace from the model, with shot-noise-sized error bars."""
    bins = Bins(50e-6, 80)
    curve = expected_fluorescence(EnergyDistribution(kind, mean_energy), params, bins)
    counts = (scale * curve + background) * bins.width
    return FluorescenceTrace(bins.width, counts, np.sqrt(counts / reps), reps)


@pytest.mark.parametrize("n_mean", [2e4, 2e5, 1e6])
def test_self_consistency(params, n_mean):
    E = n_mean * HBAR * params.omega_z
    fit = fit_initial_energy(model_trace(params, E), params)
    assert fit.converged
    assert fit.mean_energy == pytest.approx(E, rel=1e-3)
    assert fit.n_mean == pytest.approx(n_mean, rel=1e-3)
    assert np.isfinite(fit.n_err) and fit.n_err > 0


def test_self_consistency_with_nuisances(params):
    E = 2e5 * HBAR * params.omega_z
    tr = model_trace(params, E, scale=0.7, background=0.02 * params.cold_rate())
    fit = fit_initial_energy(tr, params, FitOptions(amplitude=True, background=True))
    assert fit.mean_energy == pytest.approx(E, rel=1e-3)
    assert fit.parameters["amplitude"] == pytest.approx(0.7, rel=1e-3)
    assert fit.parameters["background"] == pytest.approx(0.02 * params.cold_rate(), rel=1e-2)
    assert all(np.isfinite(v) for v in fit.sigmas.values())


def test_exponential_kind(params):
    E = 2e5 * HBAR * params.omega_z
    fit = fit_initial_energy(model_trace(params, E, kind="exponential"), params, FitOptions(dist_kind="exponential"))
    assert fit.mean_energy == pytest.approx(E, rel=1e-3)


def test_efficiency_invariance_with_amplitude(params):
    E = 2e5 * HBAR * params.omega_z
    opts = FitOptions(amplitude=True)
    a = fit_initial_energy(model_trace(params, E), params, opts)
    # the trace carries no efficiency, so a 0.002 collection efficiency appears as a scale
    b = fit_initial_energy(model_trace(params, E, scale=0.002), params, opts)
    assert b.mean_energy == pytest.approx(a.mean_energy, rel=0.01)


def test_monte_carlo_round_trip(params):
    ndot, delay = 38094.0, 5.0
    c = McConfig(seed=21, repetitions=500)
    tr = simulate_repetitions(params, c, ndot=ndot, delay=delay)
    true_E = tr.initial_energies.mean()
    fit = fit_initial_energy(tr, params)
    assert fit.mean_energy == pytest.approx(true_E, rel=0.15)


def test_flat_trace_is_degenerate(params):
    cold = params.cold_rate() * 50e-6
    tr = FluorescenceTrace(50e-6, np.full(80, cold), np.full(80, math.sqrt(cold / 500)), 500)
    with pytest.raises(DegenerateInputError):
        fit_initial_energy(tr, params)


def test_report_serialises(params):
    fit = fit_initial_energy(model_trace(params, 2e5 * HBAR * params.omega_z), params)
    d = fit.to_dict()
    for key in ("parameters", "sigmas", "residual_norm", "converged", "iterations", "model_config_echo"):
        assert key in d


# heating series

def test_series_exact_line():
    s = HeatingSeries(((1, 150, 1), (3, 250, 1), (5, 350, 1), (7, 450, 1)), angular(178e3))
    ndot, err = heating_rate_from_series(s)
    assert ndot == pytest.approx(50.0, abs=1e-12)
    assert err > 0


def test_series_zero_slope():
    s = HeatingSeries(((1, 100, 2), (3, 100, 2), (5, 100, 2)), angular(178e3))
    ndot, err = heating_rate_from_series(s)
    assert ndot == pytest.approx(0.0, abs=1e-9)
    assert err > 0


def test_series_needs_two_points():
    with pytest.raises(DomainError):
        heating_rate_from_series(HeatingSeries(((1, 100, 2),), angular(178e3)))


# power law

def test_power_law_exact():
    C = 1.2e15
    pts = [(w, C / w**2, 0.05 * C / w**2) for w in OMEGAS]
    fit = fit_power_law(pts)
    assert fit.exponent == pytest.approx(-2.0, abs=1e-6)
    assert fit.amplitude == pytest.approx(C, rel=1e-6)
    assert fit(OMEGAS[0]) == pytest.approx(C / OMEGAS[0] ** 2, rel=1e-6)


def test_power_law_fixed_exponent_single_point():
    w, n = OMEGAS[1], 14653.2
    fit = fit_power_law([(w, n, 100.0)], fixed_exponent=-2.0)
    assert fit.amplitude == pytest.approx(n * w**2, rel=1e-12)
    assert fit.exponent == -2.0


def test_power_law_domain():
    with pytest.raises(DomainError):
        fit_power_law([(OMEGAS[0], -1.0, 1.0), (OMEGAS[1], 2.0, 1.0)])
    with pytest.raises(DomainError):
        fit_power_law([(OMEGAS[0], 1.0, 1.0)])


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 100.0), st.floats(-4.0, 1.0))
def test_power_law_frequency_rescaling(c, p):
    # ndot = A w^p: rescaling w -> c w at fixed ndot leaves p and multiplies A by c^-p
    A = 3e10
    pts = [(w, A * w**p, 0.1 * A * w**p) for w in OMEGAS]
    scaled = [(c * w, n, e) for w, n, e in pts]
    f0, f1 = fit_power_law(pts), fit_power_law(scaled)
    assert f1.exponent == pytest.approx(f0.exponent, abs=1e-8)
    assert f1.amplitude == pytest.approx(f0.amplitude * c ** (-p), rel=1e-7)


def test_power_law_noisy_calibration():
    C = 1.2e15
    hits = 0
    for seed in range(200):
        rng = np.random.default_rng(seed)
        pts = [(w, C / w**2 * (1 + 0.1 * rng.standard_normal()), 0.1 * C / w**2) for w in OMEGAS]
        hits += abs(fit_power_law(pts).exponent + 2.0) <= 0.5
    assert hits / 200 >= 0.95


# noise density

def test_se_anchor(yb174):
    se = se_from_heating(1.207e3, angular(1e6), yb174)
    assert se == pytest.approx(3.6e-11, rel=0.01)


@settings(max_examples=50, deadline=None)
@given(st.floats(1.0, 1e7), st.floats(1e5, 1e8))
def test_se_round_trip(ndot, omega):
    sp = SPECIES["174Yb+"]
    assert heating_from_se(se_from_heating(ndot, omega, sp), omega, sp) == pytest.approx(ndot, rel=1e-12)


def test_se_scaling_probes(yb174):
    w, n = angular(178e3), 38094.0
    base = se_from_heating(n, w, yb174)
    assert se_from_heating(n, 2 * w, yb174) == pytest.approx(2 * base, rel=1e-14)
    assert se_from_heating(3 * n, w, yb174) == pytest.approx(3 * base, rel=1e-14)
    heavy = IonSpecies("x", 2 * yb174.mass, yb174.charge, yb174.cooling_wavelength, yb174.natural_linewidth)
    assert se_from_heating(n, w, heavy) == pytest.approx(2 * base, rel=1e-14)
    double = IonSpecies("x", yb174.mass, 2 * yb174.charge, yb174.cooling_wavelength, yb174.natural_linewidth)
    assert se_from_heating(n, w, double) == pytest.approx(base / 4, rel=1e-14)
    with pytest.raises(DomainError):
        se_from_heating(0.0, w, yb174)


def test_extrapolation_examples():
    w = angular(355e3)
    assert extrapolate_se((2.0, w), w).value == pytest.approx(2.0, rel=1e-15)
    assert extrapolate_se((2.0, w), angular(1e6), -2.0).value == pytest.approx(2.0 * 0.355, rel=1e-12)
    assert extrapolate_se((2.0, w), angular(1e6), -1.0).value == pytest.approx(2.0, rel=1e-15)
    assert float(extrapolate_se((2.0, w), angular(1e6))) == pytest.approx(0.71)
