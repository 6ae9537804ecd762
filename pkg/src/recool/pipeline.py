"""End-to-end chains used by the command line and the acceptance checks:
simulate recooling traces, fit energies, turn them into heating rates,
frequency scaling and noise density."""

from dataclasses import dataclass

from .errors import DomainError
from .fitting import (HeatingSeries, extrapolate_se, fit_initial_energy, fit_power_law,
                      heating_rate_from_series, se_from_heating)
from .montecarlo import run_experiment, simulate_repetitions
from .physics import angular


@dataclass
class HeatingResult:
    ndot: float
    ndot_err: float
    series: HeatingSeries
    fits: list
    traces: dict
    axial_Hz: float

    def to_dict(self):
        return {
            "ndot_quanta_s": self.ndot,
            "ndot_err": self.ndot_err,
            "axial_frequency_Hz": self.axial_Hz,
            "series": [list(p) for p in self.series.points],
            "fits": [f.to_dict() for f in self.fits],
        }


def simulate_traces(cfg, axial_Hz=None, group_offset=0):
    """Monte Carlo traces for every configured delay at one axial frequency.

    Delay i uses RNG group ``group_offset + i``, so runs at different
    frequencies draw from distinct substreams.
    """
    f = cfg.trap_frequencies_Hz()[0] if axial_Hz is None else axial_Hz
    params = cfg.params(f)
    ndot = cfg.ndot_at(f)
    mc = cfg.mc(params, heating_rate=ndot)
    delays = [float(d) for d in cfg["experiment"]["delays_s"]]
    if group_offset == 0:
        return params, run_experiment(params, mc, delays, ndot)
    traces = {d: simulate_repetitions(params, mc, ndot=ndot, delay=d, group=group_offset + i)
              for i, d in enumerate(delays)}
    return params, traces


def series_from_traces(traces, params, opts):
    """Fit every trace and collect (delay, <n>, err) points."""
    fits, points = [], []
    for delay in sorted(traces):
        res = fit_initial_energy(traces[delay], params, opts)
        fits.append(res)
        points.append((delay, res.n_mean, res.n_err))
    return HeatingSeries(tuple(points), params.omega_z), fits


def heating_rate(cfg, axial_Hz=None, traces=None, group_offset=0):
    f = cfg.trap_frequencies_Hz()[0] if axial_Hz is None else axial_Hz
    if traces is None:
        params, traces = simulate_traces(cfg, f, group_offset)
    else:
        params = cfg.params(f)
    if len(traces) < 2:
        raise DomainError("a heating rate needs traces at two or more delays")
    series, fits = series_from_traces(traces, params, cfg.fit_options())
    ndot, err = heating_rate_from_series(series)
    return HeatingResult(ndot, err, series, fits, traces, f)


def scaling_fit(cfg, points=None, fixed_exponent=None):
    """Heating rate at each configured trap frequency, then a power-law fit."""
    results = []
    if points is None:
        points = []
        for i, f in enumerate(cfg.trap_frequencies_Hz()):
            hr = heating_rate(cfg, f, group_offset=100 * i)
            results.append(hr)
            points.append((angular(f), hr.ndot, hr.ndot_err))
    return fit_power_law(points, fixed_exponent), points, results


def noise_density(series, species, target_Hz=1e6, ndot_scaling_exponent=-2.0):
    """Heating rate from a series, S_E at the series frequency, extrapolated to ``target_Hz``."""
    ndot, err = heating_rate_from_series(series)
    se = se_from_heating(ndot, series.omega_z, species)
    se_err = se * err / ndot
    out = extrapolate_se((se, series.omega_z), angular(target_Hz), ndot_scaling_exponent)
    scale = out.value / se
    return {
        "ndot_quanta_s": ndot,
        "ndot_err": err,
        "omega_z_rad_s": series.omega_z,
        "se_at_omega_z": se,
        "se_at_omega_z_err": se_err,
        "target_frequency_Hz": target_Hz,
        "se_at_target": out.value,
        "se_at_target_err": se_err * scale,
        "ndot_scaling_exponent": out.ndot_exponent,
        "se_scaling_exponent": out.se_exponent,
    }
