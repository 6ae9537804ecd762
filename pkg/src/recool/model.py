"""Analytic Doppler-recooling model.

The ion's axial motion is a classical oscillation of energy E, so the Doppler
shift it presents to the cooling beam follows the arcsine law on
(-dmax, dmax) with dmax = kz * sqrt(2E/m). Phase-averaging the saturated
Lorentzian over that law gives the mean scatter rate, and averaging the
per-photon energy change gives the cooling power. Because the resulting ODE
for E is autonomous, every trajectory is a time shift of one universal
curve; :class:`RecoolModel` tabulates that curve once per parameter set and
the fluorescence model is then cheap enough to sit inside a least-squares
fit.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, stats
from scipy.interpolate import CubicSpline

from .errors import DomainError, NumericalError, RegimeError
from .physics import (
    HBAR,
    IonSpecies,
    LaserBeam,
    max_doppler,
    recoil_energy,
    scatter_rate_instant,
)

QUAD_RTOL = 1e-6
TABLE_RTOL = 1e-10
CDF_TRUNCATION = 1e-6
DIST_KINDS = ("chi1", "exponential", "delta")


@dataclass(frozen=True)
class RecoolParams:
    species: IonSpecies
    beam: LaserBeam
    omega_z: float
    # multiplies the velocity-dependent energy change per photon
    cooling_efficiency: float = 1.0

    def __post_init__(self):
        if not self.omega_z > 0:
            raise DomainError(f"omega_z must be positive, got {self.omega_z!r}")
        if self.beam.broadened_linewidth < self.species.natural_linewidth:
            raise DomainError("broadened linewidth is narrower than the natural linewidth")
        if not self.cooling_efficiency > 0:
            raise DomainError("cooling_efficiency must be positive")

    @property
    def mass(self):
        return self.species.mass

    @property
    def k(self):
        return self.beam.k

    @property
    def kz(self):
        return self.beam.kz

    @property
    def delta(self):
        return self.beam.detuning_angular

    @property
    def hw(self):
        return self.beam.hwhm_angular

    @property
    def s(self):
        return self.beam.saturation

    @property
    def L(self):
        return self.beam.broadened_linewidth

    @property
    def recoil(self):
        return recoil_energy(self.k, self.mass)

    def delta_max(self, energy):
        return max_doppler(energy, self.mass, self.beam.k, self.beam.kz_fraction)

    def cold_rate(self):
        return scatter_rate_instant(self.delta, self.s, self.L)

    def with_omega(self, omega_z):
        return RecoolParams(self.species, self.beam, omega_z, self.cooling_efficiency)

    def to_dict(self):
        return {
            "species": self.species.to_dict(),
            "wavelength_m": self.beam.wavelength,
            "detuning_Hz": self.beam.detuning,
            "saturation": self.beam.saturation,
            "broadened_linewidth_Hz": self.beam.broadened_linewidth,
            "kz_fraction": self.beam.kz_fraction,
            "omega_z_rad_s": self.omega_z,
            "cooling_efficiency": self.cooling_efficiency,
        }


@dataclass(frozen=True)
class EnergyDistribution:
    """Distribution of the ion energy at the moment the cooling beam returns.

    ``chi1`` is the energy of one thermal quadratic degree of freedom scaled
    to the given mean; ``exponential`` is the full 1D oscillator (kinetic plus
    potential); ``delta`` is a point mass used for degenerate checks.
    """

    kind: str = "chi1"
    mean_energy: float = 1e-25

    def __post_init__(self):
        if self.kind not in DIST_KINDS:
            raise DomainError(f"unknown distribution kind {self.kind!r}; expected one of {DIST_KINDS}")
        if not self.mean_energy > 0:
            raise DomainError(f"mean_energy must be positive, got {self.mean_energy!r}")

    def with_mean(self, mean_energy):
        return EnergyDistribution(self.kind, mean_energy)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "chi1":
            return self.mean_energy * stats.chi2.ppf(u, 1)
        if self.kind == "exponential":
            return -self.mean_energy * np.log1p(-u)
        return np.full_like(u, self.mean_energy)

    def sample(self, rng, size=None, mean=None):
        mean = self.mean_energy if mean is None else mean
        if self.kind == "chi1":
            z = rng.standard_normal(size)
            return mean * z * z
        if self.kind == "exponential":
            return mean * rng.standard_exponential(size)
        return np.full(size, mean) if size is not None else mean


@dataclass(frozen=True)
class EnergyTrajectory:
    times: np.ndarray
    energies: np.ndarray
    clamp_energy: float


@dataclass(frozen=True)
class Bins:
    width: float
    count: int

    def __post_init__(self):
        if not self.width > 0 or self.count < 1:
            raise DomainError("bins need a positive width and at least one bin")

    @property
    def starts(self):
        return np.arange(self.count) * self.width

    @property
    def midpoints(self):
        return (np.arange(self.count) + 0.5) * self.width


def doppler_density(delta_d, delta_max):
    """Arcsine density of the Doppler shift of an oscillator with peak shift ``delta_max``."""
    if not delta_max > 0:
        raise DomainError(f"delta_max must be positive, got {delta_max!r}")
    d = np.asarray(delta_d, dtype=float)
    inside = np.abs(d) < delta_max
    out = np.zeros_like(d)
    out[inside] = 1.0 / (math.pi * np.sqrt(delta_max**2 - d[inside] ** 2))
    return out if out.ndim else float(out)


def boltzmann_density(E0, dist):
    E0 = np.asarray(E0, dtype=float)
    if np.any(E0 <= 0):
        raise DomainError("boltzmann_density is defined for E0 > 0")
    m = dist.mean_energy
    if dist.kind == "chi1":
        out = np.exp(-E0 / (2.0 * m)) / np.sqrt(2.0 * math.pi * E0 * m)
    elif dist.kind == "exponential":
        out = np.exp(-E0 / m) / m
    else:
        raise DomainError("a delta distribution has no density")
    return out if out.ndim else float(out)


def _phase_average(params, energy, weight, rtol):
    """Average ``R(delta + dD) * weight(dD)`` over the arcsine law at ``energy``.

    Substituting dD = dmax*sin(theta) removes the edge singularities.
    """
    dmax = params.delta_max(energy)
    delta, s, L = params.delta, params.s, params.L
    if dmax == 0.0:
        return scatter_rate_instant(delta, s, L) * weight(0.0)

    def integrand(theta):
        dd = dmax * math.sin(theta)
        return scatter_rate_instant(delta + dd, s, L) * weight(dd)

    lo, hi = -0.5 * math.pi, 0.5 * math.pi
    points = None
    if abs(delta) < dmax:
        points = [math.asin(-delta / dmax)]
    # absolute floor for integrands that change sign (cooling power near the limit)
    w_ref = max(abs(weight(dmax)), abs(weight(-dmax)), abs(weight(0.0)))
    floor = 1e-3 * rtol * params.cold_rate() * w_ref
    val, err, info = integrate.quad(
        integrand, lo, hi, points=points, epsabs=floor, epsrel=rtol, limit=500, full_output=1
    )[:3]
    if not np.isfinite(val) or err > 10.0 * max(rtol * abs(val), floor):
        raise NumericalError(
            "phase-averaged integral did not converge",
            energy=energy, delta_max=dmax, value=val, abserr=err, neval=info.get("neval"),
        )
    return val / math.pi


def avg_scatter_overlap(E, params, rtol=QUAD_RTOL):
    """Mean scatter rate over one oscillation (photons/s) by direct quadrature."""
    E = np.asarray(E, dtype=float)
    if np.any(E < 0):
        raise DomainError("energy must be non-negative")
    vals = [_phase_average(params, float(e), lambda dd: 1.0, rtol) for e in E.ravel()]
    out = np.asarray(vals).reshape(E.shape)
    return out if out.ndim else float(out)


def hot_regime_coefficient(params):
    """C in <dN/dt> = C / sqrt(E), with L taken as the angular FWHM 2*pi*L."""
    s = params.s
    L_ang = 2.0 * math.pi * params.L
    return s * L_ang**2 / (2.0 * math.sqrt(2.0 / params.mass) * params.kz * (1.0 + s) ** 1.5)


def hot_regime_margin(E, params):
    """dmax(E) / (pi*L + |delta|); the closed form needs this to be large."""
    return params.delta_max(E) / (params.hw + abs(params.delta))


def avg_scatter_hot(E, params, guard_factor=3.0, check=True):
    """Closed-form mean scatter rate for an ion much hotter than the linewidth."""
    E = np.asarray(E, dtype=float)
    if np.any(E <= 0):
        raise DomainError("the hot-ion closed form needs E > 0")
    if check:
        margin = hot_regime_margin(E, params)
        if np.any(margin < guard_factor):
            bad = float(np.min(E[margin < guard_factor])) if E.ndim else float(E)
            raise RegimeError(
                f"hot-ion approximation invalid: delta_max={params.delta_max(bad):.4g} rad/s "
                f"< {guard_factor} x (pi*L={params.hw:.4g} + |delta|={abs(params.delta):.4g}) rad/s"
            )
    out = hot_regime_coefficient(params) / np.sqrt(E)
    return out if out.ndim else float(out)


def energy_drift(E, params, rtol=QUAD_RTOL):
    """dE/dt (J/s) during recooling, excluding any external heating.

    Each photon changes the energy by -hbar*dD (absorption kick against the
    velocity that produced the Doppler shift dD) plus one recoil energy.
    """
    eta = params.cooling_efficiency
    rec = params.recoil
    return _phase_average(params, float(E), lambda dd: rec - eta * HBAR * dd, rtol)


def doppler_limit_energy(params):
    """Steady-state energy where laser cooling balances recoil heating.

    Trajectories never go below it, so it also serves as the clamp energy.
    """
    if params.delta >= 0:
        raise DomainError("recooling needs a red-detuned (negative) laser detuning")
    return _doppler_limit_cached(_table_key(params))


@lru_cache(maxsize=64)
def _doppler_limit_cached(key):
    params = _params_from_key(key)
    f = lambda logE: energy_drift(math.exp(logE), params, TABLE_RTOL)
    lo = math.log(params.recoil * 1e-3)
    if f(lo) <= 0:
        raise NumericalError("no heating at low energy; cannot bracket the Doppler limit")
    hi = lo
    for _ in range(200):
        hi += 1.0
        if f(hi) < 0:
            break
    else:
        raise NumericalError("cooling never outweighs recoil heating for these parameters")
    root = optimize.brentq(f, hi - 1.0, hi, xtol=1e-14, rtol=1e-14)
    return math.exp(root)


def _table_key(params):
    # omega_z does not enter the phase-averaged dynamics
    sp, b = params.species, params.beam
    return (
        sp.name, sp.mass, sp.charge, sp.cooling_wavelength, sp.natural_linewidth,
        b.wavelength, b.detuning, b.saturation, b.broadened_linewidth, b.kz_fraction,
        params.cooling_efficiency,
    )


def _params_from_key(key):
    sp = IonSpecies(*key[:5])
    beam = LaserBeam(*key[5:10])
    return RecoolParams(sp, beam, 1.0, key[10])


def energy_trajectory(E0, params, t_grid, rtol=1e-9):
    """Integrate the recooling ODE directly from ``E0`` on ``t_grid``.

    Works in y = log(E - E_lim) so the approach to the Doppler limit is not
    stiff. An ion starting at or below the limit is returned unchanged.
    """
    t = np.asarray(t_grid, dtype=float)
    if E0 < 0:
        raise DomainError("E0 must be non-negative")
    if t.ndim != 1 or t.size == 0 or t[0] != 0.0 or np.any(np.diff(t) < 0):
        raise DomainError("t_grid must be a non-decreasing 1-D grid starting at 0")
    e_lim = doppler_limit_energy(params)
    if E0 <= e_lim:
        return EnergyTrajectory(t, np.full(t.shape, float(E0)), e_lim)

    def rhs(_, y):
        gap = math.exp(y[0])
        return [energy_drift(e_lim + gap, params, 1e-11) / gap]

    sol = integrate.solve_ivp(
        rhs, (0.0, t[-1]), [math.log(E0 - e_lim)], t_eval=t, rtol=rtol, atol=1e-10, method="RK45",
    )
    if not sol.success:
        raise NumericalError("recooling ODE integration failed", message=sol.message, E0=E0)
    energies = e_lim + np.exp(sol.y[0])
    energies = np.minimum.accumulate(np.minimum(energies, E0))
    return EnergyTrajectory(t, energies, e_lim)


def _gauss_nodes_on_cdf(n_per_panel=(40, 24, 24, 16)):
    """Gauss-Legendre nodes/weights on (0, 1 - CDF_TRUNCATION), split into panels."""
    edges = [0.0, 0.9, 0.999, 0.99999, 1.0 - CDF_TRUNCATION]
    us, ws = [], []
    for (a, b), n in zip(zip(edges[:-1], edges[1:]), n_per_panel):
        x, w = np.polynomial.legendre.leggauss(n)
        us.append(0.5 * (b - a) * x + 0.5 * (b + a))
        ws.append(0.5 * (b - a) * w)
    u = np.concatenate(us)
    w = np.concatenate(ws)
    return u, w / w.sum()


class RecoolModel:
    """Tabulated recooling model for one parameter set.

    Built tables:
      * mean scatter rate vs log E,
      * descent time T(y) with y = log(E - E_lim), so that
        E(E0, t) = E_lim + exp(y(T(y0) - t)).
    Both come from adaptive quadrature at the grid nodes and cubic splines
    between them.
    """

    def __init__(self, params, e_max=None, step=0.02):
        self.params = params
        self.e_lim = doppler_limit_energy(params)
        self.step = step
        self.e_max = max(e_max or 0.0, 1e7 * self.e_lim)
        self._build()

    def _build(self):
        p, h = self.params, self.step
        x = np.arange(math.log(1e-8 * self.e_lim), math.log(self.e_max) + h, h)
        self._x_lo, self._x_hi = x[0], x[-1]
        rate = np.array([_phase_average(p, math.exp(v), lambda dd: 1.0, TABLE_RTOL) for v in x])
        self._rate0 = p.cold_rate()
        self._rate_spline = CubicSpline(x, rate)

        y = np.arange(math.log(1e-8 * self.e_lim), math.log(self.e_max) + h, h)
        gap = np.exp(y)
        drift = np.array([energy_drift(self.e_lim + g, p, TABLE_RTOL) for g in gap])
        if np.any(drift >= 0):
            raise NumericalError("cooling power changes sign above the Doppler limit", e_lim=self.e_lim)
        slowness = -gap / drift  # dT/dy > 0
        T = CubicSpline(y, slowness).antiderivative()(y)
        self._y_lo, self._y_hi = y[0], y[-1]
        self._slow_lo = slowness[0]
        self._T_of_y = CubicSpline(y, T)
        self._y_of_T = CubicSpline(T, y)
        self._T_hi = T[-1]

    def _ensure(self, e):
        if e > self.e_max:
            self.e_max = 10.0 ** math.ceil(math.log10(e * 10.0))
            self._build()

    def rate(self, E):
        """Mean scatter rate at energy ``E`` from the table."""
        E = np.asarray(E, dtype=float)
        if E.size:
            self._ensure(float(E.max()))
        x = np.log(np.maximum(E, 1e-300))
        out = np.where(x <= self._x_lo, self._rate0, self._rate_spline(np.clip(x, self._x_lo, self._x_hi)))
        # below the first node the rate is flat to within (dmax/hw)^2 ~ 1e-10
        return out

    def descent_time(self, E):
        """Time for an ion at ``E`` (> E_lim) to reach E_lim + exp(y_lo)."""
        gap = np.asarray(E, dtype=float) - self.e_lim
        y = np.log(gap)
        return np.where(y >= self._y_lo, self._T_of_y(np.clip(y, self._y_lo, self._y_hi)),
                        (y - self._y_lo) * self._slow_lo)

    def energy_at(self, E0, t):
        """E(E0, t) for arrays broadcast against each other."""
        E0, t = np.broadcast_arrays(np.asarray(E0, dtype=float), np.asarray(t, dtype=float))
        if E0.size:
            self._ensure(float(E0.max()))
        out = E0.copy()
        hot = E0 > self.e_lim
        if np.any(hot):
            T = self.descent_time(E0[hot]) - t[hot]
            y = np.where(T >= 0, self._y_of_T(np.clip(T, 0.0, self._T_hi)), self._y_lo + T / self._slow_lo)
            out[hot] = np.minimum(self.e_lim + np.exp(y), E0[hot])
        return out

    def trajectory(self, E0, t_grid):
        t = np.asarray(t_grid, dtype=float)
        return EnergyTrajectory(t, self.energy_at(E0, t), self.e_lim)

    def curve(self, dist, bins, points_per_bin=3, nodes=None, check=False):
        """Expected scatter rate (photons/s) averaged over each time bin.

        The E0 integral runs over Gauss-Legendre nodes in the CDF variable
        (truncated at 1 - 1e-6); with ``points_per_bin=1`` the rate is taken at
        bin midpoints, otherwise bin averages use Gauss-Legendre points.
        """
        if points_per_bin == 1:
            tx, tw = np.array([0.5]), np.array([1.0])
        else:
            gx, gw = np.polynomial.legendre.leggauss(points_per_bin)
            tx, tw = 0.5 * (gx + 1.0), 0.5 * gw
        times = (np.arange(bins.count)[:, None] + tx[None, :]) * bins.width
        if dist.kind == "delta":
            e0, w = np.array([dist.mean_energy]), np.array([1.0])
        else:
            u, w = nodes if nodes is not None else _gauss_nodes_on_cdf()
            e0 = dist.ppf(u)
        E = self.energy_at(e0[:, None, None], times[None, :, :])
        r = self.rate(E)
        curve = np.einsum("j,jbk,k->b", w, r, tw)
        if check and dist.kind != "delta":
            u2, w2 = _gauss_nodes_on_cdf((20, 12, 12, 8))
            coarse = np.einsum("j,jbk,k->b", w2, self.rate(self.energy_at(dist.ppf(u2)[:, None, None], times[None])), tw)
            err = np.max(np.abs(coarse - curve) / curve)
            if err > 1e-4:
                raise NumericalError("E0 quadrature did not converge", rel_change=float(err))
        return curve


_MODEL_CACHE = {}


def get_model(params):
    key = _table_key(params)
    model = _MODEL_CACHE.get(key)
    if model is None:
        if len(_MODEL_CACHE) > 16:
            _MODEL_CACHE.clear()
        model = _MODEL_CACHE[key] = RecoolModel(params)
    return model


def expected_fluorescence(dist, params, bins, points_per_bin=3, check=True):
    """Model fluorescence curve in photons/s per bin (unit detection efficiency)."""
    if not isinstance(bins, Bins):
        bins = Bins(*bins) if not isinstance(bins, dict) else Bins(bins["width"], bins["count"])
    return get_model(params).curve(dist, bins, points_per_bin=points_per_bin, check=check)
