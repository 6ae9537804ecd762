"""Parameter extraction: ion energy from recooling traces, heating rates,
frequency scaling and electric-field noise density."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import DegenerateInputError, DomainError
from .model import Bins, EnergyDistribution, get_model, hot_regime_coefficient
from .physics import HBAR


@dataclass(frozen=True)
class FitOptions:
    amplitude: bool = False
    background: bool = False
    dist_kind: str = "chi1"
    max_iter: int = 200
    diff_step: float = 1e-6
    points_per_bin: int = 3
    bootstrap: int = 0
    seed: int = 0
    guess: float = None  # initial mean energy (J); default from the hot-ion closed form

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class FitResult:
    parameters: dict
    sigmas: dict
    residual_norm: float
    converged: bool
    iterations: int
    chi2: float = float("nan")
    dof: int = 0
    model_config: dict = field(default_factory=dict)

    @property
    def reliable(self):
        return self.converged

    @property
    def mean_energy(self):
        return self.parameters["mean_energy"]

    @property
    def n_mean(self):
        return self.parameters["n_mean"]

    @property
    def n_err(self):
        return self.sigmas["n_mean"]

    def to_dict(self):
        return {
            "parameters": dict(self.parameters),
            "sigmas": dict(self.sigmas),
            "residual_norm": self.residual_norm,
            "chi2": self.chi2,
            "dof": self.dof,
            "converged": self.converged,
            "reliable": self.reliable,
            "iterations": self.iterations,
            "model_config_echo": self.model_config,
        }


@dataclass(frozen=True)
class HeatingSeries:
    points: tuple  # ((delay_s, n_mean, n_err), ...)
    omega_z: float

    def __post_init__(self):
        pts = tuple(tuple(float(v) for v in p) for p in self.points)
        object.__setattr__(self, "points", pts)
        delays = [p[0] for p in pts]
        if any(b <= a for a, b in zip(delays, delays[1:])):
            raise DomainError("heating series delays must be strictly increasing")
        if any(not p[2] > 0 for p in pts):
            raise DomainError("heating series errors must be positive")
        if not self.omega_z > 0:
            raise DomainError("omega_z must be positive")

    @property
    def delays(self):
        return np.array([p[0] for p in self.points])

    @property
    def n_mean(self):
        return np.array([p[1] for p in self.points])

    @property
    def n_err(self):
        return np.array([p[2] for p in self.points])


@dataclass(frozen=True)
class PowerLawFit:
    amplitude: float
    exponent: float
    covariance: np.ndarray
    points: tuple
    fixed_exponent: bool = False

    @property
    def amplitude_err(self):
        return math.sqrt(self.covariance[0, 0])

    @property
    def exponent_err(self):
        return 0.0 if self.fixed_exponent else math.sqrt(self.covariance[1, 1])

    def __call__(self, omega):
        return self.amplitude * np.asarray(omega, dtype=float) ** self.exponent

    def to_dict(self):
        return {
            "amplitude": self.amplitude,
            "amplitude_err": self.amplitude_err,
            "exponent": self.exponent,
            "exponent_err": self.exponent_err,
            "fixed_exponent": self.fixed_exponent,
            "covariance": np.asarray(self.covariance).tolist(),
            "points": [list(p) for p in self.points],
        }


@dataclass(frozen=True)
class NoiseDensity:
    """S_E (V^2 m^-2 Hz^-1) at ``omega`` and the scaling used to get there."""

    value: float
    omega: float
    ndot_exponent: float
    se_exponent: float

    def __float__(self):
        return float(self.value)


def _trace_arrays(trace):
    rate = trace.rate()
    sigma = trace.rate_stderr()
    if not np.all(sigma > 0):
        # uniform weights when errors are absent
        sigma = np.full_like(rate, max(float(np.std(rate)), 1e-12 * float(np.max(rate)), 1e-300))
    return rate, sigma


def _initial_guess(first_rate, cold_rate, params, e_lim):
    # hot-ion closed form inverted at the first bin, in the units of the model
    C = hot_regime_coefficient(params)
    rnorm = first_rate / cold_rate * params.cold_rate()
    guess = (C / rnorm) ** 2
    return max(guess, 10.0 * e_lim)


def fit_initial_energy(trace, params, opts=None):
    """Fit the thermally averaged recooling curve to an averaged trace.

    Free parameters: mean initial energy (always), plus an amplitude scale and
    an additive background when enabled in ``opts``. Residuals are weighted by
    the per-bin standard errors. Uses scipy's trust-region-reflective
    least squares with a forward-difference Jacobian on absolute steps.
    """
    opts = FitOptions() if opts is None else opts
    model = get_model(params)
    e_lim = model.e_lim
    bins = Bins(trace.bin_width, trace.n_bins)
    rate, sigma = _trace_arrays(trace)

    tail = rate[-max(trace.n_bins // 4, 1):]
    cold_level = float(np.mean(tail)) if opts.amplitude else params.cold_rate()
    # nothing to fit if the first bin is not below the cold level, or if the
    # summed deficit over the trace is not significant
    z = float(np.sum(cold_level - rate) / math.sqrt(np.sum(sigma**2)))
    if rate[0] >= cold_level or z < 2.0:
        raise DegenerateInputError(
            f"first-bin rate {rate[0]:.6g}/s against cold level {cold_level:.6g}/s "
            f"(summed deficit {z:.2f} sigma); the trace shows no recooling"
        )

    guess = opts.guess if opts.guess is not None else _initial_guess(rate[0], cold_level, params, e_lim)
    names = ["log_mean_energy"]
    x0 = [math.log(guess / e_lim)]
    lo, hi = [math.log(1e-2)], [math.log(1e6)]
    if opts.amplitude:
        names.append("amplitude")
        x0.append(cold_level / params.cold_rate())
        lo.append(0.0)
        hi.append(np.inf)
    if opts.background:
        names.append("background")
        x0.append(0.0)
        lo.append(-np.inf)
        hi.append(np.inf)
    x0 = np.clip(np.array(x0), np.array(lo) + 1e-9, np.array(hi) - 1e-9)
    kind = opts.dist_kind
    cold_ref = params.cold_rate()  # background is fitted as a fraction of this

    def predict(x):
        dist = EnergyDistribution(kind, e_lim * math.exp(x[0]))
        curve = model.curve(dist, bins, points_per_bin=opts.points_per_bin)
        i = 1
        amp = bg = None
        if opts.amplitude:
            amp = x[i]
            i += 1
        if opts.background:
            bg = x[i]
        if amp is not None:
            curve = amp * curve
        if bg is not None:
            curve = curve + bg * cold_ref
        return curve

    def residuals(x, data=rate):
        return (data - predict(x)) / sigma

    def jacobian(x, data=rate):
        # absolute steps: scipy's relative step collapses when a parameter sits near zero
        f0 = residuals(x, data)
        J = np.empty((f0.size, x.size))
        for j in range(x.size):
            h = opts.diff_step * max(1.0, abs(x[j]))
            xp = x.copy()
            if xp[j] + h > hi[j]:
                h = -h
            xp[j] += h
            J[:, j] = (residuals(xp, data) - f0) / h
        return J

    def solve(data, start):
        return optimize.least_squares(
            residuals, start, jac=jacobian, method="trf",
            bounds=(lo, hi), x_scale="jac", max_nfev=opts.max_iter * (len(start) + 1),
            xtol=1e-12, ftol=1e-12, gtol=1e-12, kwargs={"data": data},
        )

    res = solve(rate, x0)
    x = res.x
    J = res.jac
    try:
        cov = np.linalg.inv(J.T @ J)
    except np.linalg.LinAlgError:
        cov = np.full((len(x), len(x)), np.inf)
    sig = np.sqrt(np.maximum(np.diag(cov), 0.0))

    if opts.bootstrap and trace.counts is not None and trace.counts.shape[0] > 1:
        sig = _bootstrap_sigmas(trace, solve, x, opts)

    mean_energy = e_lim * math.exp(x[0])
    params_out = {"mean_energy": mean_energy, "n_mean": mean_energy / (HBAR * params.omega_z)}
    sigmas = {"mean_energy": float(mean_energy * sig[0]), "n_mean": float(mean_energy * sig[0] / (HBAR * params.omega_z))}
    for j, name in enumerate(names[1:], start=1):
        unit = cold_ref if name == "background" else 1.0
        params_out[name] = float(x[j]) * unit
        sigmas[name] = float(sig[j]) * unit
    chi2 = float(np.sum(res.fun**2))
    return FitResult(
        parameters=params_out,
        sigmas=sigmas,
        residual_norm=float(np.sqrt(chi2)),
        converged=bool(res.status > 0),
        iterations=int(res.njev if res.njev is not None else res.nfev),
        chi2=chi2,
        dof=int(trace.n_bins - len(x)),
        model_config={
            "params": params.to_dict(),
            "dist_kind": kind,
            "doppler_limit_J": e_lim,
            "options": opts.to_dict(),
            "message": res.message,
        },
    )


def _bootstrap_sigmas(trace, solve, x_best, opts):
    """Standard deviation of refits over repetition resamples."""
    rng = np.random.default_rng(opts.seed)
    counts = trace.counts
    reps = counts.shape[0]
    scale = 1.0 / (trace.bin_width * trace.efficiency)
    draws = []
    for _ in range(opts.bootstrap):
        idx = rng.integers(0, reps, reps)
        data = counts[idx].sum(axis=0) / reps * scale
        draws.append(solve(data, x_best).x)
    return np.std(np.array(draws), axis=0, ddof=1)


def _weighted_line(x, y, err):
    w = 1.0 / np.asarray(err, dtype=float) ** 2
    A = np.vstack([np.ones_like(x), x]).T
    N = A.T @ (A * w[:, None])
    cov = np.linalg.inv(N)
    coef = cov @ (A.T @ (w * y))
    return coef, cov


def heating_rate_from_series(series):
    """Slope of <n> against delay from a weighted straight-line fit.

    Returns ``(ndot, ndot_err)`` in quanta/s.
    """
    if len(series.points) < 2:
        raise DomainError("a heating series needs at least two points")
    coef, cov = _weighted_line(series.delays, series.n_mean, series.n_err)
    return float(coef[1]), float(math.sqrt(cov[1, 1]))


def fit_power_law(points, fixed_exponent=None):
    """Weighted fit of ndot = A * omega**p in log-log space.

    ``points`` is a sequence of ``(omega, ndot, err)``. With
    ``fixed_exponent`` set only A is fitted.
    """
    pts = tuple(tuple(float(v) for v in p) for p in points)
    if not pts:
        raise DomainError("no points to fit")
    omega = np.array([p[0] for p in pts])
    ndot = np.array([p[1] for p in pts])
    err = np.array([p[2] for p in pts])
    if np.any(omega <= 0) or np.any(ndot <= 0):
        raise DomainError("power-law fit requires positive frequencies and heating rates")
    if np.any(err <= 0):
        raise DomainError("power-law fit requires positive errors")
    lx, ly = np.log(omega), np.log(ndot)
    lerr = err / ndot
    if fixed_exponent is not None:
        w = 1.0 / lerr**2
        la = np.sum(w * (ly - fixed_exponent * lx)) / np.sum(w)
        var_la = 1.0 / np.sum(w)
        A = math.exp(la)
        cov = np.array([[A * A * var_la]])
        return PowerLawFit(A, float(fixed_exponent), cov, pts, fixed_exponent=True)
    if len(pts) < 2 or np.unique(omega).size < 2:
        raise DomainError("a free-exponent power-law fit needs at least two distinct frequencies")
    coef, cov_log = _weighted_line(lx, ly, lerr)
    A = math.exp(coef[0])
    # d A / d log A = A
    jac = np.diag([A, 1.0])
    cov = jac @ cov_log @ jac.T
    return PowerLawFit(A, float(coef[1]), cov, pts)


def se_from_heating(ndot, omega_z, species):
    """Electric-field noise density from a heating rate: 4 m hbar omega ndot / q^2."""
    if not (ndot > 0 and omega_z > 0):
        raise DomainError("heating rate and frequency must be positive")
    return 4.0 * species.mass * HBAR * omega_z * ndot / species.charge**2


def heating_from_se(se, omega_z, species):
    if not (se > 0 and omega_z > 0):
        raise DomainError("noise density and frequency must be positive")
    return species.charge**2 * se / (4.0 * species.mass * HBAR * omega_z)


def extrapolate_se(se_at, target_omega, ndot_scaling_exponent=-2.0):
    """Scale S_E measured at (S_E, omega) to ``target_omega``.

    With ndot proportional to omega**p, S_E goes as omega**(p + 1).
    """
    se, omega = se_at
    if not (se > 0 and omega > 0 and target_omega > 0):
        raise DomainError("noise density and frequencies must be positive")
    se_exp = ndot_scaling_exponent + 1.0
    return NoiseDensity(se * (target_omega / omega) ** se_exp, float(target_omega),
                        float(ndot_scaling_exponent), se_exp)
