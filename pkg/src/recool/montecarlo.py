"""Photon-by-photon Monte Carlo of Doppler recooling.

This is the stochastic oracle for :mod:`recool.model`: it never evaluates the
phase-averaged integrals. Scatter events are generated by thinning a Poisson
stream of candidate events at the peak instantaneous rate; each candidate
draws the Doppler shift from the arcsine law at the current energy (or, in
full-phase mode, from an explicitly rotating oscillator state) and is kept
with probability R(delta + dD) / R_max. Every kept photon changes the energy
by -hbar*dD plus one recoil energy. This is the zero-step limit of a
fixed-step simulation, so there is no step-size error.

Random numbers come from numpy's Philox generator with one substream per
(seed, group, repetition) via SeedSequence spawn keys.
"""

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import DomainError
from .model import EnergyDistribution, doppler_limit_energy
from .physics import HBAR

RNG_ALGORITHM = "numpy.random.Philox(SeedSequence(seed, spawn_key=(group, repetition)))"


@dataclass(frozen=True)
class McConfig:
    seed: int = 0
    repetitions: int = 500
    bin_width: float = 50e-6
    duration: float = 4e-3
    heating_rate: float = 0.0  # quanta/s while the beam is on
    dist: EnergyDistribution = None  # baseline (pre-heating) distribution
    efficiency: float = 1.0
    full_phase: bool = False

    def __post_init__(self):
        if self.repetitions < 1:
            raise DomainError("repetitions must be >= 1")
        if not self.bin_width > 0:
            raise DomainError("bin_width must be positive")
        if not self.duration >= self.bin_width:
            raise DomainError("duration must be at least one bin")
        if not 0.0 < self.efficiency <= 1.0:
            raise DomainError("detection efficiency must lie in (0, 1]")
        if self.heating_rate < 0:
            raise DomainError("heating_rate must be non-negative")

    @property
    def n_bins(self):
        return int(math.floor(self.duration / self.bin_width + 1e-9))

    def baseline(self, params):
        if self.dist is not None:
            return self.dist
        return EnergyDistribution("chi1", doppler_limit_energy(params))

    def to_dict(self):
        return {
            "seed": self.seed,
            "repetitions": self.repetitions,
            "bin_width_s": self.bin_width,
            "duration_s": self.duration,
            "heating_rate_quanta_s": self.heating_rate,
            "dist": None if self.dist is None else {"kind": self.dist.kind, "mean_energy_J": self.dist.mean_energy},
            "efficiency": self.efficiency,
            "full_phase": self.full_phase,
        }


@dataclass
class FluorescenceTrace:
    """Binned photon counts.

    ``counts`` holds per-repetition integer counts (shape reps x bins) when
    available; ``mean_counts`` and ``stderr`` are always set.
    """

    bin_width: float
    mean_counts: np.ndarray
    stderr: np.ndarray
    repetitions: int
    counts: np.ndarray = None
    mean_energy: np.ndarray = None  # J at each bin start, Monte Carlo only
    metadata: dict = field(default_factory=dict)
    initial_energies: np.ndarray = None

    def __post_init__(self):
        self.mean_counts = np.asarray(self.mean_counts, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)
        if self.mean_counts.shape != self.stderr.shape:
            raise DomainError("mean_counts and stderr must have the same length")
        if np.any(self.mean_counts < 0) or np.any(self.stderr < 0):
            raise DomainError("counts and errors must be non-negative")

    @classmethod
    def from_counts(cls, counts, bin_width, mean_energy=None, metadata=None):
        counts = np.atleast_2d(np.asarray(counts))
        reps = counts.shape[0]
        mean = counts.sum(axis=0) / reps  # integer sum: exact, order independent
        if reps > 1:
            stderr = counts.std(axis=0, ddof=1) / math.sqrt(reps)
        else:
            stderr = np.sqrt(mean)  # Poisson estimate for a single shot
        return cls(bin_width, mean, stderr, reps, counts, mean_energy, dict(metadata or {}))

    @property
    def n_bins(self):
        return self.mean_counts.size

    @property
    def bin_starts(self):
        return np.arange(self.n_bins) * self.bin_width

    @property
    def efficiency(self):
        return float(self.metadata.get("mc", {}).get("efficiency", self.metadata.get("efficiency", 1.0)))

    def rate(self):
        """Mean detected counts converted to scattered photons/s."""
        return self.mean_counts / (self.bin_width * self.efficiency)

    def rate_stderr(self):
        return self.stderr / (self.bin_width * self.efficiency)


@numba.njit(cache=True)
def _recool_kernel(state, waits, phases, accepts, counts, energies, consts):
    """Advance one repetition through a block of pre-drawn random numbers.

    state = [t, E, x, v, next_bin, done]; returns the updated array.
    """
    delta, hw, s, rmax, kz, mass, e_rec, heat_power, bw, duration, omega, full, v_emit = consts
    t, E, x, v = state[0], state[1], state[2], state[3]
    next_bin = int(state[4])
    nbins = counts.size
    for i in range(waits.size):
        dt = waits[i] / rmax
        t_new = t + dt
        while next_bin < nbins and next_bin * bw <= t_new:
            energies[next_bin] = E + heat_power * (next_bin * bw - t)
            next_bin += 1
        if t_new >= duration:
            state[0] = duration
            state[1] = E
            state[2] = x
            state[3] = v
            state[4] = next_bin
            state[5] = 1.0
            return state
        if full > 0.5:
            c, sn = math.cos(omega * dt), math.sin(omega * dt)
            x, v = x * c + v / omega * sn, -x * omega * sn + v * c
            if heat_power > 0.0:
                e_here = 0.5 * mass * (v * v + omega * omega * x * x)
                if e_here > 0.0:
                    f = math.sqrt((e_here + heat_power * dt) / e_here)
                    x *= f
                    v *= f
            vel = v
        else:
            E += heat_power * dt
            dmax = kz * math.sqrt(2.0 * E / mass)
            vel = -dmax * math.sin(math.pi * (phases[i] - 0.5)) / kz
        t = t_new
        dd = -kz * vel
        q = (delta + dd) / hw
        r = hw * s / (1.0 + s + q * q)
        if accepts[i] * rmax < r:
            b = int(t / bw)
            if b < nbins:
                counts[b] += 1
            if full > 0.5:
                v += HBAR * kz / mass
                # conditional on acceptance accepts[i]*rmax/r is uniform on (0, 1)
                if accepts[i] * rmax / r < 0.5:
                    v += v_emit
                else:
                    v -= v_emit
                E = 0.5 * mass * (v * v + omega * omega * x * x)
            else:
                E += -HBAR * dd + e_rec
                if E < 0.0:
                    E = 0.0
    state[0] = t
    state[1] = E
    state[2] = x
    state[3] = v
    state[4] = next_bin
    return state


def _consts(params, cfg):
    s, hw = params.s, params.hw
    rmax = hw * s / (1.0 + s)
    if not rmax > 0:
        raise DomainError("saturation must be positive to scatter photons")
    e_rec = params.recoil
    kick_z = (HBAR * params.kz) ** 2 / (2.0 * params.mass)
    v_emit = math.sqrt(max(2.0 * (e_rec - kick_z) / params.mass, 0.0))
    heat_power = cfg.heating_rate * HBAR * params.omega_z
    return np.array([
        params.delta, hw, s, rmax, params.kz, params.mass, e_rec, heat_power,
        cfg.bin_width, cfg.n_bins * cfg.bin_width, params.omega_z, 1.0 if cfg.full_phase else 0.0, v_emit,
    ])


def rng_for(seed, group=0, repetition=0):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(group), int(repetition)))
    return np.random.Generator(np.random.Philox(ss))


def sample_initial_energy(dist, ndot, delay, omega_z, rng, size=None):
    """Energy at the end of a dark period of length ``delay``.

    The mean is the baseline mean of ``dist`` plus ndot*delay quanta; the
    shape (chi1 / exponential / delta) is taken from ``dist``.
    """
    if delay < 0 or ndot < 0:
        raise DomainError("delay and heating rate must be non-negative")
    mean = dist.mean_energy + ndot * delay * HBAR * omega_z
    e = dist.sample(rng, size=size, mean=mean)
    return np.maximum(e, np.finfo(float).tiny) if size is not None else max(float(e), np.finfo(float).tiny)


def _simulate(E0, params, cfg, rng, consts):
    n_bins = cfg.n_bins
    counts = np.zeros(n_bins, dtype=np.int64)
    energies = np.zeros(n_bins)
    x = v = 0.0
    if cfg.full_phase:
        phi = 2.0 * math.pi * rng.random()
        amp_v = math.sqrt(2.0 * E0 / params.mass)
        v = amp_v * math.cos(phi)
        x = amp_v / params.omega_z * math.sin(phi)
    state = np.array([0.0, float(E0), x, v, 0.0, 0.0])
    block = int(consts[3] * cfg.duration * 1.02) + 1024
    while state[5] < 0.5:
        waits = rng.standard_exponential(block)
        phases = rng.random(block)
        accepts = rng.random(block)
        state = _recool_kernel(state, waits, phases, accepts, counts, energies, consts)
        block = max(block // 8, 1024)
    if cfg.efficiency < 1.0:
        counts = rng.binomial(counts, cfg.efficiency)
    return counts, energies


def simulate_recool_trace(E0, params, cfg, rng):
    """One recooling run starting from energy ``E0``; returns a single-shot trace."""
    if E0 < 0:
        raise DomainError("E0 must be non-negative")
    counts, energies = _simulate(E0, params, cfg, rng, _consts(params, cfg))
    meta = {"params": params.to_dict(), "mc": cfg.to_dict(), "rng": RNG_ALGORITHM, "E0_J": float(E0)}
    return FluorescenceTrace.from_counts(counts[None, :], cfg.bin_width, energies, meta)


def simulate_repetitions(params, cfg, ndot=0.0, delay=0.0, group=0, E0=None):
    """Average ``cfg.repetitions`` runs; each repetition owns substream (seed, group, rep).

    Initial energies are drawn with :func:`sample_initial_energy` unless a
    fixed ``E0`` is given.
    """
    consts = _consts(params, cfg)
    base = cfg.baseline(params)
    all_counts = np.zeros((cfg.repetitions, cfg.n_bins), dtype=np.int64)
    energy_sum = np.zeros(cfg.n_bins)
    e0s = np.zeros(cfg.repetitions)
    for rep in range(cfg.repetitions):
        rng = rng_for(cfg.seed, group, rep)
        e0 = sample_initial_energy(base, ndot, delay, params.omega_z, rng) if E0 is None else float(E0)
        counts, energies = _simulate(e0, params, cfg, rng, consts)
        all_counts[rep] = counts
        energy_sum += energies
        e0s[rep] = e0
    meta = {
        "params": params.to_dict(),
        "mc": cfg.to_dict(),
        "rng": RNG_ALGORITHM,
        "group": int(group),
        "delay_s": float(delay),
        "ndot_quanta_s": float(ndot),
        "baseline": {"kind": base.kind, "mean_energy_J": base.mean_energy},
        "E0_mean_J": float(e0s.mean()),
    }
    trace = FluorescenceTrace.from_counts(all_counts, cfg.bin_width, energy_sum / cfg.repetitions, meta)
    trace.initial_energies = e0s
    return trace


def run_experiment(params, cfg, delays, ndot_true):
    """Heat-then-recool protocol for each dark delay; keys are the delays in s."""
    delays = list(delays)
    if not delays:
        raise DomainError("at least one delay is required")
    return {
        float(d): simulate_repetitions(params, cfg, ndot=ndot_true, delay=float(d), group=i)
        for i, d in enumerate(delays)
    }
