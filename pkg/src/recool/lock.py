"""Transfer-cavity ratio lock and wavemeter drift lock, simulated scan by scan.

The scanning cavity sees a stabilised reference laser and the laser being
locked. Positions are in samples along a scan assumed linear in frequency
(Hz-equivalent spacing ``sample_spacing``). Per scan two decoupled PI loops
act: the cavity loop holds the first reference peak at its stored sample
position, the laser loop holds b/a, where a is the reference peak spacing
(one free spectral range) and b the distance from the first reference peak
to the tracked transfer peak.

The controllers are in velocity form, u_k = u_{k-1} - Kp*e_k - Ki*I_k with
I_k the running sum of errors. Against the static piezo plant this gives a
type-2 loop, so a drifting cavity is followed with zero steady-state error.
The closed-loop poles solve z^2 + (Kp + Ki - 2) z + (1 - Kp) = 0; the loop is
stable for 0 < Kp < 2, Ki > 0 and Kp + Ki/2 < 2. The defaults (0.5, 0.1) put
both poles at |z| = 0.707 and settle a step to 10% in about 10 scans.
"""

import math
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import DegenerateInputError, DetectionError, DomainError
from .physics import C_LIGHT


class MergedPeakWarning(UserWarning):
    pass


@dataclass(frozen=True)
class CavityConfig:
    fsr: float = 1e9  # Hz
    finesse: float = 134.0
    scan_span: float = 4e9  # Hz
    scan_rate: float = 100.0  # scans/s
    sample_spacing: float = 3e6  # Hz per sample
    peak_fwhm: float = 40e6  # Hz, observed (scan-broadened) width

    def __post_init__(self):
        for name in ("fsr", "finesse", "scan_span", "scan_rate", "sample_spacing", "peak_fwhm"):
            if not getattr(self, name) > 0:
                raise DomainError(f"CavityConfig.{name} must be positive")
        if not self.sample_spacing < self.peak_fwhm / 4:
            raise DomainError("sample_spacing must be below a quarter of the peak FWHM")
        if self.scan_span < 2 * self.fsr:
            raise DomainError("the scan must cover at least two free spectral ranges")

    @property
    def n_samples(self):
        return int(math.floor(self.scan_span / self.sample_spacing + 1e-9))

    @property
    def fwhm_samples(self):
        return self.peak_fwhm / self.sample_spacing

    @property
    def fsr_samples(self):
        return self.fsr / self.sample_spacing

    @property
    def airy_fwhm(self):
        """Intrinsic linewidth fsr/finesse, for reference; peaks use ``peak_fwhm``."""
        return self.fsr / self.finesse


@dataclass
class ScanTrace:
    reference: np.ndarray  # photodiode channel of the reference laser
    transfer: np.ndarray  # channel of the laser being locked
    sample_spacing: float
    fwhm_samples: float
    noise: dict = field(default_factory=dict)
    true_reference: np.ndarray = None  # sample positions used to synthesize, for tests
    true_transfer: np.ndarray = None

    @property
    def summed(self):
        return self.reference + self.transfer

    def frequency(self, index):
        return np.asarray(index) * self.sample_spacing

    def __len__(self):
        return self.reference.size


def _lorentz_sum(n, centres, fwhm, amp):
    x = np.arange(n, dtype=float)[:, None]
    u = 2.0 * (x - np.asarray(centres, dtype=float)[None, :]) / fwhm
    return (amp / (1.0 + u * u)).sum(axis=1)


def _comb(first, spacing, n, margin):
    # all members of first + k*spacing inside [-margin, n + margin)
    k0 = math.ceil((-margin - first) / spacing)
    k1 = math.floor((n + margin - first) / spacing)
    return first + spacing * np.arange(k0, k1 + 1)


def synthesize_trace(cfg, laser_offset=0.0, drift=0.0, noise_rms=0.0, rng=None,
                     reference_offset=300e6, transfer_offset=450e6,
                     reference_amplitude=1.0, transfer_amplitude=0.8):
    """One cavity scan with Lorentzian transmission peaks on two channels.

    Reference peaks sit at ``reference_offset + drift + k*fsr``; transfer
    peaks at ``reference_offset + transfer_offset + laser_offset + drift +
    k*fsr`` (all Hz-equivalent along the scan). Gaussian noise of rms
    ``noise_rms`` (in units of the reference peak height) is added to each
    channel and the result clipped at zero.
    """
    n = cfg.n_samples
    w = cfg.fwhm_samples
    margin = 10 * w
    ref0 = (reference_offset + drift) / cfg.sample_spacing
    tr0 = ref0 + (transfer_offset + laser_offset) / cfg.sample_spacing
    ref_c = _comb(ref0 % cfg.fsr_samples, cfg.fsr_samples, n, margin)
    tr_c = _comb(tr0 % cfg.fsr_samples, cfg.fsr_samples, n, margin)
    ref = _lorentz_sum(n, ref_c, w, reference_amplitude)
    tr = _lorentz_sum(n, tr_c, w, transfer_amplitude)
    if noise_rms > 0:
        if rng is None:
            raise DomainError("an rng is required when noise_rms > 0")
        ref = ref + rng.normal(0.0, noise_rms, n)
        tr = tr + rng.normal(0.0, noise_rms, n)
    inside = lambda c: c[(c >= 0) & (c <= n - 1)]
    return ScanTrace(
        np.maximum(ref, 0.0), np.maximum(tr, 0.0), cfg.sample_spacing, w,
        {"noise_rms": float(noise_rms), "model": "gaussian, clipped at 0"},
        inside(ref_c), inside(tr_c),
    )


@dataclass(frozen=True)
class PeakInfo:
    position: float  # samples, sub-sample
    height: float
    width: float  # full width at half maximum, samples, interpolated
    merged: bool


def _lorentz_kernel(fwhm):
    half = int(math.ceil(3 * fwhm))
    x = np.arange(-half, half + 1, dtype=float)
    k = 1.0 / (1.0 + (2.0 * x / fwhm) ** 2)
    return k / k.sum()


def _runs(mask):
    """Start/stop (exclusive) index pairs of the True runs in ``mask``."""
    d = np.diff(np.concatenate(([0], mask.astype(np.int8), [0])))
    return np.flatnonzero(d == 1), np.flatnonzero(d == -1)


def _half_max_width(y, i, lo):
    """Full width at half maximum around sample ``i`` with linear interpolation."""
    level = lo + 0.5 * (y[i] - lo)
    a = i
    while a > 0 and y[a] > level:
        a -= 1
    b = i
    while b < y.size - 1 and y[b] > level:
        b += 1
    xa = a + (level - y[a]) / (y[a + 1] - y[a]) if y[a] <= level else float(a)
    xb = b - 1 + (level - y[b - 1]) / (y[b] - y[b - 1]) if y[b] <= level else float(b)
    return xb - xa


MERGE_WIDTH_FACTOR = 1.12


def find_peaks_detailed(signal, threshold_fraction=0.5, fwhm_samples=None, smooth=True):
    """Locate peaks in a sampled transmission signal.

    Samples above ``threshold_fraction`` of the signal range form candidate
    regions; the largest sample of each region is refined by a 3-point
    parabola. With ``smooth`` and a known ``fwhm_samples`` the signal is
    first correlated with a Lorentzian of that width (a matched filter), which
    averages the noise down without shifting a symmetric peak.
    """
    if not 0.0 < threshold_fraction < 1.0:
        raise DomainError("threshold_fraction must lie in (0, 1)")
    y = np.asarray(signal, dtype=float)
    if y.size < 3:
        raise DetectionError("trace is too short for peak detection")
    if smooth and fwhm_samples:
        y = np.convolve(y, _lorentz_kernel(fwhm_samples), mode="same")
    lo, hi = float(y.min()), float(y.max())
    if not hi > lo:
        raise DetectionError("flat trace, no peaks")
    thr = lo + threshold_fraction * (hi - lo)
    starts, stops = _runs(y > thr)
    peaks = []
    for a, b in zip(starts, stops):
        if b - a < 2:
            continue  # single noise spike
        i = a + int(np.argmax(y[a:b]))
        if i == 0 or i == y.size - 1:
            continue  # cut by the scan edge; position unreliable
        ym, y0, yp = y[i - 1], y[i], y[i + 1]
        if not (y0 >= ym and y0 >= yp):
            continue
        den = ym - 2.0 * y0 + yp
        off = 0.5 * (ym - yp) / den if den < 0 else 0.0
        peaks.append(PeakInfo(i + off, y0, _half_max_width(y, i, lo), False))
    if not peaks:
        raise DetectionError("no peaks above threshold")
    if fwhm_samples:
        # a single Lorentzian keeps its fwhm (doubled by the matched filter); two
        # resonances closer than ~0.55 fwhm are indistinguishable from one
        expect = fwhm_samples * (2.0 if smooth else 1.0)
        peaks = [replace(p, merged=p.width > MERGE_WIDTH_FACTOR * expect) for p in peaks]
    return peaks


def detect_peaks(trace, threshold_fraction=0.5, channel="reference", on_merged="warn", smooth=True):
    """Sub-sample peak positions (strictly increasing) on one channel of a scan.

    ``trace`` may be a :class:`ScanTrace` (``channel`` picks reference,
    transfer or summed) or a bare array. Peaks that look like two unresolved
    resonances are flagged; ``on_merged`` is "warn", "error" or "ignore".
    """
    if isinstance(trace, ScanTrace):
        signal = getattr(trace, channel)
        fwhm = trace.fwhm_samples
    else:
        signal, fwhm = trace, None
    peaks = find_peaks_detailed(signal, threshold_fraction, fwhm, smooth)
    merged = [p.position for p in peaks if p.merged]
    if merged:
        msg = f"unresolved double peak near sample(s) {', '.join(f'{m:.1f}' for m in merged)}"
        if on_merged == "error":
            raise DetectionError(msg)
        if on_merged == "warn":
            warnings.warn(msg, MergedPeakWarning, stacklevel=2)
    return np.array([p.position for p in peaks])


def ratio_error(t1, t2, t3, setpoint):
    """(t3 - t1)/(t2 - t1) - setpoint; invariant under t -> alpha*t + beta."""
    if t2 == t1:
        raise DegenerateInputError("reference peaks coincide; ratio undefined")
    if t2 < t1:
        raise DomainError("reference peaks must satisfy t1 < t2")
    return (t3 - t1) / (t2 - t1) - setpoint


@dataclass(frozen=True)
class LockGains:
    cavity_kp: float = 0.5
    cavity_ki: float = 0.1
    laser_kp: float = 0.5
    laser_ki: float = 0.1
    laser_limit: float = 500e6  # Hz, laser tuning range (actuator saturation)
    cavity_limit: float = 10e9  # Hz-equivalent
    settling_scans: int = 20

    def __post_init__(self):
        for kp, ki in ((self.cavity_kp, self.cavity_ki), (self.laser_kp, self.laser_ki)):
            if kp < 0 or ki < 0:
                raise DomainError("gains must be non-negative")
        if not (self.laser_limit > 0 and self.cavity_limit > 0):
            raise DomainError("actuator limits must be positive")


@dataclass
class LockState:
    ratio_setpoint: float
    reference_position: float  # stored sample position of the first reference peak
    transfer_position: float  # last tracked transfer peak
    laser_output: float = 0.0  # Hz
    cavity_output: float = 0.0  # Hz-equivalent
    laser_integral: float = 0.0
    cavity_integral: float = 0.0
    laser_clamped: bool = False
    cavity_clamped: bool = False
    lock_ok: bool = True
    last_ratio: float = float("nan")
    last_errors: tuple = (0.0, 0.0)  # (ratio error, cavity error in samples)
    history: list = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 < self.ratio_setpoint < 1.0:
            raise DomainError("ratio setpoint must lie in (0, 1)")


def _first_peaks(ref, tr, margin):
    inner = ref[ref > margin]
    if inner.size < 2:
        raise DetectionError("need two reference peaks away from the scan edge")
    t1, t2 = inner[0], inner[1]
    after = tr[tr > t1]
    if after.size == 0:
        raise DetectionError("no transfer peak after the first reference peak")
    return t1, t2, after[0]


def acquire_lock(trace, setpoint=None, threshold_fraction=0.5):
    """Initial lock state from one scan: store the first reference peak and b/a."""
    ref = detect_peaks(trace, threshold_fraction, "reference")
    tr = detect_peaks(trace, threshold_fraction, "transfer")
    t1, t2, t3 = _first_peaks(ref, tr, 2 * trace.fwhm_samples)
    r = (t3 - t1) / (t2 - t1)
    state = LockState(r if setpoint is None else float(setpoint), t1, t3)
    state.last_ratio = r
    state.last_errors = (r - state.ratio_setpoint, 0.0)
    return state


def _pi_update(u, integral, e, kp, ki, scale, limit):
    new_int = integral + e
    u_new = u - (kp * e + ki * new_int) * scale
    if abs(u_new) > limit:
        # conditional integration: freeze the integrator while saturated
        return math.copysign(limit, u_new), integral, True
    return u_new, new_int, False


def step_lock(state, trace, gains, cfg, threshold_fraction=0.5, capture=None):
    """Run both loops on one scan and return the updated state.

    On detection failure, or if the tracked peaks jumped further than
    ``capture`` samples (default fsr/4), outputs are held and ``lock_ok`` is
    cleared for this scan.
    """
    capture = cfg.fsr_samples / 4 if capture is None else capture
    st = replace(state, history=state.history)
    try:
        ref = detect_peaks(trace, threshold_fraction, "reference", on_merged="ignore")
        tr = detect_peaks(trace, threshold_fraction, "transfer", on_merged="ignore")
        i1 = int(np.argmin(np.abs(ref - st.reference_position)))
        t1 = ref[i1]
        if i1 + 1 < ref.size:
            a = ref[i1 + 1] - t1
        elif i1 > 0:
            a = t1 - ref[i1 - 1]
        else:
            raise DetectionError("only one reference peak in the scan")
        t3 = tr[int(np.argmin(np.abs(tr - st.transfer_position)))]
        if abs(t1 - st.reference_position) > capture or abs(t3 - st.transfer_position) > capture:
            raise DetectionError("peak jumped beyond the capture range")
    except DetectionError:
        st.lock_ok = False
        st.history.append(st.last_errors + (False,))
        return st

    e_r = ratio_error(t1, t1 + a, t3, st.ratio_setpoint)
    e_c = t1 - st.reference_position
    st.cavity_output, st.cavity_integral, st.cavity_clamped = _pi_update(
        st.cavity_output, st.cavity_integral, e_c, gains.cavity_kp, gains.cavity_ki,
        cfg.sample_spacing, gains.cavity_limit)
    st.laser_output, st.laser_integral, st.laser_clamped = _pi_update(
        st.laser_output, st.laser_integral, e_r, gains.laser_kp, gains.laser_ki,
        cfg.fsr, gains.laser_limit)
    st.transfer_position = t3
    st.last_ratio = e_r + st.ratio_setpoint
    st.last_errors = (e_r, e_c)
    st.lock_ok = True
    st.history.append((e_r, e_c, True))
    return st


def wavemeter_lock(measured_wavelength, target_wavelength, gain=1.0):
    """Proportional correction gain*(f_target - f_measured) in Hz."""
    if not (measured_wavelength > 0 and target_wavelength > 0):
        raise DomainError("wavelengths must be positive")
    return gain * (C_LIGHT / target_wavelength - C_LIGHT / measured_wavelength)


def simulate_wavemeter_lock(target_wavelength, gain=0.5, n_steps=2000, drift_per_step=1e6,
                            resolution=60e6, noise=0.0, seed=0):
    """Laser frequency error (Hz) under a wavemeter lock with a quantised readout.

    Each update the laser drifts by ``drift_per_step`` (plus optional white
    frequency noise), the wavemeter reports the frequency rounded to
    ``resolution`` and the correction from :func:`wavemeter_lock` is added.
    """
    if not 0.0 < gain < 2.0:
        raise DomainError("wavemeter lock gain must lie in (0, 2) for stability")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    f_target = C_LIGHT / target_wavelength
    f = f_target
    err = np.empty(n_steps)
    for k in range(n_steps):
        f += drift_per_step + (noise * rng.standard_normal() if noise > 0 else 0.0)
        f_meas = f_target + resolution * round((f - f_target) / resolution)
        f += wavemeter_lock(C_LIGHT / f_meas, target_wavelength, gain)
        err[k] = f - f_target
    return err


@dataclass(frozen=True)
class Scenario:
    cavity: CavityConfig = CavityConfig()
    gains: LockGains = LockGains()
    n_scans: int = 500
    seed: int = 0
    noise_rms: float = 0.0
    cavity_drift_rate: float = 0.0  # Hz/s, common-mode length drift
    cavity_steps: tuple = ()  # ((scan, Hz), ...)
    laser_drift_rate: float = 0.0  # Hz/s, free-running laser drift
    laser_steps: tuple = ()
    reference_jitter: float = 0.0  # Hz rms, reference laser frequency noise
    reference_offset: float = 300e6
    transfer_offset: float = 450e6
    setpoint: float = None
    threshold_fraction: float = 0.5

    def __post_init__(self):
        if self.n_scans < 1:
            raise DomainError("n_scans must be >= 1")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        cav = CavityConfig(**d.pop("cavity", {}))
        gains = LockGains(**d.pop("gains", {}))
        for key in ("cavity_steps", "laser_steps"):
            if key in d:
                d[key] = tuple(tuple(x) for x in d[key])
        return cls(cavity=cav, gains=gains, **d)

    def to_dict(self):
        return asdict(self)

    def cavity_drift(self, k):
        t = k / self.cavity.scan_rate
        return self.cavity_drift_rate * t + sum(h for s, h in self.cavity_steps if k >= s)

    def laser_drift(self, k):
        t = k / self.cavity.scan_rate
        return self.laser_drift_rate * t + sum(h for s, h in self.laser_steps if k >= s)


@dataclass
class LockRun:
    scan_index: np.ndarray
    ratio: np.ndarray
    laser_error_Hz: np.ndarray  # (ratio - setpoint) * fsr, what the loop sees
    true_laser_error_Hz: np.ndarray  # actual optical offset from the locked frequency
    cavity_error_samples: np.ndarray
    lock_ok: np.ndarray
    laser_output_Hz: np.ndarray
    cavity_output_Hz: np.ndarray
    scenario: Scenario

    @property
    def lock_lost_events(self):
        return np.flatnonzero(~self.lock_ok)

    COLUMNS = ("scan_index", "ratio", "laser_error_Hz", "cavity_error_samples", "lock_ok",
               "true_laser_error_Hz", "laser_output_Hz", "cavity_output_Hz")

    def columns(self):
        return {name: getattr(self, name) for name in self.COLUMNS}


def run_lock_sim(scenario):
    """Simulate ``n_scans`` scans. Scan 0 acquires the lock; later scans run the loops."""
    sc = scenario
    cfg = sc.cavity
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(sc.seed))))
    n = sc.n_scans
    out = {name: np.zeros(n) for name in ("ratio", "lerr", "terr", "cerr", "lout", "cout")}
    ok = np.ones(n, dtype=bool)
    state = None
    target = 0.0
    for k in range(n):
        jitter = sc.reference_jitter * rng.standard_normal() if sc.reference_jitter > 0 else 0.0
        drift = sc.cavity_drift(k) + (state.cavity_output if state else 0.0)
        laser = sc.laser_drift(k) + (state.laser_output if state else 0.0)
        # reference jitter moves the reference comb but not the transfer peaks
        trace = synthesize_trace(cfg, laser - jitter, drift + jitter, sc.noise_rms, rng,
                                 sc.reference_offset, sc.transfer_offset)
        if state is None:
            state = acquire_lock(trace, sc.setpoint, sc.threshold_fraction)
            # the optical frequency that realises the setpoint, for the truth column
            target = laser + (state.ratio_setpoint - state.last_ratio) * cfg.fsr
        else:
            state = step_lock(state, trace, sc.gains, cfg, sc.threshold_fraction)
        e_r, e_c = state.last_errors
        out["ratio"][k] = state.last_ratio
        out["lerr"][k] = e_r * cfg.fsr
        out["terr"][k] = laser - target
        out["cerr"][k] = e_c
        out["lout"][k] = state.laser_output
        out["cout"][k] = state.cavity_output
        ok[k] = state.lock_ok
    return LockRun(np.arange(n), out["ratio"], out["lerr"], out["terr"], out["cerr"], ok,
                   out["lout"], out["cout"], sc)
