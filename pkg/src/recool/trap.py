"""Instrument relations for the RF resonator and the Paul trap.

The resonator obeys V = kappa * sqrt(P * Q) with P in watts and V in volts;
kappa is stored as a bare number in that convention. Secular frequencies are
related to the Mathieu q parameter only to lowest order, so
:func:`mathieu_q_from_secular` is an estimate, not a trap solver.
"""

import math
from dataclasses import dataclass, field
from types import MappingProxyType

from .errors import DomainError
from .physics import TrapFrequencies

Q_STABILITY_LIMIT = 0.908  # edge of the first Mathieu stability region (a = 0)
COUPLING_THRESHOLD = 0.95


@dataclass(frozen=True)
class ResonatorSpec:
    quality_factor: float
    geometric_factor: float  # kappa, V / sqrt(W)
    resonant_frequency: float = float("nan")  # Hz

    def __post_init__(self):
        if not self.quality_factor > 0:
            raise DomainError("resonator Q must be positive")
        if not self.geometric_factor > 0:
            raise DomainError("resonator kappa must be positive")


@dataclass(frozen=True)
class TrapOperatingPoint:
    electrode_voltages: dict
    rf_amplitude: float  # V
    drive_omega: float  # rad/s
    secular: TrapFrequencies = None

    def __post_init__(self):
        if not self.rf_amplitude >= 0:
            raise DomainError("rf_amplitude must be non-negative")
        object.__setattr__(self, "electrode_voltages", MappingProxyType(dict(self.electrode_voltages)))


def resonator_voltage(power, spec):
    """RF amplitude delivered to the electrodes for input power ``power`` (W)."""
    if power < 0:
        raise DomainError(f"power must be non-negative, got {power!r}")
    return spec.geometric_factor * math.sqrt(power * spec.quality_factor)


def resonator_power(voltage, spec):
    if voltage < 0:
        raise DomainError(f"voltage must be non-negative, got {voltage!r}")
    return (voltage / spec.geometric_factor) ** 2 / spec.quality_factor


@dataclass(frozen=True)
class CouplingCheck:
    fraction: float
    threshold: float

    @property
    def ok(self):
        return self.fraction >= self.threshold - 1e-12

    def __iter__(self):
        return iter((self.fraction, self.ok))


def coupling_fraction(p_forward, p_reflected, threshold=COUPLING_THRESHOLD):
    """Fraction of forward power coupled into the resonator, with a pass flag.

    The threshold is inclusive. A small tolerance absorbs the rounding in
    e.g. 1 - 0.5/10.
    """
    if not p_forward > 0:
        raise DomainError("forward power must be positive")
    if p_reflected < 0:
        raise DomainError("reflected power must be non-negative")
    if p_reflected > p_forward:
        raise DomainError(f"reflected power {p_reflected} W exceeds forward power {p_forward} W")
    return CouplingCheck(1.0 - p_reflected / p_forward, threshold)


@dataclass(frozen=True)
class MathieuEstimate:
    q: float

    @property
    def stable(self):
        return self.q < Q_STABILITY_LIMIT

    def __iter__(self):
        return iter((self.q, self.stable))


def mathieu_q_from_secular(omega_r, drive_omega):
    """Lowest-order q from a radial secular frequency: q = 2*sqrt(2)*omega_r/Omega."""
    if not drive_omega > 0:
        raise DomainError("drive frequency must be positive")
    if not omega_r > 0:
        raise DomainError("secular frequency must be positive")
    if omega_r >= drive_omega / 2:
        raise DomainError(
            f"secular frequency {omega_r:.6g} rad/s is not below half the drive {drive_omega / 2:.6g} rad/s"
        )
    return MathieuEstimate(2.0 * math.sqrt(2.0) * omega_r / drive_omega)


def secular_from_q(q, drive_omega):
    if not q >= 0:
        raise DomainError("q must be non-negative")
    return q * drive_omega / (2.0 * math.sqrt(2.0))


@dataclass(frozen=True)
class Measured:
    value: float
    uncertainty: float
    unit: str = ""


@dataclass(frozen=True)
class ResonatorFixture:
    f0: float  # MHz
    f0_err: float
    Q: float
    Q_err: float
    kappa: float
    kappa_err: float
    dimensions: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))

    def spec(self):
        return ResonatorSpec(self.Q, self.kappa, self.f0 * 1e6)


@dataclass(frozen=True)
class Fixtures:
    resonator: ResonatorFixture
    table2: MappingProxyType  # electrode -> V
    table2_uncertainty: MappingProxyType
    secular_MHz: tuple
    secular_err_MHz: float
    drive_MHz: float
    trap_depth: float  # eV
    trap_depth_err: float
    ion_electrode_spacing_um: Measured
    electrode_separation_um: MappingProxyType


_RESONATOR_DIMENSIONS = {
    "shield_diameter_mm": Measured(76, 1, "mm"),
    "shield_length_mm": Measured(103, 1, "mm"),
    "coil_diameter_mm": Measured(52, 3, "mm"),
    "coil_length_mm": Measured(63, 5, "mm"),
    "coil_wire_diameter_mm": Measured(3.14, 0.03, "mm"),
    "winding_pitch_mm": Measured(6, 2, "mm"),
    "turns": Measured(9.50, 0.25, ""),
}

_VOLTAGES = {
    "1": 148.88, "2": 7.36, "3": 25.03, "4": 0.00, "5": 0.00, "6": 167.76,
    "compensation 1": 169.22, "compensation 2": 169.22, "compensation 3": -2.70,
    "RF": 680.0,
}


def fixtures():
    """Reference values of the trap and resonator, with uncertainties. Data only."""
    err = {k: 0.01 for k in _VOLTAGES}
    err["RF"] = 10.0
    return Fixtures(
        resonator=ResonatorFixture(21.5, 0.1, 200.0, 20.0, 24.0, 8.0, MappingProxyType(dict(_RESONATOR_DIMENSIONS))),
        table2=MappingProxyType(dict(_VOLTAGES)),
        table2_uncertainty=MappingProxyType(err),
        secular_MHz=(2.069, 2.110, 1.030),
        secular_err_MHz=0.001,
        drive_MHz=21.48,
        trap_depth=4.9,
        trap_depth_err=0.2,
        ion_electrode_spacing_um=Measured(310, 10, "um"),
        electrode_separation_um=MappingProxyType({"x": Measured(343, 14, "um"), "y": Measured(554, 14, "um")}),
    )


def operating_point():
    """The reported operating point as a :class:`TrapOperatingPoint`."""
    fx = fixtures()
    f = [v * 1e6 for v in fx.secular_MHz]
    volts = {k: v for k, v in fx.table2.items() if k != "RF"}
    return TrapOperatingPoint(
        volts, fx.table2["RF"], 2 * math.pi * fx.drive_MHz * 1e6,
        TrapFrequencies.from_hz(f[0], f[1], f[2], fx.drive_MHz * 1e6),
    )
