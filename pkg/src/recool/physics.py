"""Physical constants, ion species data and elementary kinematics.

Conventions: frequencies are angular (rad/s) everywhere inside the package.
Quantities that users read off a spectrum analyser or a wavemeter (laser
detuning, linewidths) are stored in ordinary Hz on the dataclasses and
converted with :func:`angular` at the point of use.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.constants as sc

from .errors import DomainError, LookupFailure
from .transitions import lookup_transition

HBAR = sc.hbar
E_CHARGE = sc.e
AMU = sc.atomic_mass
M_ELECTRON = sc.m_e
C_LIGHT = sc.c
TWO_PI = 2.0 * math.pi

# Yb 2S1/2 <-> 2P1/2 natural linewidth, Gamma/2pi
YB_NATURAL_LINEWIDTH_HZ = 19.6e6

# Neutral-atom isotope masses (u), AME2020
_YB_ATOMIC_MASS_U = {
    170: 169.934767245,
    171: 170.936331517,
    172: 171.936386658,
    174: 173.938867548,
    176: 175.942574708,
}

DEFAULT_SPECIES = "174Yb+"


def angular(f_hz):
    return TWO_PI * f_hz


def hertz(omega):
    return omega / TWO_PI


@dataclass(frozen=True)
class IonSpecies:
    name: str
    mass: float  # kg
    charge: float  # C
    cooling_wavelength: float  # m, vacuum
    natural_linewidth: float  # Hz, FWHM

    def __post_init__(self):
        for attr in ("mass", "charge", "cooling_wavelength", "natural_linewidth"):
            value = getattr(self, attr)
            if not value > 0:
                raise DomainError(f"IonSpecies.{attr} must be positive, got {value!r}")

    @property
    def mass_amu(self):
        return self.mass / AMU

    def to_dict(self):
        return {
            "name": self.name,
            "mass_amu": self.mass / AMU,
            "charge_e": self.charge / E_CHARGE,
            "cooling_wavelength_nm": self.cooling_wavelength * 1e9,
            "natural_linewidth_MHz": self.natural_linewidth * 1e-6,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                name=str(d["name"]),
                mass=float(d["mass_amu"]) * AMU,
                charge=float(d["charge_e"]) * E_CHARGE,
                cooling_wavelength=float(d["cooling_wavelength_nm"]) * 1e-9,
                natural_linewidth=float(d["natural_linewidth_MHz"]) * 1e6,
            )
        except KeyError as exc:
            raise DomainError(f"species record is missing field {exc.args[0]!r}") from None


def _builtin_species():
    table = {}
    for iso, mass_u in _YB_ATOMIC_MASS_U.items():
        name = f"{iso}Yb+"
        table[name] = IonSpecies(
            name=name,
            mass=mass_u * AMU - M_ELECTRON,
            charge=E_CHARGE,
            cooling_wavelength=lookup_transition(iso, "cooling_2S12_2P12").wavelength_m,
            natural_linewidth=YB_NATURAL_LINEWIDTH_HZ,
        )
    return table


SPECIES = _builtin_species()


def load_species_table(path, base=None):
    """Read a JSON array of species records and merge it over ``base``.

    Records use the keys ``name, mass_amu, charge_e, cooling_wavelength_nm,
    natural_linewidth_MHz``. Entries whose name matches a built-in species
    replace it.
    """
    records = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(records, list):
        raise DomainError("species file must contain a JSON array")
    table = dict(SPECIES if base is None else base)
    for rec in records:
        sp = IonSpecies.from_dict(rec)
        table[sp.name] = sp
    return table


def get_species(name=DEFAULT_SPECIES, table=None):
    table = SPECIES if table is None else table
    key = str(name)
    if key not in table:
        # accept "174", "Yb174", "174yb+"
        digits = "".join(ch for ch in key if ch.isdigit())
        key = f"{digits}Yb+"
    if key not in table:
        raise LookupFailure(f"unknown species {name!r}; known: {sorted(table)}")
    return table[key]


@dataclass(frozen=True)
class LaserBeam:
    wavelength: float  # m
    detuning: float  # Hz, signed; red detuning is negative
    saturation: float
    broadened_linewidth: float  # Hz, FWHM
    kz_fraction: float = 1.0

    def __post_init__(self):
        if not self.wavelength > 0:
            raise DomainError(f"wavelength must be positive, got {self.wavelength!r}")
        if not self.saturation >= 0:
            raise DomainError(f"saturation must be >= 0, got {self.saturation!r}")
        if not self.broadened_linewidth > 0:
            raise DomainError(f"broadened linewidth must be positive, got {self.broadened_linewidth!r}")
        if not 0.0 <= self.kz_fraction <= 1.0:
            raise DomainError(f"kz_fraction must lie in [0, 1], got {self.kz_fraction!r}")

    @property
    def k(self):
        return wavevector(self.wavelength)

    @property
    def kz(self):
        return self.kz_fraction * self.k

    @property
    def detuning_angular(self):
        return angular(self.detuning)

    @property
    def hwhm_angular(self):
        """Angular half width of the broadened line, pi * L."""
        return math.pi * self.broadened_linewidth


@dataclass(frozen=True)
class TrapFrequencies:
    omega_x: float
    omega_y: float
    omega_z: float
    drive_omega: float

    def __post_init__(self):
        for attr in ("omega_x", "omega_y", "omega_z", "drive_omega"):
            if not getattr(self, attr) > 0:
                raise DomainError(f"TrapFrequencies.{attr} must be positive")
        for attr in ("omega_x", "omega_y", "omega_z"):
            if not getattr(self, attr) < self.drive_omega / 2:
                raise DomainError(f"{attr} must be below half the drive frequency")

    @classmethod
    def from_hz(cls, fx, fy, fz, drive):
        return cls(angular(fx), angular(fy), angular(fz), angular(drive))


def wavevector(wavelength):
    if not wavelength > 0:
        raise DomainError(f"wavelength must be positive, got {wavelength!r}")
    return TWO_PI / wavelength


def doppler_shift(k, v):
    """Instantaneous Doppler shift -k*v in rad/s.

    Positive ``v`` is motion along the beam; the ion then sees the laser
    red-shifted.
    """
    return -k * v


def quanta_from_energy(energy, omega_z):
    if not np.all(np.asarray(omega_z) > 0):
        raise DomainError(f"omega_z must be positive, got {omega_z!r}")
    return energy / (HBAR * omega_z)


def energy_from_quanta(n, omega_z):
    if not np.all(np.asarray(omega_z) > 0):
        raise DomainError(f"omega_z must be positive, got {omega_z!r}")
    return n * HBAR * omega_z


def max_doppler(energy, mass, k, kz_fraction=1.0):
    """Largest Doppler shift reached by a classical oscillator of energy ``energy``."""
    return kz_fraction * k * np.sqrt(2.0 * energy / mass)


def scatter_rate_instant(delta_eff, s, L):
    """Two-level scatter rate (photons/s) with the broadened FWHM ``L`` (Hz).

    ``delta_eff`` is the total angular detuning seen by the ion. The line's
    angular half width pi*L takes the place of Gamma/2 in the usual
    saturated-Lorentzian expression.
    """
    hw = math.pi * L
    x = delta_eff / hw
    return hw * s / (1.0 + s + x * x)


def recoil_energy(k, mass):
    """Kinetic energy hbar^2 k^2 / 2m of one photon recoil."""
    return (HBAR * k) ** 2 / (2.0 * mass)


def default_beam(species=None, detuning=-6e6, saturation=1.0, linewidth=40e6, kz_fraction=0.45):
    """Cooling beam with the heating-measurement settings (red detuned 6 MHz)."""
    species = SPECIES[DEFAULT_SPECIES] if species is None else species
    return LaserBeam(species.cooling_wavelength, detuning, saturation, linewidth, kz_fraction)
