"""Measured Yb transition wavelengths (vacuum) for the stable isotopes.

Values are the trapped-ion (and atomic-beam, for photoionisation) measurements
with their one-sigma uncertainties, all in nm.
"""

from dataclasses import dataclass

from .errors import LookupFailure

TRANSITIONS = ("ionization_1S0_1P1", "cooling_2S12_2P12", "repump_2D32_3D32")

ALIASES = {
    "ionization": "ionization_1S0_1P1",
    "photoionization": "ionization_1S0_1P1",
    "cooling": "cooling_2S12_2P12",
    "repump": "repump_2D32_3D32",
}

# isotope -> (ionization, cooling, repump), each (wavelength_nm, uncertainty_nm)
_TABLE = {
    170: ((398.91051, 6e-5), (369.52364, 6e-5), (935.19751, 2e-4)),
    171: ((398.91070, 6e-5), (369.52604, 6e-5), (935.18768, 2e-4)),
    172: ((398.91083, 6e-5), (369.52435, 6e-5), (935.18736, 2e-4)),
    174: ((398.91114, 6e-5), (369.52494, 6e-5), (935.17976, 2e-4)),
    176: ((398.91144, 6e-5), (369.52550, 6e-5), (935.17252, 2e-4)),
}

_NOTES = {
    "ionization_1S0_1P1": "neutral-atom line; atomic beam and laser at 63 deg, Doppler shift included",
    "cooling_2S12_2P12": "",
    "repump_2D32_3D32": "",
}

_HYPERFINE_171 = {
    "ionization_1S0_1P1": "",
    "cooling_2S12_2P12": "2S1/2(F=1) <-> 2P1/2(F=0) component",
    "repump_2D32_3D32": "2D3/2(F=1) <-> 3D[3/2]1/2(F=0) component",
}

ISOTOPES = tuple(sorted(_TABLE))


@dataclass(frozen=True)
class TransitionRecord:
    isotope: int
    transition: str
    wavelength_vacuum: float  # nm
    uncertainty: float  # nm
    notes: str = ""

    @property
    def wavelength_m(self):
        return self.wavelength_vacuum * 1e-9

    def to_dict(self):
        return {
            "isotope": self.isotope,
            "transition": self.transition,
            "wavelength_vacuum_nm": self.wavelength_vacuum,
            "uncertainty_nm": self.uncertainty,
            "notes": self.notes,
        }


def _parse_isotope(isotope):
    if isinstance(isotope, str):
        digits = "".join(ch for ch in isotope if ch.isdigit())
        if not digits:
            raise LookupFailure(f"unknown isotope {isotope!r}; valid isotopes: {list(ISOTOPES)}")
        isotope = int(digits)
    return int(isotope)


def _parse_transition(transition):
    name = ALIASES.get(transition, transition)
    if name not in TRANSITIONS:
        raise LookupFailure(
            f"unknown transition {transition!r}; valid transitions: {list(TRANSITIONS)} "
            f"(aliases: {sorted(ALIASES)})"
        )
    return name


def lookup_transition(isotope, transition):
    """Return the tabulated vacuum wavelength for ``isotope`` and ``transition``.

    ``isotope`` may be an int (174) or a label such as ``"174Yb+"``;
    ``transition`` is one of :data:`TRANSITIONS` or a short alias
    (``"cooling"``, ``"repump"``, ``"ionization"``).
    """
    iso = _parse_isotope(isotope)
    if iso not in _TABLE:
        raise LookupFailure(f"unknown isotope {isotope!r}; valid isotopes: {list(ISOTOPES)}")
    name = _parse_transition(transition)
    wavelength, sigma = _TABLE[iso][TRANSITIONS.index(name)]
    notes = _NOTES[name]
    if iso == 171 and _HYPERFINE_171[name]:
        notes = _HYPERFINE_171[name]
    return TransitionRecord(iso, name, wavelength, sigma, notes)


def all_transitions():
    return [lookup_transition(iso, name) for iso in ISOTOPES for name in TRANSITIONS]
