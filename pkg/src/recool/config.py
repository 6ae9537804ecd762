"""Run configuration: a YAML file validated against a JSON schema.

Unknown keys are rejected at every level. Command-line flags override file
values after validation. Frequencies in the file are ordinary Hz; they are
converted to rad/s when the objects are built.
"""

import copy
import re
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import yaml

from .errors import ConfigError
from .fitting import FitOptions
from .lock import Scenario
from .model import DIST_KINDS, EnergyDistribution, RecoolParams, doppler_limit_energy
from .montecarlo import McConfig
from .physics import DEFAULT_SPECIES, HBAR, angular, default_beam, get_species, load_species_table

SCHEMA_VERSION = 1

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


SCHEMA = _obj({
    "schema_version": {"const": SCHEMA_VERSION},
    "species": {"type": "string"},
    "species_file": {"type": "string"},
    "seed": {"type": "integer", "minimum": 0},
    "out": {"type": "string"},
    "format": {"enum": ["csv", "json"]},
    "svg": {"type": "boolean"},
    "beam": _obj({
        "detuning_Hz": _num,
        "saturation": _nonneg,
        "linewidth_Hz": _pos,
        "kz_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "cooling_efficiency": _pos,
    }),
    "trap": _obj({
        "axial_frequency_Hz": _pos,
        "frequencies_Hz": {"type": "array", "items": _pos, "minItems": 1},
    }),
    "mc": _obj({
        "repetitions": {"type": "integer", "minimum": 1},
        "bin_width_s": _pos,
        "duration_s": _pos,
        "efficiency": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "full_phase": {"type": "boolean"},
        "heating_during_cooling": {"type": "boolean"},
        "baseline": _obj({
            "kind": {"enum": list(DIST_KINDS)},
            "mean_quanta": _pos,
        }),
    }),
    "experiment": _obj({
        "delays_s": {"type": "array", "items": _nonneg, "minItems": 1},
        "ndot_quanta_s": _nonneg,
        "ndot_reference": _obj({
            "ndot_quanta_s": _pos,
            "frequency_Hz": _pos,
            "exponent": _num,
        }, required=("ndot_quanta_s", "frequency_Hz")),
    }),
    "fit": _obj({
        "amplitude": {"type": "boolean"},
        "background": {"type": "boolean"},
        "dist_kind": {"enum": list(DIST_KINDS)},
        "bootstrap": {"type": "integer", "minimum": 0},
        "points_per_bin": {"type": "integer", "minimum": 1},
        "max_iter": {"type": "integer", "minimum": 1},
    }),
    "noise_density": _obj({
        "target_frequency_Hz": _pos,
        "ndot_scaling_exponent": _num,
    }),
    "scaling": _obj({"fixed_exponent": _num}),
    "lock": {"type": "object"},  # checked by building the Scenario
    "resonator": _obj({
        "Q": _pos,
        "kappa": _pos,
        "power_W": _nonneg,
        "voltage_V": _nonneg,
        "forward_W": _pos,
        "reflected_W": _nonneg,
        "coupling_threshold": {"type": "number", "minimum": 0, "maximum": 1},
    }),
    "inputs": _obj({
        "traces": {"type": "array", "items": {"type": "string"}},
        "series": {"type": "string"},
        "points": {"type": "string"},
    }),
})

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "species": DEFAULT_SPECIES,
    "seed": 0,
    "format": "csv",
    "svg": False,
    "beam": {"detuning_Hz": -6e6, "saturation": 1.0, "linewidth_Hz": 40e6, "kz_fraction": 0.45,
             "cooling_efficiency": 1.0},
    "trap": {"axial_frequency_Hz": 178e3},
    "mc": {"repetitions": 500, "bin_width_s": 50e-6, "duration_s": 4e-3, "efficiency": 0.002,
           "full_phase": False, "heating_during_cooling": False, "baseline": {"kind": "chi1"}},
    "experiment": {"delays_s": [1.0, 3.0, 5.0, 7.0], "ndot_quanta_s": 38094.0},
    "fit": {"amplitude": False, "background": False, "dist_kind": "chi1", "bootstrap": 0,
            "points_per_bin": 3, "max_iter": 200},
    "noise_density": {"target_frequency_Hz": 1e6, "ndot_scaling_exponent": -2.0},
    "scaling": {},
    "lock": {},
    "resonator": {"Q": 200.0, "kappa": 24.0},
    "inputs": {},
}


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads 1e3 / 178.0e3 as floats (YAML 1.2 style)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
    |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
    |[-+]?\.(?:inf|Inf|INF)
    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate(raw):
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config {where}: {exc.message}") from None


@dataclass
class RunConfig:
    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))
    source: str = None

    @classmethod
    def from_dict(cls, raw, source=None):
        raw = {} if raw is None else raw
        if not isinstance(raw, dict):
            raise ConfigError("config file must contain a mapping at the top level")
        validate(raw)
        data = _merge(DEFAULTS, raw)
        validate(data)
        return cls(data, source)

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            raw = yaml.load(path.read_text(encoding="utf-8"), Loader=_Loader)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: YAML syntax error: {exc}") from None
        if isinstance(raw, dict) and "schema_version" not in raw:
            raise ConfigError(f"{path}: missing schema_version (expected {SCHEMA_VERSION})")
        return cls.from_dict(raw, str(path))

    def override(self, **flags):
        """Apply command-line overrides (None means "not given")."""
        d = copy.deepcopy(self.data)
        for key, value in flags.items():
            if value is not None:
                d[key] = value
        validate(d)
        return RunConfig(d, self.source)

    def __getitem__(self, key):
        return self.data[key]

    # builders

    def species_table(self):
        path = self.data.get("species_file")
        return load_species_table(path) if path else None

    def species(self):
        return get_species(self.data["species"], self.species_table())

    def params(self, axial_Hz=None):
        sp = self.species()
        b = self.data["beam"]
        beam = default_beam(sp, b["detuning_Hz"], b["saturation"], b["linewidth_Hz"], b["kz_fraction"])
        f = self.data["trap"]["axial_frequency_Hz"] if axial_Hz is None else axial_Hz
        return RecoolParams(sp, beam, angular(f), b["cooling_efficiency"])

    def trap_frequencies_Hz(self):
        t = self.data["trap"]
        return list(t.get("frequencies_Hz") or [t["axial_frequency_Hz"]])

    def mc(self, params, heating_rate=0.0):
        m = self.data["mc"]
        base = m["baseline"]
        if "mean_quanta" in base:
            dist = EnergyDistribution(base["kind"], base["mean_quanta"] * HBAR * params.omega_z)
        else:
            dist = EnergyDistribution(base["kind"], doppler_limit_energy(params))
        return McConfig(
            seed=self.data["seed"], repetitions=m["repetitions"], bin_width=m["bin_width_s"],
            duration=m["duration_s"], heating_rate=heating_rate if m["heating_during_cooling"] else 0.0,
            dist=dist, efficiency=m["efficiency"], full_phase=m["full_phase"],
        )

    def ndot_at(self, axial_Hz):
        """True heating rate used by the simulation at an axial frequency."""
        e = self.data["experiment"]
        ref = e.get("ndot_reference")
        if ref is None:
            return float(e["ndot_quanta_s"])
        p = ref.get("exponent", -2.0)
        return float(ref["ndot_quanta_s"] * (axial_Hz / ref["frequency_Hz"]) ** p)

    def fit_options(self):
        f = self.data["fit"]
        return FitOptions(amplitude=f["amplitude"], background=f["background"], dist_kind=f["dist_kind"],
                          bootstrap=f["bootstrap"], points_per_bin=f["points_per_bin"],
                          max_iter=f["max_iter"], seed=self.data["seed"])

    def scenario(self):
        d = dict(self.data["lock"])
        d.setdefault("seed", self.data["seed"])
        try:
            return Scenario.from_dict(d)
        except TypeError as exc:
            raise ConfigError(f"config lock: {exc}") from None
