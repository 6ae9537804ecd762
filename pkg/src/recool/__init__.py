"""Doppler recooling thermometry of a trapped ion, with the lab tooling around it:
transition data, trap and resonator relations, and laser lock simulation."""

from .errors import (ConfigError, DegenerateInputError, DetectionError, DomainError, LookupFailure,
                     MissingFileError, NumericalError, ParseError, RecoolError, RegimeError, UsageError)
from .fitting import (FitOptions, FitResult, HeatingSeries, PowerLawFit, extrapolate_se,
                      fit_initial_energy, fit_power_law, heating_from_se, heating_rate_from_series,
                      se_from_heating)
from .model import (Bins, EnergyDistribution, RecoolParams, avg_scatter_hot, avg_scatter_overlap,
                    boltzmann_density, doppler_density, doppler_limit_energy, energy_trajectory,
                    expected_fluorescence)
from .montecarlo import (FluorescenceTrace, McConfig, run_experiment, sample_initial_energy,
                         simulate_recool_trace, simulate_repetitions)
from .physics import (SPECIES, IonSpecies, LaserBeam, TrapFrequencies, default_beam, doppler_shift,
                      get_species, max_doppler, quanta_from_energy, scatter_rate_instant, wavevector)
from .transitions import TransitionRecord, lookup_transition

__version__ = "0.1.0"
