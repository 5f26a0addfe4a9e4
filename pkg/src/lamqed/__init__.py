"""lamqed: dressed-state reflection, down-conversion, and calibration
toolkit for a driven qubit-resonator lambda system."""

from .version import __version__

from .system import (BareParams, RenormalizedParams, DampingRates, DriveSpec,
                     ProbeSpec, renormalize, nesting_margin, is_nested,
                     rotating_hamiltonian, default_bare_params,
                     default_damping_rates)
from .dressed import (DressedBasis, RateTable, diagonalize,
                      transition_frequencies, lab_frame_frequencies,
                      decay_rates, track_labels, apply_label_order)
from .errors import (LamqedError, ConfigError, DataFormatError, DomainError,
                     NumericalError, ConvergenceError, MatchingError)
from .steady import (CoefficientTensors, HarmonicState, OperatingPoint,
                     SweepResult, build_coefficients, solve_harmonics,
                     reflection, operating_point, reflection_at,
                     sweep_reflection)
from .spectrum import (CorrelatorSet, SpectrumTrace, evolve_correlators,
                       regression_spectrum, conversion_efficiency,
                       default_spectrum_grid, spectrum_at)
from .matching import (MatchPoint, LevelDiagram, find_balanced_drive,
                       find_dip, level_diagram_sweep)
from .lsq import FitResult, least_squares
from .calibration import (J1_FIRST_ZERO, V_P_DEFAULT, NetworkModel,
                          BackboneCurve, CalibDataset, CalibFit, bessel_j1,
                          josephson_inductance, abcd_chain, s11,
                          drive_and_power, resonance_frequency,
                          backbone_curve, model_resonances, fit_calibration)
from .jpa import (JpaModel, LorentzianSignal, MeasuredEfficiency,
                  lorentzian_from_power, jpa_output, fit_jpa_spectrum,
                  measured_efficiency)
from .config import RunConfig, parse_config
from .csvio import read_csv, write_csv, write_report

__all__ = [name for name in dir() if not name.startswith("_")]
