"""Random circuit sampling: circuits, simulation, noise models and fidelity estimators."""
from .calibration import (CalibrationMap, FitResult, apply_calibration, coupler_circuit, fit_two_gate,
                          identity_calibration, random_miscalibration)
from .circuits import (Circuit, Cut, FSimGate, GridQubit, Moment, OneQubitGate, Pattern, RzGate, Variant,
                       default_cut, derive_elided, derive_patch, generate_random_circuit)
from .errors import (AlignmentError, CapacityError, ParseError, RCSError, UsageError, ValidationError)
from .estimators import (FidelityReport, empirical_model_distance, f_xeb, fidelity_report, formula77,
                         formula77_averaged, ideal_xeb, porter_thomas_check)
from .noise import (ComponentErrorRates, apply_readout_errors, pauli_trajectory_sample, sample_noise_model,
                    uniform_rates)
from .samples import SampleSet
from .simulator import (AmplitudeTable, FactorizedTable, exact_sample, probabilities, simulate,
                        simulate_patch_factored)
from .spectral import LevelSpectrum, fit_secondary_fidelity, fwht, level_fidelity, readout_decay_curve

__version__ = "0.1.0"
