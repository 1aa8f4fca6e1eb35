"""
Simulation and analysis tools for NV-ensemble spin control with a tuneable
dielectric microwave resonator.

Modules
-------
spin       spin-1 Hamiltonian, transition tables, Rabi formula, lab-frame evolution
fields     focused excitation beam, B1 sources and the field-grid file format
ensemble   ensemble/volume-averaged Rabi signals and simulated sweeps
resonator  resonator response, enhancement, calibration tables, tuning loop
fitting    model fits with global search + local refinement and 95% CIs
budget     microwave loss chain and power-to-field conversion
cli        configuration-driven experiment runner
"""
__version__ = "0.1.0"

from .errors import OutOfRangeError
from .spin import (GAMMA_E, HYPERFINE_14N, NV_ORIENTATIONS, TETRAHEDRAL_ANGLE, ZERO_FIELD_SPLITTING,
                   NVOrientation, RabiTrace, SpinParams, effective_drive_frequency,
                   evolve_numerical, hamiltonian_eigenfrequencies, rabi_population,
                   transition_table)
from .fields import (BeamModel, FieldGrid, ParametricB1, b1_at, beam_waist, laser_intensity,
                     load_field_grid, save_field_grid, spot_radius)
from .resonator import (CHEVRON_ENHANCEMENT, CHEVRON_RESONATOR, ControllerState, ResonatorState,
                        ThermalPlant, compensated_gain, controller_step, duty_cycle_compensation, enhancement_factor, loaded_q,
                        s11_response, simulate_tuning_loop)
from .fitting import (FitResult, fit_decaying_sinusoid, fit_hahn_echo, fit_lorentzian,
                      fit_s11_resonance, fit_sqrt_power_line, global_then_local, lorentzian)
from .budget import (LossChain, MEASURED_LOSS_CHAIN, chain_gain, conversion_pipeline,
                     power_at_antenna)
from .ensemble import (EnsembleParams, SaturationParams, SweepResult, calibrate_odmr_saturation,
                       chevron_quality_factor, simulate_chevron, simulate_odmr_map,
                       simulate_position_sweep, simulate_power_sweep, total_rabi_signal)
