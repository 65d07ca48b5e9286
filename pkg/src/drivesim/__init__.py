"""drivesim: deterministic simulator of a grid-connected back-to-back
drive whose driveshaft inertia is coupled to the grid, with two grid-side
control strategies (cascaded PI with a gradient-descent PLL, and
synchronous-machine matching) compared across fault ride-through
scenarios."""

__version__ = "0.1.0"

from ._accel import HAVE_NUMBA, USE_NUMBA
from .frames import (MOD_LIMIT, ComplexImpedance, circular_sat, clarke,
                     instantaneous_power, planar, rotate, scalar_sat)
from .plant import (DcCollapse, PlantInputs, PlantParams, PlantState,
                    derivative, five_mass_params, pcc_voltage, stored_energy,
                    torsional_frequencies, two_mass_params)
from .pll import (PllState, pll_energy, pll_gradient, pll_step_cartesian,
                  pll_step_polar)
from .cascade_control import (CascadeController, ControlGains, PiState,
                              ac_voltage_step, current_control_step,
                              current_reference, dc_as_speed, dc_reference,
                              dc_voltage_step, speed_coupling_step)
from .matching_control import (MatchingController, MatchingState,
                               matching_gradients, matching_power_reference,
                               matching_step, steady_state_current)
from .simulation import (NonFinite, ScenarioScript, SimConfig, SimTrace,
                         build_config, grid_source, rk4_generic, rk4_step,
                         run_scenario, scenario_preset)
from .analysis import (LinearModel, NoEquilibrium, frequency_response,
                       linearize, second_harmonic_rms, settling_time,
                       three_mass_equivalence_error, trace_metrics)
