"""Constant off-time peak current-mode control with a low-pass filtered
current sense: exact cycle map, small-signal model, continuity and
large-signal stability criteria, switching simulation and region sweeps.
"""

from .params import (ConfigError, ConverterParams, FilterSpec,
                     InterferenceSpec, NormalizedParams, ParameterError,
                     PhaseMode, SimSettings, SineComponent, denormalize,
                     dump_config, load_config, normalize)
from .cycle_map import (ContinuityResult, CycleState, NoCrossingError,
                        OnTimeSolution, OperatingPoint, advance_cycle,
                        continuity_check, equilibrium, filter_output,
                        solve_on_time)
from .criteria import (StabilityReport, proof_internals, theorem1_margin,
                       theorem2_coefficients, theorem2_margin)
from .linearization import (LinearizedModel, fd_jacobian, linearize,
                            root_locus, unfiltered_root_locus)
from .switching_sim import (StabilityVerdict, Trajectory, Waveform,
                            classify_stability, compare_waveforms, ie_step,
                            simulate, simulate_unfiltered, xi_eval, xi_prime)
from .sweep import AxisSpec, SweepPoint, SweepResult, sweep

__version__ = "0.1.0"
