"""Interactive force estimation by sliding-mode output injection.

Pipeline: a super-twisting exact differentiator recovers the velocity
from a noisy displacement measurement; the equivalent output injection
exposes the matched disturbance; a lead-lag inverse-coupling filter
reshapes it into the interactive force.  A synthetic Coulomb-friction
plant and two identification procedures round out the toolkit.
"""

from .signals import (LeadLagShaper, RationalTF, SamplingConfig, TimeSeries,
                      freq_response, read_channels_csv, shaper_to_tf,
                      write_channels_csv)
from .sta import (StaGains, StaState, detect_convergence, differentiate, eoi,
                  fir_lowpass, gains_from_L, sta_step)
from .shaping import (DiscreteFilter, apply_filter, discretize,
                      filter_config_from_json, filter_config_to_json,
                      invert_shaper)
from .plant import (Dataset, LoadProfile, PlantParams, TrackingControl,
                    STAND_GAMMA, STAND_M, coulomb, coupled_disturbance,
                    generate_load, nominal_accel, stand_coupling, stand_g_tf,
                    simulate, simulate_tracking)
from .identify import (EstimatorConfig, FitReport, estimate_force,
                       estimate_noise_std, identify_L,
                       identify_shaper_friction)

__version__ = "0.1.0"
