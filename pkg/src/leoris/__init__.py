"""Active-RIS assisted NLoS LEO downlink: simulator and three-timescale optimizer."""

from .geometry import (SceneConfig, SlotGeometry, propagate_orbit, slot_geometry,
                       is_blocked, radiation_pattern, vec3, unit)
from .channels import (FadingParams, ChannelRealization, path_loss,
                       sample_rain_attenuation, gen_sat_ris_channel,
                       gen_ris_user_channel, realize_slot, slot_rng)
from .link import (LinkParams, LinkConstants, RisState, SolutionBundle,
                   link_constants, passive_constants, snr, instantaneous_rate,
                   average_rate, total_energy)
from .sdp import (SdpProblem, SdpSolution, LinearConstraint, solve_sdp,
                  hermitian_eig, complex_to_real_embed, nuclear_norm,
                  spectral_norm, SENSE_LE, SENSE_EQ, SENSE_GE)
from .scenario import Scenario, build_scenario
from .optimizer import (AoReport, FpAuxiliaries, OptimizerConfig, PenaltyState,
                        alternating_optimize, build_ris_sdp,
                        build_orientation_sdp, fp_update_aux, initial_state,
                        optimize_ris_beamforming, optimize_orientation,
                        optimize_transmit_bf, recover_direction,
                        recover_rank_one, sdr_gr_baseline)
from .experiment import (ExperimentSpec, CandidateRecord, BudgetInfeasibleError,
                         optimal_holding_interval, run_experiment,
                         default_energy_budget, binding_energy_budget)
from .config import ConfigError, load_config

__version__ = "0.1.0"
