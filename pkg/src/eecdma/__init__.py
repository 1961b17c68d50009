"""Energy-efficient cross-layer resource allocation for CDMA uplinks."""

from .channel import (ChannelModel, Realization, cdf_sq_gain, inv_cdf_sq_gain,
                      sample, sampled_gain_quantile, sorted_gain_quantiles)
from .games import (GameConfig, GameVariant, MultiCellState, power_control_step,
                    run_game, run_game_multicell, target_sinr,
                    unilateral_power_probe)
from .lsa import (InfeasibleLoadError, LsaInputs, LsaPrediction,
                  asymptotic_sinr, distributed_power, equal_power_pc,
                  estimate_u2, profile_mmse, profile_orthogonal, profile_wbe,
                  social_optimum_sinr, solve_receive_power)
from .model import (GameOutcome, NetworkState, SystemConfig, covariance,
                    efficiency, mmse_receiver, mse, packet_success, sinr,
                    sinr_mmse, utility)
from .tmse_opt import (TmseConfig, TmseResult, code_update, mu_search,
                       optimize, receiver_sweep, tmse)

__version__ = "0.1.0"
