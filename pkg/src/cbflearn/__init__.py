"""Episodic learning of control barrier function dynamics on a simulated Segway."""

from .barrier import (ClassKFunction, HdotAffine, PitchEllipseBarrier, PitchRateBarrier,
                      grad_h, hdot_nominal_affine, make_barrier)
from .campaign import run_campaign
from .config import CampaignConfig, load_config, parse_config, shipped_config_path
from .controller import (CBFQP, LCBFQP, FilterResult, HalfspaceQP, PDGains, blend,
                         cbf_qp_controller, lcbf_qp_controller, pd_control, solve_halfspace_qp)
from .dynamics import (SegwayParams, Trajectory, eval_dynamics, integrate_step, perturb_params,
                       residual_oracle, simulate)
from .episodic import EpisodeConfig, X0Box, linear_trust_schedule, run_dacbarf, sample_x0
from .kernels import BACKEND
from .learning import (Dataset, MLPRegressor, ResidualEstimator, TrainConfig, build_dataset,
                       differentiate_history, erm_train, estimator_eval)

__version__ = "0.1.0"
