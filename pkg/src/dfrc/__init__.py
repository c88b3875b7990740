"""Transmit and receive beamforming for MIMO dual-function radar-communication
downlinks whose transmit covariance is fixed by the radar (``F F^H = R_des``).
"""
from .baselines import cholesky_beamformer, run_mmse_filter
from .beampattern import (BeampatternSpec, CovarianceSpec, design_covariance,
                          evaluate_beampattern, ideal_pattern, make_covariance_spec)
from .errors import (ConfigError, DfrcError, IllConditionedWeightError, InvalidAngleError,
                     InvalidInputError, NotPositiveDefiniteError, NumericalConsistencyError)
from .linalg import cholesky_lower, eig_herm_desc, svd_desc
from .manifold import ManifoldOptions, run_manifold_descent
from .scenario import ChannelSet, SystemConfig, sample_channels, steering_vector
from .single_user import achievable_rate, mmse_receiver, solve_single_user
from .wmmse import BcdOptions, BeamformerSolution, run_bcd, weighted_sum_rate

__version__ = "0.1.0"
