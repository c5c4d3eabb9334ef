"""Off-policy evaluation in finite linear MDPs.

Exact ground truth, offline data generation, the unweighted and the
variance-aware fitted-Q estimators, and the theoretical quantities that
govern their errors.
"""

from .analysis import bound_constants, dominant_terms, monte_carlo_v_features
from .estimators import (EstimatorOutput, RidgeProblem, VaParams, bellman_residual_diagnostic,
                         fqi_ope, va_ope, weighted_ridge)
from .mdp import (ExactEval, NoiseSpec, Policy, PopulationCovariances, TabularLinearMDP,
                  exact_eval, occupancy, policy_features, population_covariances,
                  transition_kernel, validate)
from .sampler import OfflineData, sample_stage, sample_trajectories, split
from .synth import SynthConfig, build, encode_action

__version__ = "0.1.0"
