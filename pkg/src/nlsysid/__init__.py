"""Simulate h_{t+1} = phi(A h_t + B u_t) and learn (A, B) with constant-step SGD."""

from .activation import Activation, blend, leaky_relu, linear, relu
from .learner import (LearnerConfig, RegressionDataset, TrainTrace, build_dataset, decode,
                      empirical_scaling, encode, grad_single, loss, normalized_error,
                      normalized_loss, sgd_train)
from .simulator import (SystemParams, Trajectory, gaussian_inputs, multi_trajectory_sample,
                        random_system, simulate, subsample, truncated_state)
from .theory import (AssumptionParams, TheoryReport, b_t, data_matrix_condition,
                     empirical_covariance, rho_stable, rho_unstable, theoretical_hparams,
                     truncation_length)

__version__ = "0.1.0"
