// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

//! Monte Carlo simulation of the `N`-player game under the mean-field
//! feedback, cost estimation and finite-population rate experiments.

mod cost;
mod paths;
mod rates;

pub use cost::{estimate_cost, mean_and_se, CostReference, CostReport};
pub use paths::{
    feedback_control, simulate_n_player, AgentEnsemble, Deviation, Equilibrium, ReplicaPaths, SimulationOptions,
    StrategyTag,
};
pub use rates::{
    average_state_error_experiment, epsilon_nash_experiment, points_csv, ExperimentOptions, NashExperiment, NashMode,
    NashPoint, RateExperiment, RateFit, RatePoint,
};
