// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

//! Agent cost functionals estimated over Monte Carlo replicas.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::paths::{AgentEnsemble, ReplicaPaths};
use crate::error::{MfgError, Result};
use crate::grid::TimeGrid;
use crate::model::ModelSpec;
use crate::scalar::Real;

/// What the cost couples the agent to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostReference {
    /// `x^(N)`, the empirical average of the population.
    EmpiricalAverage,
    /// The solved mean field `xbar` along the replica's common path.
    MeanField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub mean_cost: f64,
    pub std_error: f64,
    pub running_tracking: f64,
    pub control_energy: f64,
    pub terminal_tracking: f64,
    pub n_mc: usize,
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `[running tracking, control energy, terminal tracking]` of one path, with
/// the trapezoidal rule on the grid.
pub(crate) fn path_cost<T: Real>(
    spec: &ModelSpec<T>,
    dt: T,
    states: &[DVector<T>],
    controls: &[DVector<T>],
    reference: &[DVector<T>],
) -> [f64; 3] {
    let n = states.len() - 1;
    let half = T::lit(0.5);
    let (mut track, mut energy) = (T::zero(), T::zero());
    for k in 0..=n {
        let w = if k == 0 || k == n { dt * half } else { dt };
        let e = &states[k] - &spec.f1hat * &reference[k];
        track += e.dot(&(&spec.m * &e)) * w;
        energy += controls[k].norm_squared() * w;
    }
    let e = &states[n] - &spec.f2hat * &reference[n];
    let terminal = e.dot(&(&spec.g * &e));
    [track.to_f64_lossy(), energy.to_f64_lossy(), terminal.to_f64_lossy()]
}

pub(crate) fn replica_cost<T: Real>(
    spec: &ModelSpec<T>,
    dt: T,
    rep: &ReplicaPaths<T>,
    agent: usize,
    reference: CostReference,
) -> [f64; 3] {
    match reference {
        CostReference::EmpiricalAverage => path_cost(spec, dt, &rep.states[agent], &rep.controls[agent], &rep.average),
        CostReference::MeanField => {
            let (x, u) = if rep.twin_states.is_empty() {
                (&rep.states[agent], &rep.controls[agent])
            } else {
                (&rep.twin_states[agent], &rep.twin_controls[agent])
            };
            path_cost(spec, dt, x, u, &rep.mean_field)
        }
    }
}

pub(crate) fn report_from(costs: &[[f64; 3]]) -> CostReport {
    let totals: Vec<f64> = costs.iter().map(|c| c[0] + c[1] + c[2]).collect();
    let (mean_cost, std_error) = mean_and_se(&totals);
    let n = costs.len() as f64;
    let comp = |i: usize| costs.iter().map(|c| c[i]).sum::<f64>() / n;
    CostReport {
        mean_cost,
        std_error,
        running_tracking: comp(0),
        control_energy: comp(1),
        terminal_tracking: comp(2),
        n_mc: costs.len(),
    }
}

/// Cost of `agent_index` across replicas. With `MeanField`, the agent's
/// limit twin is used when the ensemble carries one.
pub fn estimate_cost<T: Real>(
    spec: &ModelSpec<T>,
    grid: &TimeGrid<T>,
    ensemble: &AgentEnsemble<T>,
    agent_index: usize,
    reference: CostReference,
) -> Result<CostReport> {
    if agent_index >= ensemble.n_agents {
        return Err(MfgError::InvalidArgument(format!(
            "agent {agent_index} out of range for {} agents",
            ensemble.n_agents
        )));
    }
    let costs: Vec<[f64; 3]> = ensemble
        .replicas
        .iter()
        .map(|r| replica_cost(spec, grid.dt(), r, agent_index, reference))
        .collect();
    Ok(report_from(&costs))
}
