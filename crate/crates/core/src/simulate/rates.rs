// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

//! Finite-population experiments: average-state error and cost gaps as
//! functions of `N`, with log-log rate fits.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cost::{mean_and_se, replica_cost, CostReference};
use super::paths::{Deviation, Equilibrium, SimulationOptions, Simulator};
use crate::error::{MfgError, Result};
use crate::grid::TimeGrid;
use crate::model::ModelSpec;
use crate::scalar::Real;

/// Least-squares line through `(ln N, ln value)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub ns: Vec<usize>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl RateFit {
    pub fn fit(ns: &[usize], values: &[f64]) -> Result<Self> {
        if ns.len() != values.len() || ns.len() < 4 {
            return Err(MfgError::InvalidArgument(
                "a rate fit needs at least four (N, value) pairs".into(),
            ));
        }
        if ns.windows(2).any(|w| w[0] >= w[1]) || ns[0] == 0 {
            return Err(MfgError::InvalidArgument("Ns must be positive and strictly increasing".into()));
        }
        if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(MfgError::InvalidArgument("rate fit values must be positive and finite".into()));
        }
        let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
        let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
        Ok(Self {
            ns: ns.to_vec(),
            values: values.to_vec(),
            slope,
            intercept,
            r_squared,
        })
    }

    pub fn to_csv(&self) -> String {
        format!("slope,intercept,r_squared\n{},{},{}\n", self.slope, self.intercept, self.r_squared)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateExperiment {
    pub points: Vec<RatePoint>,
    /// Absent when fewer than four points or some estimate is zero.
    pub fit: Option<RateFit>,
}

pub fn points_csv(points: &[RatePoint]) -> String {
    let mut out = String::from("N,estimate,std_error\n");
    for p in points {
        writeln!(out, "{},{},{}", p.n, p.estimate, p.std_error).unwrap();
    }
    out
}

fn fit_points(points: &[RatePoint]) -> Option<RateFit> {
    let ns: Vec<usize> = points.iter().map(|p| p.n).collect();
    let vs: Vec<f64> = points.iter().map(|p| p.estimate).collect();
    RateFit::fit(&ns, &vs).ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    pub ns: Vec<usize>,
    pub n_mc: usize,
    pub seed: u64,
}

impl ExperimentOptions {
    fn check(&self) -> Result<()> {
        if self.ns.is_empty() || self.ns.contains(&0) || self.n_mc == 0 {
            return Err(MfgError::InvalidArgument("need nonempty positive Ns and n_mc >= 1".into()));
        }
        Ok(())
    }

    fn sim(&self, n: usize, deviation: Deviation, limit_twins: bool) -> SimulationOptions {
        SimulationOptions {
            n_agents: n,
            n_mc: self.n_mc,
            seed: self.seed,
            deviation,
            limit_twins,
        }
    }
}

/// Runs `f` on every replica in parallel and returns results in replica order.
fn per_replica<T, R, F>(
    sim: &Simulator<'_, T>,
    opts: &SimulationOptions,
    f: F,
) -> Result<Vec<R>>
where
    T: Real,
    R: Send,
    F: Fn(super::paths::ReplicaPaths<T>) -> R + Sync,
{
    (0..opts.n_mc)
        .into_par_iter()
        .map(|r| sim.replica(opts, r).map(&f))
        .collect()
}

/// `sup_k E|xbar(t_k) - x^(N)(t_k)|^2` for every `N`, with the common path of
/// each replica matched to its tree node.
pub fn average_state_error_experiment<T: Real>(
    spec: &ModelSpec<T>,
    grid: &TimeGrid<T>,
    eq: &Equilibrium<T>,
    opts: &ExperimentOptions,
) -> Result<RateExperiment> {
    opts.check()?;
    let sim = Simulator::new(spec, grid, eq)?;
    let mut points = Vec::with_capacity(opts.ns.len());
    for &n in &opts.ns {
        let so = opts.sim(n, Deviation::Equilibrium, false);
        let errors: Vec<Vec<f64>> = per_replica(&sim, &so, |rep| {
            rep.average
                .iter()
                .zip(&rep.mean_field)
                .map(|(a, m)| (a - m).norm_squared().to_f64_lossy())
                .collect()
        })?;
        let (mut best, mut best_se) = (f64::NEG_INFINITY, 0.0);
        for k in 0..grid.n_knots() {
            let col: Vec<f64> = errors.iter().map(|e| e[k]).collect();
            let (m, se) = mean_and_se(&col);
            if m > best {
                best = m;
                best_se = se;
            }
        }
        points.push(RatePoint {
            n,
            estimate: best,
            std_error: best_se,
        });
    }
    let fit = fit_points(&points);
    Ok(RateExperiment { points, fit })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NashMode {
    /// `|J^inf - J^[N]|` for equilibrium play, averaged over the
    /// exchangeable agents on paired noise.
    LimitGap,
    /// `max(0, J_eq - J_dev)` for the first agent on paired noise.
    Defect(Deviation),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NashPoint {
    pub n: usize,
    /// Equilibrium `N`-player cost and its standard error.
    pub j_eq: f64,
    pub j_eq_se: f64,
    /// `J^inf` (limit-gap) or `J_dev` (defect) and its standard error.
    pub j_other: f64,
    pub j_other_se: f64,
    /// The gap or the defect.
    pub value: f64,
    /// Paired standard error for the gap; pooled `sqrt(se_eq^2 + se_dev^2)`
    /// for the defect.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashExperiment {
    pub mode: NashMode,
    pub points: Vec<NashPoint>,
    /// Fitted in limit-gap mode only.
    pub gap_fit: Option<RateFit>,
}

impl NashExperiment {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,j_eq,j_eq_se,j_other,j_other_se,value,std_error\n");
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                p.n, p.j_eq, p.j_eq_se, p.j_other, p.j_other_se, p.value, p.std_error
            )
            .unwrap();
        }
        out
    }

    pub fn rate_points(&self) -> Vec<RatePoint> {
        self.points
            .iter()
            .map(|p| RatePoint {
                n: p.n,
                estimate: p.value,
                std_error: p.std_error,
            })
            .collect()
    }
}

pub fn epsilon_nash_experiment<T: Real>(
    spec: &ModelSpec<T>,
    grid: &TimeGrid<T>,
    eq: &Equilibrium<T>,
    opts: &ExperimentOptions,
    mode: NashMode,
) -> Result<NashExperiment> {
    opts.check()?;
    let sim = Simulator::new(spec, grid, eq)?;
    let dt = grid.dt();
    let total = |c: [f64; 3]| c[0] + c[1] + c[2];
    let mut points = Vec::with_capacity(opts.ns.len());
    for &n in &opts.ns {
        let point = match mode {
            NashMode::LimitGap => {
                let so = opts.sim(n, Deviation::Equilibrium, true);
                let rows: Vec<(f64, f64)> = per_replica(&sim, &so, |rep| {
                    let (mut jn, mut jinf) = (0.0, 0.0);
                    for i in 0..n {
                        jn += total(replica_cost(spec, dt, &rep, i, CostReference::EmpiricalAverage));
                        jinf += total(replica_cost(spec, dt, &rep, i, CostReference::MeanField));
                    }
                    (jn / n as f64, jinf / n as f64)
                })?;
                let jn: Vec<f64> = rows.iter().map(|r| r.0).collect();
                let jinf: Vec<f64> = rows.iter().map(|r| r.1).collect();
                let diff: Vec<f64> = rows.iter().map(|r| r.0 - r.1).collect();
                let ((a, a_se), (b, b_se), (d, d_se)) = (mean_and_se(&jn), mean_and_se(&jinf), mean_and_se(&diff));
                NashPoint {
                    n,
                    j_eq: a,
                    j_eq_se: a_se,
                    j_other: b,
                    j_other_se: b_se,
                    value: d.abs(),
                    std_error: d_se,
                }
            }
            NashMode::Defect(dev) => {
                let cost0 = |rep: super::paths::ReplicaPaths<T>| {
                    total(replica_cost(spec, dt, &rep, 0, CostReference::EmpiricalAverage))
                };
                let j_eq = per_replica(&sim, &opts.sim(n, Deviation::Equilibrium, false), cost0)?;
                let j_dev = per_replica(&sim, &opts.sim(n, dev, false), cost0)?;
                let ((a, a_se), (b, b_se)) = (mean_and_se(&j_eq), mean_and_se(&j_dev));
                NashPoint {
                    n,
                    j_eq: a,
                    j_eq_se: a_se,
                    j_other: b,
                    j_other_se: b_se,
                    value: (a - b).max(0.0),
                    std_error: (a_se * a_se + b_se * b_se).sqrt(),
                }
            }
        };
        points.push(point);
    }
    let gap_fit = match mode {
        NashMode::LimitGap => {
            let ns: Vec<usize> = points.iter().map(|p| p.n).collect();
            let vs: Vec<f64> = points.iter().map(|p| p.value).collect();
            RateFit::fit(&ns, &vs).ok()
        }
        NashMode::Defect(_) => None,
    };
    Ok(NashExperiment { mode, points, gap_fit })
}
