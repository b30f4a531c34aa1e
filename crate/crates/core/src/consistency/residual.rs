// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

//! Defects of a candidate triple `(xbar, q, q~)` in the discrete
//! forward-backward system.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bsde::{self, StepOperators};
use super::candidate::{MeanFieldCandidate, TreeValues};
use crate::error::{MfgError, Result};
use crate::grid::TimeGrid;
use crate::model::ModelSpec;
use crate::riccati::RiccatiSolution;
use crate::scalar::Real;
use crate::tree::NoiseTree;

/// Defects of the discrete equations. Forward and backward defects are per
/// unit time (one-step defect divided by `dt`); the martingale defect is
/// divided by `sqrt(dt)`, the size of one increment.
///
/// The plain fields are maxima over nodes. The `_l2` fields measure the same
/// defects in `max_k sqrt(E|.|^2)`, the norm of the fixed-point space. Node
/// maxima pick up the extreme branches, whose state grows like `sqrt(n)`, so
/// only the `_l2` figures have a clean rate in `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub forward_defect: f64,
    pub backward_defect: f64,
    pub terminal_defect: f64,
    pub martingale_defect: f64,
    pub forward_defect_l2: f64,
    pub backward_defect_l2: f64,
    pub terminal_defect_l2: f64,
    pub martingale_defect_l2: f64,
}

impl ResidualReport {
    pub fn max_defect(&self) -> f64 {
        self.forward_defect
            .max(self.backward_defect)
            .max(self.terminal_defect)
            .max(self.martingale_defect)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("residual report serializes")
    }
}

pub fn fbsee_residual<T: Real>(
    spec: &ModelSpec<T>,
    grid: &TimeGrid<T>,
    tree: &NoiseTree<T>,
    pi: &RiccatiSolution<T>,
    xbar: &MeanFieldCandidate<T>,
    q: &TreeValues<DVector<T>>,
    q_tilde: &TreeValues<Vec<DVector<T>>>,
) -> Result<ResidualReport> {
    bsde::check_tree(grid, tree, "residual")?;
    let x = bsde::tree_candidate(xbar, tree)?;
    let n = grid.n_steps();
    if q.len() != n + 1 || q_tilde.len() < n {
        return Err(MfgError::GridMismatch("q / q~ are not indexed by the noise tree".into()));
    }
    let ops = StepOperators::new(spec, grid)?;
    let dt = ops.dt;
    let sqrt_dt = dt.sqrt();
    let gf2 = &spec.g * &spec.f2hat;

    let per_level: Vec<([T; 3], [T; 3])> = (0..n)
        .into_par_iter()
        .map(|k| {
            let pi_k = pi.at_knot(k);
            let (p_node, p_child) = (tree.probability(k), tree.probability(k + 1));
            let mut worst = [T::zero(); 3];
            let mut mean_sq = [T::zero(); 3];
            for v in 0..tree.nodes_at(k) {
                let xv = &x[k][v];
                let base = bsde::forward_drift_part(spec, &ops, pi_k, xv, &q[k][v], xv);
                let mean = tree.conditional_mean(v, |_, c| q[k + 1][c].clone());
                for (b, c) in tree.children(v).enumerate() {
                    let pred = &ops.s * (&base + bsde::common_noise_term(spec, &ops, tree, b, xv, xv));
                    let e = (&x[k + 1][c] - pred).norm() / dt;
                    worst[0] = worst[0].max(e);
                    mean_sq[0] += e * e * p_child;
                    let mut recon = mean.clone();
                    for j in 0..spec.m_common {
                        recon += &q_tilde[k][v][j] * (ops.sqrt_lambda0[j] * tree.increment(b, j));
                    }
                    let e = (&q[k + 1][c] - recon).norm() / sqrt_dt;
                    worst[2] = worst[2].max(e);
                    mean_sq[2] += e * e * p_child;
                }
                let f = bsde::backward_drift(spec, &ops, pi_k, xv, &mean, &q_tilde[k][v]);
                let pred = &ops.s_t * (mean - f * dt);
                let e = (&q[k][v] - pred).norm() / dt;
                worst[1] = worst[1].max(e);
                mean_sq[1] += e * e * p_node;
            }
            (worst, mean_sq)
        })
        .collect();
    let mut worst = [T::zero(); 3];
    let mut l2 = [T::zero(); 3];
    for (w, m) in per_level {
        for i in 0..3 {
            worst[i] = worst[i].max(w[i]);
            l2[i] = l2[i].max(m[i].sqrt());
        }
    }
    let terminal: Vec<T> = q[n].iter().zip(&x[n]).map(|(qv, xv)| (qv - &gf2 * xv).norm()).collect();
    let terminal_max = terminal.iter().fold(T::zero(), |a, &b| a.max(b));
    let terminal_l2 = (terminal.iter().fold(T::zero(), |a, &b| a + b * b) * tree.probability(n)).sqrt();
    let f = |x: T| x.to_f64_lossy();
    Ok(ResidualReport {
        forward_defect: f(worst[0]),
        backward_defect: f(worst[1]),
        terminal_defect: f(terminal_max),
        martingale_defect: f(worst[2]),
        forward_defect_l2: f(l2[0]),
        backward_defect_l2: f(l2[1]),
        terminal_defect_l2: f(terminal_l2),
        martingale_defect_l2: f(l2[2]),
    })
}
