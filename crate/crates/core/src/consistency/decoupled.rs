// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

//! Arbitrary-horizon solution through the decoupling field
//! `q = -eta xbar + varsigma`, available when the common-noise diffusion
//! coefficients `D0`, `F0` vanish.

use nalgebra::DVector;
use rayon::prelude::*;

use super::bsde::{self, OffsetSolution, StepOperators};
use super::candidate::{MeanFieldCandidate, TreeValues};
use crate::error::{MfgError, Result};
use crate::grid::TimeGrid;
use crate::model::ModelSpec;
use crate::riccati::{self, At, LambdaPath, RiccatiKind, RiccatiSolution};
use crate::scalar::Real;
use crate::tree::NoiseTree;

/// Deterministic `varsigma` on the grid and its (zero) martingale integrand.
#[derive(Debug, Clone)]
pub struct Varsigma<T: Real> {
    pub grid: TimeGrid<T>,
    pub values: Vec<DVector<T>>,
    /// One stack of `m_common` vectors per knot.
    pub tilde: Vec<Vec<DVector<T>>>,
}

fn require_det_diff<T: Real>(spec: &ModelSpec<T>) -> Result<()> {
    if spec.is_det_diff() {
        Ok(())
    } else {
        Err(MfgError::DetDiffViolated(
            "D0 or F0 is nonzero; use the Picard solver on a certified horizon instead".into(),
        ))
    }
}

/// Backward RK4 for
/// `varsigma' = -(A^T varsigma - Pi BB^T varsigma - eta BB^T varsigma - D* Pi sigma)`,
/// `varsigma(T) = 0`.
pub fn solve_varsigma<T: Real>(
    spec: &ModelSpec<T>,
    grid: &TimeGrid<T>,
    pi: &RiccatiSolution<T>,
    eta: &RiccatiSolution<T>,
) -> Result<Varsigma<T>> {
    require_det_diff(spec)?;
    if !grid.same_as(&pi.grid) || !grid.same_as(&eta.grid) {
        return Err(MfgError::GridMismatch("varsigma: Pi and eta must share the grid".into()));
    }
    let bbt = spec.bbt();
    let a_t = spec.a.transpose();
    let rhs = |at: At<T>, s: &DVector<T>| {
        let p = pi.at(at);
        let e = eta.at(at);
        let mut src = DVector::zeros(spec.d_state);
        for j in 0..spec.m_idio {
            src += spec.d[j].tr_mul(&(&p * &spec.sigma[j])) * spec.lambda_idio[j];
        }
        -(&a_t * s - (&p + &e) * (&bbt * s) - src)
    };

    let n = grid.n_steps();
    let h = grid.dt();
    let half = T::lit(0.5);
    let mut values = vec![DVector::zeros(spec.d_state); n + 1];
    let mut y = DVector::zeros(spec.d_state);
    for k in (0..n).rev() {
        let at = |theta| At { interval: k, theta };
        let k1 = rhs(at(T::one()), &y);
        let k2 = rhs(at(half), &(&y - &k1 * (h * half)));
        let k3 = rhs(at(half), &(&y - &k2 * (h * half)));
        let k4 = rhs(at(T::zero()), &(&y - &k3 * h));
        y -= (k1 + (k2 + k3) * T::lit(2.0) + k4) * (h / T::lit(6.0));
        if y.iter().any(|x| !x.is_finite()) {
            return Err(MfgError::BlowUp {
                kind: "varsigma".into(),
                time: grid.t(k).to_f64_lossy(),
                norm: f64::INFINITY,
            });
        }
        values[k] = y.clone();
    }
    let tilde = vec![vec![DVector::zeros(spec.d_state); spec.m_common]; n + 1];
    Ok(Varsigma {
        grid: *grid,
        values,
        tilde,
    })
}

#[derive(Debug, Clone)]
pub struct DecoupledSolution<T: Real> {
    pub pi: RiccatiSolution<T>,
    pub lambda: LambdaPath<T>,
    pub eta: RiccatiSolution<T>,
    pub varsigma: Varsigma<T>,
    pub xbar: MeanFieldCandidate<T>,
    /// `q = -eta xbar + varsigma` at every node.
    pub q: TreeValues<DVector<T>>,
    /// `q~(t_k) = -eta(t_k) sigma0`, one stack per knot.
    pub q_tilde: Vec<Vec<DVector<T>>>,
}

impl<T: Real> DecoupledSolution<T> {
    /// `q~` broadcast to the non-terminal nodes of the tree.
    pub fn q_tilde_on_tree(&self, tree: &NoiseTree<T>) -> TreeValues<Vec<DVector<T>>> {
        (0..tree.depth())
            .map(|k| vec![self.q_tilde[k].clone(); tree.nodes_at(k)])
            .collect()
    }

    pub fn offset(&self, tree: &NoiseTree<T>) -> OffsetSolution<T> {
        OffsetSolution {
            q: self.q.clone(),
            q_tilde: self.q_tilde_on_tree(tree),
        }
    }
}

pub fn solve_decoupled<T: Real>(
    spec: &ModelSpec<T>,
    grid: &TimeGrid<T>,
    tree: &NoiseTree<T>,
) -> Result<DecoupledSolution<T>> {
    require_det_diff(spec)?;
    bsde::check_tree(grid, tree, "decoupled solve")?;
    let pi = riccati::solve_pi_riccati(spec, grid, true)?;
    let lambda = riccati::compute_lambda(spec, &pi)?;
    let eta = riccati::solve_eta_riccati(spec, grid, &pi, &lambda, None)?;
    debug_assert_eq!(eta.kind, RiccatiKind::Eta);
    let varsigma = solve_varsigma(spec, grid, &pi, &eta)?;
    let ops = StepOperators::new(spec, grid)?;

    let n = grid.n_steps();
    let mut xbar: TreeValues<DVector<T>> = Vec::with_capacity(n + 1);
    xbar.push(vec![spec.xi_bar.clone()]);
    for k in 0..n {
        let phi = &ops.bbt * (eta.at_knot(k) + pi.at_knot(k)) - &spec.f1;
        let push = &ops.bbt * &varsigma.values[k];
        let prev = &xbar[k];
        let next: Vec<DVector<T>> = (0..tree.nodes_at(k + 1))
            .into_par_iter()
            .map(|c| {
                let x = &prev[tree.parent(c)];
                let base = x - (&phi * x - &push) * ops.dt;
                let zero = DVector::zeros(spec.d_state);
                &ops.s * (base + bsde::common_noise_term(spec, &ops, tree, tree.branch_of(c), x, &zero))
            })
            .collect();
        xbar.push(next);
    }

    let q = xbar
        .iter()
        .enumerate()
        .map(|(k, nodes)| {
            nodes
                .iter()
                .map(|x| -(eta.at_knot(k) * x) + &varsigma.values[k])
                .collect()
        })
        .collect();
    let q_tilde = (0..=n)
        .map(|k| spec.sigma0.iter().map(|s| -(eta.at_knot(k) * s)).collect())
        .collect();
    Ok(DecoupledSolution {
        pi,
        lambda,
        eta,
        varsigma,
        xbar: MeanFieldCandidate::tree(*grid, xbar),
        q,
        q_tilde,
    })
}
