// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

//! Offset backward equation and the forward mean-field map on the noise tree.
//!
//! The backward scheme is explicit Euler in mild form,
//! `q(v) = S(dt)^T (E[q+ | v] - dt f(v))`, with exact child averages. The
//! martingale integrand is read off by the increment regression
//! `q~_j(v) = E[q+ dbeta_j | v] / (dt sqrt(lambda0_j))`, so that the
//! martingale part of `q` is `sum_j sqrt(lambda0_j) q~_j dbeta_j`, the same
//! convention as the `sigma0` stack.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::candidate::{MeanFieldCandidate, TreeValues};
use crate::error::{MfgError, Result};
use crate::grid::TimeGrid;
use crate::linalg;
use crate::model::ModelSpec;
use crate::riccati::RiccatiSolution;
use crate::scalar::Real;
use crate::tree::NoiseTree;

/// `q` at every node and `q~` (one vector per common mode) at every
/// non-terminal node.
#[derive(Debug, Clone)]
pub struct OffsetSolution<T: Real> {
    pub q: TreeValues<DVector<T>>,
    pub q_tilde: TreeValues<Vec<DVector<T>>>,
}

/// Step quantities shared by the backward and forward sweeps.
pub(crate) struct StepOperators<T: Real> {
    pub dt: T,
    pub s: DMatrix<T>,
    pub s_t: DMatrix<T>,
    pub bbt: DMatrix<T>,
    pub sqrt_lambda0: Vec<T>,
}

impl<T: Real> StepOperators<T> {
    pub fn new(spec: &ModelSpec<T>, grid: &TimeGrid<T>) -> Result<Self> {
        let s = linalg::expm(&(&spec.a * grid.dt()))?;
        Ok(Self {
            dt: grid.dt(),
            s_t: s.transpose(),
            s,
            bbt: spec.bbt(),
            sqrt_lambda0: spec.lambda_common.iter().map(|l| l.sqrt()).collect(),
        })
    }
}

/// Drift `f` of the offset equation, `dq = (-A^T q + f) dt + q~ dW0`.
pub(crate) fn backward_drift<T: Real>(
    spec: &ModelSpec<T>,
    ops: &StepOperators<T>,
    pi: &DMatrix<T>,
    g: &DVector<T>,
    q: &DVector<T>,
    q_tilde: &[DVector<T>],
) -> DVector<T> {
    let mut f = pi * (&ops.bbt * q) - &spec.m * (&spec.f1hat * g) + pi * (&spec.f1 * g);
    for j in 0..spec.m_idio {
        let p = &spec.f2[j] * g + &spec.sigma[j];
        f += (spec.d[j].tr_mul(&(pi * p))) * spec.lambda_idio[j];
    }
    for j in 0..spec.m_common {
        let p0 = &spec.f0[j] * g + &spec.sigma0[j];
        f += (spec.d0[j].tr_mul(&(pi * p0 - &q_tilde[j]))) * spec.lambda_common[j];
    }
    f
}

/// Pre-noise part of the forward step: `y - dt (BB^T Pi y - BB^T q - F1 g)`.
pub(crate) fn forward_drift_part<T: Real>(
    spec: &ModelSpec<T>,
    ops: &StepOperators<T>,
    pi: &DMatrix<T>,
    y: &DVector<T>,
    q: &DVector<T>,
    g: &DVector<T>,
) -> DVector<T> {
    y - (&ops.bbt * (pi * y - q) - &spec.f1 * g) * ops.dt
}

/// Common-noise term `sum_j sqrt(lambda0_j) (D0_j y + F0_j g + sigma0_j) dbeta_j`.
pub(crate) fn common_noise_term<T: Real>(
    spec: &ModelSpec<T>,
    ops: &StepOperators<T>,
    tree: &NoiseTree<T>,
    branch: usize,
    y: &DVector<T>,
    g: &DVector<T>,
) -> DVector<T> {
    let mut out = DVector::zeros(spec.d_state);
    for j in 0..spec.m_common {
        let coeff = ops.sqrt_lambda0[j] * tree.increment(branch, j);
        out += (&spec.d0[j] * y + &spec.f0[j] * g + &spec.sigma0[j]) * coeff;
    }
    out
}

pub(crate) fn check_tree<T: Real>(grid: &TimeGrid<T>, tree: &NoiseTree<T>, what: &str) -> Result<()> {
    if grid.same_as(&tree.grid) {
        Ok(())
    } else {
        Err(MfgError::GridMismatch(format!(
            "{what}: grid has {} steps, tree has depth {}",
            grid.n_steps(),
            tree.depth()
        )))
    }
}

fn check_levels<T: Real, V>(tree: &NoiseTree<T>, levels: &TreeValues<V>, what: &str) -> Result<()> {
    let ok = levels.len() == tree.depth() + 1
        && levels.iter().enumerate().all(|(k, l)| l.len() == tree.nodes_at(k));
    if ok {
        Ok(())
    } else {
        Err(MfgError::GridMismatch(format!("{what} is not indexed by the noise tree")))
    }
}

pub(crate) fn tree_candidate<'a, T: Real>(
    g: &'a MeanFieldCandidate<T>,
    tree: &NoiseTree<T>,
) -> Result<&'a TreeValues<DVector<T>>> {
    let levels = g
        .tree_levels()
        .ok_or_else(|| MfgError::InvalidArgument("mean-field candidate must be tree-indexed".into()))?;
    check_levels(tree, levels, "mean-field candidate")?;
    Ok(levels)
}

/// Child average and increment regression at `node` of depth `k`.
pub(crate) fn regress<T: Real>(
    tree: &NoiseTree<T>,
    ops: &StepOperators<T>,
    children: &[DVector<T>],
    node: usize,
) -> (DVector<T>, Vec<DVector<T>>) {
    let mean = tree.conditional_mean(node, |_, c| children[c].clone());
    let q_tilde = (0..tree.m_common)
        .map(|j| {
            let e = tree.conditional_mean(node, |b, c| &children[c] * tree.increment(b, j));
            e / (ops.dt * ops.sqrt_lambda0[j])
        })
        .collect();
    (mean, q_tilde)
}

pub fn solve_offset_bsde<T: Real>(
    spec: &ModelSpec<T>,
    grid: &TimeGrid<T>,
    tree: &NoiseTree<T>,
    pi: &RiccatiSolution<T>,
    g: &MeanFieldCandidate<T>,
) -> Result<OffsetSolution<T>> {
    let ops = StepOperators::new(spec, grid)?;
    solve_offset_with(spec, grid, tree, pi, g, &ops)
}

pub(crate) fn solve_offset_with<T: Real>(
    spec: &ModelSpec<T>,
    grid: &TimeGrid<T>,
    tree: &NoiseTree<T>,
    pi: &RiccatiSolution<T>,
    g: &MeanFieldCandidate<T>,
    ops: &StepOperators<T>,
) -> Result<OffsetSolution<T>> {
    check_tree(grid, tree, "offset equation")?;
    if !grid.same_as(&pi.grid) {
        return Err(MfgError::GridMismatch("Pi is on a different grid".into()));
    }
    let g = tree_candidate(g, tree)?;
    let n = grid.n_steps();
    let gf2 = &spec.g * &spec.f2hat;

    let mut q: TreeValues<DVector<T>> = vec![Vec::new(); n + 1];
    let mut q_tilde: TreeValues<Vec<DVector<T>>> = vec![Vec::new(); n];
    q[n] = g[n].iter().map(|x| &gf2 * x).collect();
    for k in (0..n).rev() {
        let pi_k = pi.at_knot(k);
        let children = &q[k + 1];
        let level: Vec<(DVector<T>, Vec<DVector<T>>)> = (0..tree.nodes_at(k))
            .into_par_iter()
            .map(|v| {
                let (mean, qt) = regress(tree, ops, children, v);
                let f = backward_drift(spec, ops, pi_k, &g[k][v], &mean, &qt);
                (&ops.s_t * (mean - f * ops.dt), qt)
            })
            .collect();
        let (qk, qtk): (Vec<_>, Vec<_>) = level.into_iter().unzip();
        q[k] = qk;
        q_tilde[k] = qtk;
    }
    Ok(OffsetSolution { q, q_tilde })
}

/// Forward sweep `y_g` given the offset `q`.
pub(crate) fn forward_sweep<T: Real>(
    spec: &ModelSpec<T>,
    tree: &NoiseTree<T>,
    pi: &RiccatiSolution<T>,
    g: &TreeValues<DVector<T>>,
    q: &TreeValues<DVector<T>>,
    ops: &StepOperators<T>,
) -> TreeValues<DVector<T>> {
    let n = tree.depth();
    let mut y: TreeValues<DVector<T>> = Vec::with_capacity(n + 1);
    y.push(vec![spec.xi_bar.clone()]);
    for k in 0..n {
        let pi_k = pi.at_knot(k);
        let prev = &y[k];
        let next: Vec<DVector<T>> = (0..tree.nodes_at(k + 1))
            .into_par_iter()
            .map(|c| {
                let v = tree.parent(c);
                let b = tree.branch_of(c);
                let base = forward_drift_part(spec, ops, pi_k, &prev[v], &q[k][v], &g[k][v]);
                &ops.s * (base + common_noise_term(spec, ops, tree, b, &prev[v], &g[k][v]))
            })
            .collect();
        y.push(next);
    }
    y
}

/// The consistency map `g -> y_g`.
pub fn mean_field_map<T: Real>(
    spec: &ModelSpec<T>,
    grid: &TimeGrid<T>,
    tree: &NoiseTree<T>,
    pi: &RiccatiSolution<T>,
    g: &MeanFieldCandidate<T>,
) -> Result<MeanFieldCandidate<T>> {
    let ops = StepOperators::new(spec, grid)?;
    map_with(spec, grid, tree, pi, g, &ops)
}

pub(crate) fn map_with<T: Real>(
    spec: &ModelSpec<T>,
    grid: &TimeGrid<T>,
    tree: &NoiseTree<T>,
    pi: &RiccatiSolution<T>,
    g: &MeanFieldCandidate<T>,
    ops: &StepOperators<T>,
) -> Result<MeanFieldCandidate<T>> {
    let offset = solve_offset_with(spec, grid, tree, pi, g, ops)?;
    let levels = tree_candidate(g, tree)?;
    Ok(MeanFieldCandidate::tree(
        *grid,
        forward_sweep(spec, tree, pi, levels, &offset.q, ops),
    ))
}

impl<T: Real> OffsetSolution<T> {
    /// `node_id,parent_id,depth,q_0,...`.
    pub fn q_csv(&self, tree: &NoiseTree<T>) -> String {
        super::candidate::tree_to_csv(tree, &self.q)
    }

    /// `q~` stacked mode after mode, one row per non-terminal node.
    pub fn q_tilde_csv(&self, tree: &NoiseTree<T>) -> String {
        let flat: TreeValues<DVector<T>> = self
            .q_tilde
            .iter()
            .map(|l| {
                l.iter()
                    .map(|modes| {
                        DVector::from_iterator(
                            modes.iter().map(|m| m.len()).sum(),
                            modes.iter().flat_map(|m| m.iter().copied()),
                        )
                    })
                    .collect()
            })
            .collect();
        super::candidate::tree_to_csv(tree, &flat)
    }
}
