// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

//! Picard iteration of the consistency map on the noise tree.

use serde::{Deserialize, Serialize};

use super::bsde::{self, StepOperators};
use super::candidate::{tree_zip, MeanFieldCandidate};
use crate::error::{MfgError, Result};
use crate::grid::TimeGrid;
use crate::model::ModelSpec;
use crate::riccati::RiccatiSolution;
use crate::scalar::Real;
use crate::tree::NoiseTree;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// `g <- (1 - damping) g + damping Y(g)`; 1 is the plain iteration.
    pub damping: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
            damping: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FixedPointResult<T: Real> {
    pub xbar: MeanFieldCandidate<T>,
    /// Map evaluations beyond the first that were needed to certify the
    /// tolerance; a map that ignores its argument converges in one.
    pub iterations: usize,
    /// `r_i = sqrt(sup_k E|g_i - g_{i-1}|^2)` for every evaluation.
    pub residual_history: Vec<f64>,
    /// Successive ratios `r_i / r_{i-1}`.
    pub ratios: Vec<f64>,
    /// Largest successive ratio, the empirical contraction factor.
    pub measured_ratio: f64,
}

pub fn picard_fixed_point<T: Real>(
    spec: &ModelSpec<T>,
    grid: &TimeGrid<T>,
    tree: &NoiseTree<T>,
    pi: &RiccatiSolution<T>,
    g0: &MeanFieldCandidate<T>,
    options: &PicardOptions,
) -> Result<FixedPointResult<T>> {
    if !(options.tol > 0.0) {
        return Err(MfgError::InvalidArgument(format!("tol must be positive, got {}", options.tol)));
    }
    if !(options.damping > 0.0 && options.damping <= 1.0) {
        return Err(MfgError::InvalidArgument(format!(
            "damping must lie in (0, 1], got {}",
            options.damping
        )));
    }
    let ops = StepOperators::new(spec, grid)?;
    let theta = T::lit(options.damping);
    let mut g = g0.clone();
    let mut history = Vec::new();
    let mut ratios = Vec::new();
    for i in 1..=options.max_iter {
        let image = bsde::map_with(spec, grid, tree, pi, &g, &ops)?;
        let next = if options.damping == 1.0 {
            image
        } else {
            let (a, b) = (g.tree_levels().unwrap(), image.tree_levels().unwrap());
            MeanFieldCandidate::tree(*grid, tree_zip(a, b, |x, y| x * (T::one() - theta) + y * theta))
        };
        let r = next.distance_sq(&g, tree).to_f64_lossy().sqrt();
        if let Some(&prev) = history.last() {
            if prev > 0.0 {
                ratios.push(r / prev);
            }
        }
        history.push(r);
        g = next;
        if !r.is_finite() {
            break;
        }
        if r <= options.tol {
            let measured_ratio = ratios.iter().copied().fold(0.0, f64::max);
            return Ok(FixedPointResult {
                xbar: g,
                iterations: i - 1,
                residual_history: history,
                ratios,
                measured_ratio,
            });
        }
    }
    Err(MfgError::PicardNotConverged {
        iterations: history.len(),
        last_residual: history.last().copied().unwrap_or(f64::NAN),
        residual_history: history,
    })
}

/// `sup_k E|Y g1 - Y g2|^2 / sup_k E|g1 - g2|^2`, the squared Lipschitz
/// quotient of the map on one pair.
pub fn measured_lipschitz_sq<T: Real>(
    spec: &ModelSpec<T>,
    grid: &TimeGrid<T>,
    tree: &NoiseTree<T>,
    pi: &RiccatiSolution<T>,
    g1: &MeanFieldCandidate<T>,
    g2: &MeanFieldCandidate<T>,
) -> Result<f64> {
    let ops = StepOperators::new(spec, grid)?;
    let y1 = bsde::map_with(spec, grid, tree, pi, g1, &ops)?;
    let y2 = bsde::map_with(spec, grid, tree, pi, g2, &ops)?;
    let num = y1.distance_sq(&y2, tree).to_f64_lossy();
    let den = g1.distance_sq(g2, tree).to_f64_lossy();
    Ok(num / den)
}
