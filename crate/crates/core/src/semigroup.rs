// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

//! Semigroup `S(t) = exp(tA)` on the grid, growth constants and Yosida
//! approximants of the generator.

use nalgebra::DMatrix;

use crate::error::{MfgError, Result};
use crate::grid::TimeGrid;
use crate::linalg;
use crate::model::ModelSpec;
use crate::scalar::Real;

/// `S_k = exp(t_k A)` at every knot, plus the bound `||S(t)|| <= M_A e^{alpha t}`.
#[derive(Debug, Clone)]
pub struct SemigroupTable<T: Real> {
    pub grid: TimeGrid<T>,
    pub matrices: Vec<DMatrix<T>>,
    /// Always one: the bound comes from the logarithmic norm.
    pub m_a: T,
    /// `max(0, lambda_max((A + A^T) / 2))`.
    pub alpha_growth: T,
    /// `M_A exp(alpha_growth T)`.
    pub m_t: T,
}

impl<T: Real> SemigroupTable<T> {
    /// One-step propagator `S(dt)`.
    pub fn step(&self) -> &DMatrix<T> {
        &self.matrices[1.min(self.matrices.len() - 1)]
    }

    pub fn at(&self, k: usize) -> &DMatrix<T> {
        &self.matrices[k]
    }
}

/// Logarithmic-norm growth exponent of `A`, clipped at zero.
pub fn growth_exponent<T: Real>(a: &DMatrix<T>) -> T {
    linalg::max_eig_sym(a).max(T::zero())
}

/// `M_T = exp(alpha_growth T)` with `M_A = 1`.
pub fn growth_bound<T: Real>(a: &DMatrix<T>, horizon: T) -> T {
    (growth_exponent(a) * horizon).exp()
}

pub fn build_semigroup<T: Real>(spec: &ModelSpec<T>, grid: &TimeGrid<T>) -> Result<SemigroupTable<T>> {
    let n = spec.d_state;
    let mut matrices = Vec::with_capacity(grid.n_knots());
    matrices.push(DMatrix::identity(n, n));
    for k in 1..grid.n_knots() {
        matrices.push(linalg::expm(&(&spec.a * grid.t(k)))?);
    }
    let alpha_growth = growth_exponent(&spec.a);
    Ok(SemigroupTable {
        grid: *grid,
        matrices,
        m_a: T::one(),
        alpha_growth,
        m_t: (alpha_growth * grid.horizon()).exp(),
    })
}

/// Resolvent-based approximants `J_n = n (nI - A)^{-1}` and `A_n = A J_n`.
#[derive(Debug, Clone)]
pub struct Yosida<T: Real> {
    pub n: T,
    pub j_n: DMatrix<T>,
    pub a_n: DMatrix<T>,
}

pub fn yosida<T: Real>(a: &DMatrix<T>, n: T) -> Result<Yosida<T>> {
    let dim = a.nrows();
    let shifted = DMatrix::<T>::identity(dim, dim) * n - a;
    let inv = shifted.try_inverse().ok_or(MfgError::SingularResolvent {
        n: n.to_f64_lossy(),
    })?;
    if inv.iter().any(|x| !x.is_finite()) {
        return Err(MfgError::SingularResolvent { n: n.to_f64_lossy() });
    }
    let j_n = inv * n;
    let a_n = a * &j_n;
    Ok(Yosida { n, j_n, a_n })
}

/// Model with `A` replaced by its Yosida approximant `A_n`.
pub fn yosida_model<T: Real>(spec: &ModelSpec<T>, n: T) -> Result<ModelSpec<T>> {
    let y = yosida(&spec.a, n)?;
    Ok(ModelSpec {
        a: y.a_n,
        ..spec.clone()
    })
}
