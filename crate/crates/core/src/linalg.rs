// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{MfgError, Result};
use crate::scalar::Real;

pub fn sym<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * T::lit(0.5)
}

/// Largest singular value; zero for empty matrices.
pub fn spectral_norm<T: Real>(m: &DMatrix<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(T::zero(), |a, b| a.max(b))
}

pub fn min_eig_sym<T: Real>(m: &DMatrix<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    SymmetricEigen::new(sym(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(T::max_value().unwrap(), |a, b| a.min(b))
}

pub fn max_eig_sym<T: Real>(m: &DMatrix<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    SymmetricEigen::new(sym(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(T::min_value().unwrap(), |a, b| a.max(b))
}

/// Symmetric PSD square root; negative eigenvalues (round-off) are clipped.
pub fn psd_sqrt<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let eig = SymmetricEigen::new(sym(m));
    let d = eig.eigenvalues.map(|l| l.max(T::zero()).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

pub fn asymmetry<T: Real>(m: &DMatrix<T>) -> T {
    (m - m.transpose()).abs().max()
}

/// `sqrt(sum_j lambda_j ||X_j||_2^2)`, the Hilbert-Schmidt-type norm of a mode stack.
pub fn stack_norm<T: Real>(stack: &[DMatrix<T>], lambda: &[T]) -> T {
    stack
        .iter()
        .zip(lambda)
        .map(|(x, &l)| l * spectral_norm(x).powi(2))
        .fold(T::zero(), |a, b| a + b)
        .sqrt()
}

pub fn vec_stack_norm<T: Real>(stack: &[DVector<T>], lambda: &[T]) -> T {
    stack
        .iter()
        .zip(lambda)
        .map(|(v, &l)| l * v.norm_squared())
        .fold(T::zero(), |a, b| a + b)
        .sqrt()
}

/// `sum_j lambda_j L_j^T X R_j` for mode stacks `L`, `R`.
pub fn congruence_sum<T: Real>(
    left: &[DMatrix<T>],
    x: &DMatrix<T>,
    right: &[DMatrix<T>],
    lambda: &[T],
) -> DMatrix<T> {
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for ((l, r), &lam) in left.iter().zip(right).zip(lambda) {
        out += (l.transpose() * x * r) * lam;
    }
    out
}

fn one_norm<T: Real>(m: &DMatrix<T>) -> T {
    m.column_iter()
        .map(|c| c.iter().fold(T::zero(), |a, &b| a + b.abs()))
        .fold(T::zero(), |a, b| a.max(b))
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm<T: Real>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let norm = one_norm(a).to_f64_lossy();
    if !norm.is_finite() {
        return Err(MfgError::Expm {
            condition: f64::INFINITY,
            reason: "non-finite generator".into(),
        });
    }
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * T::lit(0.5f64.powi(s));

    let b: Vec<T> = PADE13.iter().map(|&c| T::lit(c)).collect();
    let id = DMatrix::<T>::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &id * b[1];
    let u = &scaled * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &id * b[0];

    let p = &v + &u;
    let q = &v - &u;
    let qn = one_norm(&q).to_f64_lossy();
    let lu = q.lu();
    let singular = || MfgError::Expm {
        condition: f64::INFINITY,
        reason: "singular Padé denominator".into(),
    };
    let inv = lu.try_inverse().ok_or_else(singular)?;
    let condition = qn * one_norm(&inv).to_f64_lossy();
    let mut r = lu.solve(&p).ok_or_else(singular)?;
    for _ in 0..s {
        r = &r * &r;
    }
    if r.iter().any(|x| !x.is_finite()) {
        return Err(MfgError::Expm {
            condition,
            reason: "overflow during squaring".into(),
        });
    }
    Ok(r)
}
