// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

pub mod formula;

use hilbert_mfg::model::ModelSpec;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0) * scale)
}

pub fn uniform_vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0) * scale)
}

/// Random orthogonal matrix from the QR factor of a random square.
pub fn orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    uniform_matrix(rng, n, n, 1.0).qr().q()
}

/// `Q diag(d) Q^T`.
pub fn with_eigenbasis(q: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    q * DMatrix::from_diagonal(&DVector::from_column_slice(d)) * q.transpose()
}

/// Every operator and stack filled with random entries of the given size.
pub fn random_spec(seed: u64, d: usize, m_idio: usize, m_common: usize, horizon: f64) -> ModelSpec<f64> {
    let mut r = rng(seed);
    let mut spec = ModelSpec::zeros(d, 1 + d / 2, m_idio, m_common, horizon);
    spec.a = uniform_matrix(&mut r, d, d, 0.8);
    spec.b = uniform_matrix(&mut r, d, spec.d_ctrl, 0.6);
    spec.f1 = uniform_matrix(&mut r, d, d, 0.3);
    for j in 0..m_idio {
        spec.d[j] = uniform_matrix(&mut r, d, d, 0.3);
        spec.f2[j] = uniform_matrix(&mut r, d, d, 0.3);
        spec.sigma[j] = uniform_vector(&mut r, d, 0.5);
        spec.lambda_idio[j] = 1.0 / (1.0 + j as f64).powi(2);
    }
    for j in 0..m_common {
        spec.d0[j] = uniform_matrix(&mut r, d, d, 0.2);
        spec.f0[j] = uniform_matrix(&mut r, d, d, 0.2);
        spec.sigma0[j] = uniform_vector(&mut r, d, 0.5);
        spec.lambda_common[j] = 0.5 / (1.0 + j as f64);
    }
    let l = uniform_matrix(&mut r, d, d, 1.0);
    spec.m = &l * l.transpose() / d as f64;
    let l = uniform_matrix(&mut r, d, d, 1.0);
    spec.g = &l * l.transpose() / d as f64;
    spec.f1hat = uniform_matrix(&mut r, d, d, 0.4);
    spec.f2hat = uniform_matrix(&mut r, d, d, 0.4);
    spec.xi_bar = uniform_vector(&mut r, d, 1.0);
    let l = uniform_matrix(&mut r, d, d, 0.3);
    spec.xi_cov = &l * l.transpose();
    spec
}

/// A spec meeting the sufficient conditions for a bounded decoupling field:
/// `D = F2 = F1 = 0`, `D0 = F0 = 0`, `F1hat <= 0` commuting with `M`,
/// `F2hat <= 0` commuting with `G`.
pub fn decomposable_spec(seed: u64, d: usize, m_common: usize, a_scale: f64) -> ModelSpec<f64> {
    let mut r = rng(seed ^ 0xdec0);
    let mut spec = ModelSpec::zeros(d, d, 1, m_common, 1.0);
    spec.a = uniform_matrix(&mut r, d, d, a_scale);
    spec.b = uniform_matrix(&mut r, d, d, 0.7);
    spec.sigma[0] = uniform_vector(&mut r, d, 0.4);
    let qm = orthogonal(&mut r, d);
    let pos = |r: &mut ChaCha8Rng| (0..d).map(|_| r.random_range(0.2..1.5)).collect::<Vec<_>>();
    let neg = |r: &mut ChaCha8Rng| (0..d).map(|_| -r.random_range(0.0..0.8)).collect::<Vec<_>>();
    spec.m = with_eigenbasis(&qm, &pos(&mut r));
    spec.f1hat = with_eigenbasis(&qm, &neg(&mut r));
    let qg = orthogonal(&mut r, d);
    spec.g = with_eigenbasis(&qg, &pos(&mut r));
    spec.f2hat = with_eigenbasis(&qg, &neg(&mut r));
    for j in 0..m_common {
        spec.sigma0[j] = uniform_vector(&mut r, d, 0.4);
    }
    spec.xi_bar = uniform_vector(&mut r, d, 1.0);
    spec
}

/// Deterministic-diffusion spec used by the simulation experiments: two
/// states, one control, one idiosyncratic and one common mode, all couplings
/// present except `D0`, `F0`.
pub fn simulation_spec() -> ModelSpec<f64> {
    let mut spec = ModelSpec::zeros(2, 1, 1, 1, 1.0);
    spec.a = DMatrix::from_row_slice(2, 2, &[-0.4, 0.6, -0.6, -0.3]);
    spec.b = DMatrix::from_row_slice(2, 1, &[1.0, 0.4]);
    spec.f1 = DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.1, 0.2]);
    spec.d[0] = DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.0, 0.1]);
    spec.f2[0] = DMatrix::from_row_slice(2, 2, &[0.1, 0.05, 0.0, 0.1]);
    spec.sigma[0] = DVector::from_vec(vec![0.5, 0.3]);
    spec.sigma0[0] = DVector::from_vec(vec![0.3, -0.2]);
    spec.m = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.8]);
    spec.g = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]);
    spec.f1hat = DMatrix::identity(2, 2) * 0.5;
    spec.f2hat = DMatrix::identity(2, 2) * 0.3;
    spec.xi_bar = DVector::from_vec(vec![1.0, -0.5]);
    spec.xi_cov = DMatrix::from_row_slice(2, 2, &[0.3, 0.05, 0.05, 0.2]);
    spec
}

/// Small-norm spec with every coupling, including `D0` and `F0`, for the
/// short-horizon fixed point.
pub fn certified_spec(horizon: f64) -> ModelSpec<f64> {
    let mut spec = ModelSpec::zeros(2, 1, 1, 1, horizon);
    spec.a = DMatrix::from_row_slice(2, 2, &[-0.5, 0.4, -0.4, 0.1]);
    spec.b = DMatrix::from_row_slice(2, 1, &[0.5, 0.2]);
    spec.f1 = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.0, 0.2]);
    spec.d[0] = DMatrix::identity(2, 2) * 0.2;
    spec.f2[0] = DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.1, 0.1]);
    spec.sigma[0] = DVector::from_vec(vec![0.3, 0.2]);
    spec.d0[0] = DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.0, 0.1]);
    spec.f0[0] = DMatrix::from_row_slice(2, 2, &[0.2, 0.1, 0.0, 0.2]);
    spec.sigma0[0] = DVector::from_vec(vec![0.3, -0.1]);
    spec.m = DMatrix::identity(2, 2);
    spec.g = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.6]);
    spec.f1hat = DMatrix::identity(2, 2) * 0.4;
    spec.f2hat = DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.1, 0.2]);
    spec.xi_bar = DVector::from_vec(vec![1.0, 0.5]);
    spec
}

/// `certified_spec` with the common-noise diffusion removed.
pub fn certified_det_diff_spec(horizon: f64) -> ModelSpec<f64> {
    let mut spec = certified_spec(horizon);
    spec.d0[0] = DMatrix::zeros(2, 2);
    spec.f0[0] = DMatrix::zeros(2, 2);
    spec
}
