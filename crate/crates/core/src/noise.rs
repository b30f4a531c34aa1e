// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

//! Truncated Q-Wiener increments with counter-based per-path substreams.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{MfgError, Result};
use crate::grid::TimeGrid;
use crate::model::ModelSpec;
use crate::scalar::Real;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key derived from the run seed and a list of counters (replica, agent, ...).
pub fn substream_seed(seed: u64, counters: &[u64]) -> [u8; 32] {
    let mut state = seed;
    let mut acc = splitmix64(&mut state);
    for &c in counters {
        state ^= c.wrapping_mul(0xD6E8_FEB8_6659_FD93).rotate_left(17) ^ acc;
        acc = splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Independent generator for `(seed, counters)`; evaluation order does not matter.
pub fn substream(seed: u64, counters: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(substream_seed(seed, counters))
}

pub fn standard_normal<T: Real, R: rand::Rng>(rng: &mut R) -> T {
    let z: f64 = StandardNormal.sample(rng);
    T::lit(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    Idiosyncratic,
    Common,
}

impl NoiseKind {
    pub(crate) fn tag(self) -> u64 {
        match self {
            NoiseKind::Idiosyncratic => 0x1d10,
            NoiseKind::Common => 0xc0a1,
        }
    }
}

/// Per-mode Brownian increments of one path, unscaled by `sqrt(lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QWienerSample<T: Real> {
    /// `n_steps x modes`.
    pub increments: DMatrix<T>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble<T: Real> {
    pub grid: TimeGrid<T>,
    pub kind: NoiseKind,
    pub lambda: Vec<T>,
    pub paths: Vec<QWienerSample<T>>,
}

impl<T: Real> PathEnsemble<T> {
    /// Increment of the V-valued process in eigen-coordinates:
    /// component `j` is `sqrt(lambda_j) * dbeta_j`.
    pub fn v_increment(&self, path: usize, step: usize) -> DVector<T> {
        let inc = &self.paths[path].increments;
        DVector::from_iterator(
            self.lambda.len(),
            self.lambda
                .iter()
                .enumerate()
                .map(|(j, l)| l.sqrt() * inc[(step, j)]),
        )
    }
}

/// Fills `out` (row-major `n_steps x modes`) with N(0, dt) increments.
pub fn fill_increments<T: Real, R: rand::Rng>(rng: &mut R, dt: T, out: &mut DMatrix<T>) {
    let sd = dt.sqrt();
    for k in 0..out.nrows() {
        for j in 0..out.ncols() {
            out[(k, j)] = standard_normal::<T, _>(rng) * sd;
        }
    }
}

pub fn sample_q_wiener<T: Real>(
    spec: &ModelSpec<T>,
    grid: &TimeGrid<T>,
    n_paths: usize,
    seed: u64,
    kind: NoiseKind,
) -> Result<PathEnsemble<T>> {
    if n_paths == 0 {
        return Err(MfgError::InvalidArgument("n_paths must be at least 1".into()));
    }
    let lambda = match kind {
        NoiseKind::Idiosyncratic => spec.lambda_idio.clone(),
        NoiseKind::Common => spec.lambda_common.clone(),
    };
    let modes = lambda.len();
    let dt = grid.dt();
    let paths = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let key = substream_seed(seed, &[kind.tag(), p as u64]);
            let mut rng = ChaCha8Rng::from_seed(key);
            let mut increments = DMatrix::zeros(grid.n_steps(), modes);
            fill_increments(&mut rng, dt, &mut increments);
            QWienerSample {
                increments,
                seed: u64::from_le_bytes(key[..8].try_into().unwrap()),
            }
        })
        .collect();
    Ok(PathEnsemble {
        grid: *grid,
        kind,
        lambda,
        paths,
    })
}
