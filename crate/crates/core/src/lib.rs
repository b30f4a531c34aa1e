// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

//! Galerkin-truncated linear-quadratic mean field games with common noise.
//!
//! The crate solves the Riccati equations and offset backward equation of the
//! limiting control problem, finds the mean field by Picard iteration (short
//! horizons) or through a decoupling field (deterministic common-noise
//! diffusion), and checks the finite-population approximation by simulating
//! the `N`-player game.
//!
//! Everything is generic over the scalar type; the aliases at the crate root
//! fix it to `f64`.

// Guards are written `!(x > 0)` so that NaN fails them; mode loops index
// several parallel stacks at once.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod consistency;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod noise;
pub mod riccati;
pub mod scalar;
pub mod semigroup;
pub mod simulate;
pub mod tree;

pub use error::{MfgError, Result};
pub use scalar::Real;

pub type ModelSpec = model::ModelSpec<f64>;
pub type TimeGrid = grid::TimeGrid<f64>;
pub type NoiseTree = tree::NoiseTree<f64>;
pub type RiccatiSolution = riccati::RiccatiSolution<f64>;
pub type SemigroupTable = semigroup::SemigroupTable<f64>;
pub type MeanFieldCandidate = consistency::MeanFieldCandidate<f64>;

pub type ModelSpecF32 = model::ModelSpec<f32>;
pub type TimeGridF32 = grid::TimeGrid<f32>;
