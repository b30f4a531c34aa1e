// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

//! Mean-field consistency: contraction certificate, offset BSDE on the noise
//! tree, the map `g -> y_g`, Picard iteration and the decoupling-field
//! construction.

mod bsde;
mod candidate;
mod certificate;
mod decoupled;
mod picard;
mod residual;

pub use bsde::{mean_field_map, solve_offset_bsde, OffsetSolution};
pub use candidate::{tree_to_csv, CandidateValues, MeanFieldCandidate, TreeValues};
pub use certificate::{certificate_from_norms, contraction_certificate, ContractionCertificate, OperatorNorms};
pub use decoupled::{solve_decoupled, solve_varsigma, DecoupledSolution, Varsigma};
pub use picard::{measured_lipschitz_sq, picard_fixed_point, FixedPointResult, PicardOptions};
pub use residual::{fbsee_residual, ResidualReport};
