// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

//! Scalar abstraction shared by every solver in the crate.

use nalgebra::RealField;
use num_traits::{FromPrimitive, NumCast, ToPrimitive};

/// Floating point scalar the solvers are generic over (`f32` or `f64`).
///
/// Exact or rational scalars are not supported: every routine needs
/// `exp`, `sqrt` and symmetric eigen-decompositions.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + NumCast {
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    fn usize(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize representable")
    }

    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
