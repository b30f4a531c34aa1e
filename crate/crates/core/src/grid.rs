// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

use crate::error::{MfgError, Result};
use crate::scalar::Real;

/// Uniform time grid on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T: Real> {
    n_steps: usize,
    horizon: T,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(n_steps: usize, horizon: T) -> Result<Self> {
        if n_steps == 0 {
            return Err(MfgError::InvalidArgument("n_steps must be positive".into()));
        }
        if !(horizon > T::zero()) {
            return Err(MfgError::InvalidArgument("horizon must be positive".into()));
        }
        Ok(Self { n_steps, horizon })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_knots(&self) -> usize {
        self.n_steps + 1
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn dt(&self) -> T {
        self.horizon / T::usize(self.n_steps)
    }

    /// Knot `t_k = k dt`; the last knot is exactly `T`.
    pub fn t(&self, k: usize) -> T {
        if k == self.n_steps {
            self.horizon
        } else {
            T::usize(k) * self.dt()
        }
    }

    pub fn knots(&self) -> impl Iterator<Item = T> + '_ {
        (0..=self.n_steps).map(move |k| self.t(k))
    }

    /// Same horizon, twice the steps.
    pub fn refined(&self) -> Self {
        Self {
            n_steps: 2 * self.n_steps,
            horizon: self.horizon,
        }
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.n_steps == other.n_steps && self.horizon == other.horizon
    }

    pub fn cast<U: Real>(&self) -> TimeGrid<U> {
        TimeGrid {
            n_steps: self.n_steps,
            horizon: U::lit(self.horizon.to_f64_lossy()),
        }
    }
}
