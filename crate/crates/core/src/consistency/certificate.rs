// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

//! Explicit small-horizon contraction constants for the consistency map.

use serde::{Deserialize, Serialize};

use crate::grid::TimeGrid;
use crate::linalg;
use crate::model::ModelSpec;
use crate::scalar::Real;
use crate::semigroup;

/// Spectral norms of the model operators. Mode stacks use
/// `sqrt(sum_j lambda_j ||X_j||^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorNorms {
    pub b: f64,
    pub d: f64,
    pub d0: f64,
    pub f0: f64,
    pub f1: f64,
    pub f2: f64,
    pub m: f64,
    pub g: f64,
    pub f1hat: f64,
    pub f2hat: f64,
}

impl OperatorNorms {
    pub fn of<T: Real>(spec: &ModelSpec<T>) -> Self {
        let n = |m: &nalgebra::DMatrix<T>| linalg::spectral_norm(m).to_f64_lossy();
        let idio = |s: &[nalgebra::DMatrix<T>]| linalg::stack_norm(s, &spec.lambda_idio).to_f64_lossy();
        let common = |s: &[nalgebra::DMatrix<T>]| linalg::stack_norm(s, &spec.lambda_common).to_f64_lossy();
        Self {
            b: n(&spec.b),
            d: idio(&spec.d),
            d0: common(&spec.d0),
            f0: common(&spec.f0),
            f1: n(&spec.f1),
            f2: idio(&spec.f2),
            m: n(&spec.m),
            g: n(&spec.g),
            f1hat: n(&spec.f1hat),
            f2hat: n(&spec.f2hat),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionCertificate {
    pub horizon: f64,
    pub m_t: f64,
    pub alpha_t: f64,
    pub c_pi: f64,
    /// `+inf` when `alpha_t >= 1`.
    pub c_1: f64,
    pub c_2: f64,
    pub c_3: f64,
    /// `C_2 exp(T C_3)`; the squared Lipschitz bound of the consistency map.
    pub product: f64,
    pub passes_alpha: bool,
    pub passes_contraction: bool,
    pub operator_norms: OperatorNorms,
}

impl ContractionCertificate {
    /// Bound on the contraction factor in the (unsquared) sup-L2 norm.
    pub fn lipschitz_bound(&self) -> f64 {
        self.product.sqrt()
    }
}

/// Evaluates every constant from operator norms, `M_T` and `T`.
pub fn certificate_from_norms(norms: OperatorNorms, m_t: f64, horizon: f64) -> ContractionCertificate {
    let t = horizon;
    let m2 = m_t * m_t;
    let b4 = norms.b.powi(4);

    let c_pi = 2.0 * m2 * (8.0 * t * m2 * (norms.d.powi(2) + norms.d0.powi(2)) * (norms.g + t * norms.m)).exp();
    let alpha_t = 16.0 * m2 * t * norms.d0.powi(2);
    let passes_alpha = alpha_t < 1.0;

    let (c_1, c_2) = if passes_alpha {
        let k = 1.0 - alpha_t;
        let bracket = (norms.g * norms.f2hat).powi(2)
            + 16.0
                * t
                * t
                * ((norms.m * norms.f1hat).powi(2)
                    + c_pi * c_pi
                        * ((norms.d * norms.f2).powi(2) + (norms.d0 * norms.f0).powi(2) + norms.f1.powi(2)));
        let c_1 = 2.0 * m2 / k * (8.0 * m2 / k * c_pi * c_pi * b4).exp() * bracket;
        let c_2 = 5.0 * m2 * t * (t * (b4 * c_1 + norms.f1.powi(2)) + norms.f0.powi(2));
        (c_1, c_2)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    let c_3 = 5.0 * m2 * (norms.d0.powi(2) + t * b4 * c_pi * c_pi);
    let product = c_2 * (t * c_3).exp();
    ContractionCertificate {
        horizon,
        m_t,
        alpha_t,
        c_pi,
        c_1,
        c_2,
        c_3,
        product,
        passes_alpha,
        passes_contraction: passes_alpha && product < 1.0,
        operator_norms: norms,
    }
}

pub fn contraction_certificate<T: Real>(spec: &ModelSpec<T>, grid: &TimeGrid<T>) -> ContractionCertificate {
    let horizon = grid.horizon();
    let m_t = semigroup::growth_bound(&spec.a, horizon).to_f64_lossy();
    certificate_from_norms(OperatorNorms::of(spec), m_t, horizon.to_f64_lossy())
}

impl ContractionCertificate {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("certificate serializes")
    }
}
