// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

//! Truncated game model: operators, noise spectra, cost weights and horizon.
//!
//! Diffusion operators are stored as mode stacks, one matrix (or vector) per
//! retained eigenmode of the noise covariance. The `sqrt(lambda_j)` scaling is
//! applied where the stack is used, so for instance the adjoint contraction
//! `D* Pi D` is `sum_j lambda_j D_j^T Pi D_j`.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};
use crate::linalg;
use crate::scalar::Real;

/// Numerical PSD threshold for `M`, `G` and `xi_cov`.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec<T: Real> {
    pub d_state: usize,
    pub d_ctrl: usize,
    pub m_idio: usize,
    pub m_common: usize,
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub f1: DMatrix<T>,
    pub d: Vec<DMatrix<T>>,
    pub f2: Vec<DMatrix<T>>,
    pub sigma: Vec<DVector<T>>,
    pub d0: Vec<DMatrix<T>>,
    pub f0: Vec<DMatrix<T>>,
    pub sigma0: Vec<DVector<T>>,
    pub m: DMatrix<T>,
    pub g: DMatrix<T>,
    pub f1hat: DMatrix<T>,
    pub f2hat: DMatrix<T>,
    pub lambda_idio: Vec<T>,
    pub lambda_common: Vec<T>,
    pub xi_bar: DVector<T>,
    pub xi_cov: DMatrix<T>,
    pub horizon: T,
}

impl<T: Real> ModelSpec<T> {
    /// All operators zero, unit eigenvalues, zero initial law.
    pub fn zeros(d_state: usize, d_ctrl: usize, m_idio: usize, m_common: usize, horizon: T) -> Self {
        let z = || DMatrix::zeros(d_state, d_state);
        Self {
            d_state,
            d_ctrl,
            m_idio,
            m_common,
            a: z(),
            b: DMatrix::zeros(d_state, d_ctrl),
            f1: z(),
            d: vec![z(); m_idio],
            f2: vec![z(); m_idio],
            sigma: vec![DVector::zeros(d_state); m_idio],
            d0: vec![z(); m_common],
            f0: vec![z(); m_common],
            sigma0: vec![DVector::zeros(d_state); m_common],
            m: z(),
            g: z(),
            f1hat: z(),
            f2hat: z(),
            lambda_idio: vec![T::one(); m_idio],
            lambda_common: vec![T::one(); m_common],
            xi_bar: DVector::zeros(d_state),
            xi_cov: z(),
            horizon,
        }
    }

    pub fn bbt(&self) -> DMatrix<T> {
        &self.b * self.b.transpose()
    }

    /// Both common-noise diffusion stacks vanish identically.
    pub fn is_det_diff(&self) -> bool {
        let zero = |s: &[DMatrix<T>]| s.iter().all(|x| x.iter().all(|v| *v == T::zero()));
        zero(&self.d0) && zero(&self.f0)
    }

    pub fn with_horizon(&self, horizon: T) -> Self {
        Self {
            horizon,
            ..self.clone()
        }
    }

    pub fn cast<U: Real>(&self) -> ModelSpec<U> {
        let c = |x: T| U::lit(x.to_f64_lossy());
        let cm = |m: &DMatrix<T>| m.map(c);
        let cv = |v: &DVector<T>| v.map(c);
        ModelSpec {
            d_state: self.d_state,
            d_ctrl: self.d_ctrl,
            m_idio: self.m_idio,
            m_common: self.m_common,
            a: cm(&self.a),
            b: cm(&self.b),
            f1: cm(&self.f1),
            d: self.d.iter().map(cm).collect(),
            f2: self.f2.iter().map(cm).collect(),
            sigma: self.sigma.iter().map(cv).collect(),
            d0: self.d0.iter().map(cm).collect(),
            f0: self.f0.iter().map(cm).collect(),
            sigma0: self.sigma0.iter().map(cv).collect(),
            m: cm(&self.m),
            g: cm(&self.g),
            f1hat: cm(&self.f1hat),
            f2hat: cm(&self.f2hat),
            lambda_idio: self.lambda_idio.iter().map(|&x| c(x)).collect(),
            lambda_common: self.lambda_common.iter().map(|&x| c(x)).collect(),
            xi_bar: cv(&self.xi_bar),
            xi_cov: cm(&self.xi_cov),
            horizon: c(self.horizon),
        }
    }

    /// Returns `Err(InvalidModel)` listing every violation.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = validate_model(self);
        if report.is_valid() {
            Ok(())
        } else {
            Err(MfgError::InvalidModel(report.to_string()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn mentions(&self, needle: &str) -> bool {
        self.violations
            .iter()
            .any(|v| v.field.contains(needle) || v.message.contains(needle))
    }

    fn push(&mut self, field: &str, message: String) {
        self.violations.push(Violation {
            field: field.to_string(),
            message,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "model is valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", v.field, v.message)?;
        }
        Ok(())
    }
}

/// Checks shapes, mode counts, PSD weights and positive eigenvalues.
pub fn validate_model<T: Real>(spec: &ModelSpec<T>) -> ValidationReport {
    let mut report = ValidationReport::default();
    let (n, k) = (spec.d_state, spec.d_ctrl);

    if n == 0 {
        report.push("d_state", "must be positive".into());
    }
    if k == 0 {
        report.push("d_ctrl", "must be positive".into());
    }
    if !(spec.horizon > T::zero()) {
        report.push("T", "horizon must be positive".into());
    }

    let mut shape = |field: &str, m: &DMatrix<T>, rows: usize, cols: usize| {
        if m.shape() != (rows, cols) {
            report.push(
                field,
                format!(
                    "dimension mismatch: shape {}x{}, expected {}x{}",
                    m.nrows(),
                    m.ncols(),
                    rows,
                    cols
                ),
            );
            false
        } else {
            true
        }
    };
    shape("A", &spec.a, n, n);
    shape("B", &spec.b, n, k);
    shape("F1", &spec.f1, n, n);
    shape("F1hat", &spec.f1hat, n, n);
    shape("F2hat", &spec.f2hat, n, n);
    let m_ok = shape("M", &spec.m, n, n);
    let g_ok = shape("G", &spec.g, n, n);
    let cov_ok = shape("xi_cov", &spec.xi_cov, n, n);

    for (name, stack, modes) in [
        ("D", &spec.d, spec.m_idio),
        ("F2", &spec.f2, spec.m_idio),
        ("D0", &spec.d0, spec.m_common),
        ("F0", &spec.f0, spec.m_common),
    ] {
        if stack.len() != modes {
            report.push(
                name,
                format!("dimension mismatch: {} modes, expected {}", stack.len(), modes),
            );
        }
        for (j, m) in stack.iter().enumerate() {
            if m.shape() != (n, n) {
                report.push(
                    name,
                    format!(
                        "dimension mismatch: mode {} has shape {}x{}, expected {}x{}",
                        j,
                        m.nrows(),
                        m.ncols(),
                        n,
                        n
                    ),
                );
            }
        }
    }
    for (name, stack, modes) in [
        ("sigma", &spec.sigma, spec.m_idio),
        ("sigma0", &spec.sigma0, spec.m_common),
    ] {
        if stack.len() != modes {
            report.push(
                name,
                format!("dimension mismatch: {} modes, expected {}", stack.len(), modes),
            );
        }
        for (j, v) in stack.iter().enumerate() {
            if v.len() != n {
                report.push(
                    name,
                    format!("dimension mismatch: mode {} has length {}, expected {}", j, v.len(), n),
                );
            }
        }
    }
    if spec.xi_bar.len() != n {
        report.push(
            "xi_bar",
            format!("dimension mismatch: length {}, expected {}", spec.xi_bar.len(), n),
        );
    }

    for (name, lam, modes) in [
        ("lambda_idio", &spec.lambda_idio, spec.m_idio),
        ("lambda_common", &spec.lambda_common, spec.m_common),
    ] {
        if lam.len() != modes {
            report.push(
                name,
                format!("dimension mismatch: {} eigenvalues, expected {}", lam.len(), modes),
            );
        }
        if let Some((j, l)) = lam.iter().enumerate().find(|(_, l)| !(**l > T::zero())) {
            report.push(name, format!("eigenvalue {} is {}, must be strictly positive", j, l));
        }
    }

    let tol = T::lit(PSD_TOL);
    for (name, mat, ok) in [("M", &spec.m, m_ok), ("G", &spec.g, g_ok), ("xi_cov", &spec.xi_cov, cov_ok)] {
        if !ok || mat.is_empty() {
            continue;
        }
        let asym = linalg::asymmetry(mat);
        if asym > tol {
            report.push(name, format!("{} not symmetric (max asymmetry {:.3e})", name, asym.to_f64_lossy()));
        }
        let min_eig = linalg::min_eig_sym(mat);
        if min_eig < -tol {
            report.push(name, format!("{} not PSD (min eigenvalue {:.3e})", name, min_eig.to_f64_lossy()));
        }
    }

    let all_finite = [&spec.a, &spec.b, &spec.f1, &spec.m, &spec.g, &spec.f1hat, &spec.f2hat, &spec.xi_cov]
        .iter()
        .all(|m| m.iter().all(|x| x.is_finite()));
    if !all_finite {
        report.push("operators", "non-finite entries".into());
    }
    report
}

/// On-disk model layout. Keys match the field names of the model; matrices
/// are row-major nested arrays, mode stacks are arrays of those.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub d_state: usize,
    pub d_ctrl: usize,
    pub m_idio: usize,
    pub m_common: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "F1")]
    pub f1: Vec<Vec<f64>>,
    #[serde(rename = "D", default)]
    pub d: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "F2", default)]
    pub f2: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub sigma: Vec<Vec<f64>>,
    #[serde(rename = "D0", default)]
    pub d0: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "F0", default)]
    pub f0: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub sigma0: Vec<Vec<f64>>,
    #[serde(rename = "M")]
    pub m: Vec<Vec<f64>>,
    #[serde(rename = "G")]
    pub g: Vec<Vec<f64>>,
    #[serde(rename = "F1hat")]
    pub f1hat: Vec<Vec<f64>>,
    #[serde(rename = "F2hat")]
    pub f2hat: Vec<Vec<f64>>,
    #[serde(default)]
    pub lambda_idio: Vec<f64>,
    #[serde(default)]
    pub lambda_common: Vec<f64>,
    pub xi_bar: Vec<f64>,
    pub xi_cov: Vec<Vec<f64>>,
    #[serde(rename = "T")]
    pub horizon: f64,
}

fn rows_to_matrix(field: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(r) = rows.iter().find(|r| r.len() != ncols) {
        return Err(MfgError::Config(format!(
            "{field}: ragged matrix (row of length {} in a {}-column matrix)",
            r.len(),
            ncols
        )));
    }
    Ok(DMatrix::from_row_iterator(nrows, ncols, rows.iter().flatten().copied()))
}

fn matrix_to_rows<T: Real>(m: &DMatrix<T>) -> Vec<Vec<f64>> {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.to_f64_lossy()).collect())
        .collect()
}

impl ModelFile {
    pub fn into_spec(self) -> Result<ModelSpec<f64>> {
        let stack = |field: &str, s: &[Vec<Vec<f64>>]| -> Result<Vec<DMatrix<f64>>> {
            s.iter().map(|m| rows_to_matrix(field, m)).collect()
        };
        let vstack = |s: &[Vec<f64>]| s.iter().map(|v| DVector::from_column_slice(v)).collect();
        Ok(ModelSpec {
            d_state: self.d_state,
            d_ctrl: self.d_ctrl,
            m_idio: self.m_idio,
            m_common: self.m_common,
            a: rows_to_matrix("A", &self.a)?,
            b: rows_to_matrix("B", &self.b)?,
            f1: rows_to_matrix("F1", &self.f1)?,
            d: stack("D", &self.d)?,
            f2: stack("F2", &self.f2)?,
            sigma: vstack(&self.sigma),
            d0: stack("D0", &self.d0)?,
            f0: stack("F0", &self.f0)?,
            sigma0: vstack(&self.sigma0),
            m: rows_to_matrix("M", &self.m)?,
            g: rows_to_matrix("G", &self.g)?,
            f1hat: rows_to_matrix("F1hat", &self.f1hat)?,
            f2hat: rows_to_matrix("F2hat", &self.f2hat)?,
            lambda_idio: self.lambda_idio,
            lambda_common: self.lambda_common,
            xi_bar: DVector::from_vec(self.xi_bar),
            xi_cov: rows_to_matrix("xi_cov", &self.xi_cov)?,
            horizon: self.horizon,
        })
    }

    pub fn from_spec<T: Real>(spec: &ModelSpec<T>) -> Self {
        let vec = |v: &DVector<T>| v.iter().map(|x| x.to_f64_lossy()).collect::<Vec<_>>();
        let lam = |l: &[T]| l.iter().map(|x| x.to_f64_lossy()).collect::<Vec<_>>();
        Self {
            d_state: spec.d_state,
            d_ctrl: spec.d_ctrl,
            m_idio: spec.m_idio,
            m_common: spec.m_common,
            a: matrix_to_rows(&spec.a),
            b: matrix_to_rows(&spec.b),
            f1: matrix_to_rows(&spec.f1),
            d: spec.d.iter().map(matrix_to_rows).collect(),
            f2: spec.f2.iter().map(matrix_to_rows).collect(),
            sigma: spec.sigma.iter().map(vec).collect(),
            d0: spec.d0.iter().map(matrix_to_rows).collect(),
            f0: spec.f0.iter().map(matrix_to_rows).collect(),
            sigma0: spec.sigma0.iter().map(vec).collect(),
            m: matrix_to_rows(&spec.m),
            g: matrix_to_rows(&spec.g),
            f1hat: matrix_to_rows(&spec.f1hat),
            f2hat: matrix_to_rows(&spec.f2hat),
            lambda_idio: lam(&spec.lambda_idio),
            lambda_common: lam(&spec.lambda_common),
            xi_bar: vec(&spec.xi_bar),
            xi_cov: matrix_to_rows(&spec.xi_cov),
            horizon: spec.horizon.to_f64_lossy(),
        }
    }
}

/// Parses a model from TOML text.
pub fn parse_model_toml(text: &str) -> Result<ModelSpec<f64>> {
    let file: ModelFile = toml::from_str(text).map_err(|e| MfgError::Config(e.to_string()))?;
    file.into_spec()
}

pub fn parse_model_json(text: &str) -> Result<ModelSpec<f64>> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| MfgError::Config(e.to_string()))?;
    file.into_spec()
}

/// Loads a model file; `.json` is read as JSON, anything else as TOML.
pub fn load_model(path: &Path) -> Result<ModelSpec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| MfgError::Config(format!("{}: {}", path.display(), e)))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => parse_model_json(&text),
        _ => parse_model_toml(&text),
    }
}

pub fn model_to_toml<T: Real>(spec: &ModelSpec<T>) -> String {
    toml::to_string(&ModelFile::from_spec(spec)).expect("model serializes")
}
