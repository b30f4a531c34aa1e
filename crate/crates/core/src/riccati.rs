// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

//! Backward operator Riccati equations: the feedback gain `Pi`, the decoupling
//! field `eta` (and its Yosida approximants), and the auxiliary `R` with
//! `eta = R - Pi`.
//!
//! All equations are integrated from `T` to `0` with classical RK4. Stages
//! between knots need `Pi` (and `eta`) off the grid; those are reconstructed
//! with cubic Hermite interpolation from knot values and knot derivatives,
//! which keeps the scheme fourth order.

use std::fmt;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{MfgError, Result};
use crate::grid::TimeGrid;
use crate::linalg;
use crate::model::ModelSpec;
use crate::scalar::Real;
use crate::semigroup;

/// Norm beyond which a solve is declared blown up.
pub const BLOW_UP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RiccatiKind {
    Pi,
    Eta,
    EtaN(f64),
    R,
}

impl fmt::Display for RiccatiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RiccatiKind::Pi => write!(f, "Pi"),
            RiccatiKind::Eta => write!(f, "eta"),
            RiccatiKind::EtaN(n) => write!(f, "eta_n(n={n})"),
            RiccatiKind::R => write!(f, "R"),
        }
    }
}

/// Matrix path on the grid with knot derivatives for Hermite interpolation.
#[derive(Debug, Clone)]
pub struct RiccatiSolution<T: Real> {
    pub grid: TimeGrid<T>,
    pub kind: RiccatiKind,
    pub values: Vec<DMatrix<T>>,
    pub derivatives: Vec<DMatrix<T>>,
    /// Whether the path was kept symmetric by post-step symmetrization.
    pub symmetric: bool,
}

/// Position inside interval `[t_k, t_{k+1}]`: `theta = 0` is `t_k`, `1` is `t_{k+1}`.
#[derive(Debug, Clone, Copy)]
pub struct At<T> {
    pub interval: usize,
    pub theta: T,
}

impl<T: Real> At<T> {
    pub fn knot(k: usize) -> Self {
        Self {
            interval: k,
            theta: T::zero(),
        }
    }

    pub fn time(&self, grid: &TimeGrid<T>) -> T {
        grid.t(self.interval) + self.theta * grid.dt()
    }
}

fn hermite<T: Real>(
    p0: &DMatrix<T>,
    m0: &DMatrix<T>,
    p1: &DMatrix<T>,
    m1: &DMatrix<T>,
    h: T,
    theta: T,
) -> DMatrix<T> {
    let (two, three) = (T::lit(2.0), T::lit(3.0));
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = two * t3 - three * t2 + T::one();
    let h10 = t3 - two * t2 + theta;
    let h01 = -two * t3 + three * t2;
    let h11 = t3 - t2;
    p0 * h00 + m0 * (h10 * h) + p1 * h01 + m1 * (h11 * h)
}

impl<T: Real> RiccatiSolution<T> {
    pub fn at_knot(&self, k: usize) -> &DMatrix<T> {
        &self.values[k]
    }

    pub fn initial(&self) -> &DMatrix<T> {
        &self.values[0]
    }

    pub fn terminal(&self) -> &DMatrix<T> {
        self.values.last().unwrap()
    }

    /// Cubic Hermite value inside an interval; exact at knots.
    pub fn at(&self, at: At<T>) -> DMatrix<T> {
        let k = at.interval;
        if at.theta == T::zero() {
            return self.values[k].clone();
        }
        if at.theta == T::one() {
            return self.values[k + 1].clone();
        }
        hermite(
            &self.values[k],
            &self.derivatives[k],
            &self.values[k + 1],
            &self.derivatives[k + 1],
            self.grid.dt(),
            at.theta,
        )
    }

    /// `max_k ||X_k - Y_k||_2` against another path on the same grid.
    pub fn sup_gap(&self, other: &RiccatiSolution<T>) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| linalg::spectral_norm(&(a - b)))
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// One row per knot: `t` then the row-major matrix entries.
    pub fn to_csv(&self) -> String {
        let n = self.values.first().map_or(0, |m| m.nrows());
        let mut out = String::from("t");
        for i in 0..n {
            for j in 0..n {
                write!(out, ",v_{i}_{j}").unwrap();
            }
        }
        out.push('\n');
        for (k, v) in self.values.iter().enumerate() {
            write!(out, "{}", self.grid.t(k).to_f64_lossy()).unwrap();
            for i in 0..v.nrows() {
                for j in 0..v.ncols() {
                    write!(out, ",{}", v[(i, j)].to_f64_lossy()).unwrap();
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Backward RK4 from `terminal` at `T` to `0`. `rhs(at, X)` is `dX/dt`.
///
/// On blow-up the whole solve is retried once with two sub-steps per
/// interval before failing.
fn integrate_backward<T, F>(
    grid: &TimeGrid<T>,
    terminal: &DMatrix<T>,
    kind: RiccatiKind,
    symmetrize: bool,
    rhs: F,
) -> Result<RiccatiSolution<T>>
where
    T: Real,
    F: Fn(At<T>, &DMatrix<T>) -> DMatrix<T>,
{
    match integrate_with_substeps(grid, terminal, kind, symmetrize, &rhs, 1) {
        Err(MfgError::BlowUp { .. }) => integrate_with_substeps(grid, terminal, kind, symmetrize, &rhs, 2),
        other => other,
    }
}

fn integrate_with_substeps<T, F>(
    grid: &TimeGrid<T>,
    terminal: &DMatrix<T>,
    kind: RiccatiKind,
    symmetrize: bool,
    rhs: &F,
    substeps: usize,
) -> Result<RiccatiSolution<T>>
where
    T: Real,
    F: Fn(At<T>, &DMatrix<T>) -> DMatrix<T>,
{
    let n = grid.n_steps();
    let h = grid.dt() / T::usize(substeps);
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    let sub = T::one() / T::usize(substeps);
    let limit = T::lit(BLOW_UP);

    let mut values = vec![DMatrix::zeros(0, 0); n + 1];
    values[n] = terminal.clone();
    let mut y = terminal.clone();
    for k in (0..n).rev() {
        for s in (0..substeps).rev() {
            let hi = T::usize(s + 1) * sub;
            let mid = (T::usize(s) + half) * sub;
            let lo = T::usize(s) * sub;
            let at = |theta| At { interval: k, theta };
            let k1 = rhs(at(hi), &y);
            let k2 = rhs(at(mid), &(&y - &k1 * (h * half)));
            let k3 = rhs(at(mid), &(&y - &k2 * (h * half)));
            let k4 = rhs(at(lo), &(&y - &k3 * h));
            y -= (k1 + (k2 + k3) * T::lit(2.0) + k4) * (h * sixth);
            if symmetrize {
                y = linalg::sym(&y);
            }
            let norm = y.abs().max();
            if !norm.is_finite() || norm > limit {
                return Err(MfgError::BlowUp {
                    kind: kind.to_string(),
                    time: (grid.t(k) + lo * grid.dt()).to_f64_lossy(),
                    norm: norm.to_f64_lossy(),
                });
            }
        }
        values[k] = y.clone();
    }
    let derivatives = values
        .iter()
        .enumerate()
        .map(|(k, v)| rhs(At::knot(k), v))
        .collect();
    Ok(RiccatiSolution {
        grid: *grid,
        kind,
        values,
        derivatives,
        symmetric: symmetrize,
    })
}

fn pi_rhs<T: Real>(spec: &ModelSpec<T>, include_common_diffusion: bool, bbt: &DMatrix<T>, pi: &DMatrix<T>) -> DMatrix<T> {
    let mut gen = spec.a.transpose() * pi + pi * &spec.a - pi * bbt * pi
        + linalg::congruence_sum(&spec.d, pi, &spec.d, &spec.lambda_idio)
        + &spec.m;
    if include_common_diffusion {
        gen += linalg::congruence_sum(&spec.d0, pi, &spec.d0, &spec.lambda_common);
    }
    -gen
}

/// Feedback-gain Riccati equation with `Pi(T) = G`.
pub fn solve_pi_riccati<T: Real>(
    spec: &ModelSpec<T>,
    grid: &TimeGrid<T>,
    include_common_diffusion: bool,
) -> Result<RiccatiSolution<T>> {
    let bbt = spec.bbt();
    integrate_backward(grid, &spec.g, RiccatiKind::Pi, true, |_, pi| {
        pi_rhs(spec, include_common_diffusion, &bbt, pi)
    })
}

/// `Lambda = sum_j lambda_j D_j^T Pi F2_j + Pi F1 - M F1hat` at each knot.
#[derive(Debug, Clone)]
pub struct LambdaPath<T: Real> {
    pub grid: TimeGrid<T>,
    pub values: Vec<DMatrix<T>>,
}

pub fn lambda_of<T: Real>(spec: &ModelSpec<T>, pi: &DMatrix<T>) -> DMatrix<T> {
    linalg::congruence_sum(&spec.d, pi, &spec.f2, &spec.lambda_idio) + pi * &spec.f1 - &spec.m * &spec.f1hat
}

pub fn compute_lambda<T: Real>(spec: &ModelSpec<T>, pi: &RiccatiSolution<T>) -> Result<LambdaPath<T>> {
    if pi.kind != RiccatiKind::Pi {
        return Err(MfgError::InvalidArgument(format!(
            "Lambda needs a Pi solution, got {}",
            pi.kind
        )));
    }
    Ok(LambdaPath {
        grid: pi.grid,
        values: pi.values.iter().map(|p| lambda_of(spec, p)).collect(),
    })
}

fn check_same_grid<T: Real>(a: &TimeGrid<T>, b: &TimeGrid<T>, what: &str) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(MfgError::GridMismatch(format!(
            "{what}: {} steps on [0, {}] vs {} steps on [0, {}]",
            a.n_steps(),
            a.horizon().to_f64_lossy(),
            b.n_steps(),
            b.horizon().to_f64_lossy()
        )))
    }
}

/// Relative asymmetry threshold for deciding that `eta` stays symmetric.
const SYM_TOL: f64 = 1e-12;

fn is_symmetric<T: Real>(m: &DMatrix<T>) -> bool {
    let scale = m.abs().max().max(T::one());
    linalg::asymmetry(m) <= T::lit(SYM_TOL) * scale
}

/// Decoupling-field Riccati equation with `eta(T) = -G F2hat`.
///
/// With `yosida_n`, `A` is replaced by `A_n = n A (nI - A)^{-1}`. The path is
/// symmetrized after every step only when the equation preserves symmetry:
/// symmetric terminal value, `F1 = 0` and symmetric `Lambda` at every knot.
pub fn solve_eta_riccati<T: Real>(
    spec: &ModelSpec<T>,
    grid: &TimeGrid<T>,
    pi: &RiccatiSolution<T>,
    lam: &LambdaPath<T>,
    yosida_n: Option<T>,
) -> Result<RiccatiSolution<T>> {
    check_same_grid(grid, &pi.grid, "eta vs Pi")?;
    check_same_grid(grid, &lam.grid, "eta vs Lambda")?;
    let (a, kind) = match yosida_n {
        Some(n) => (
            semigroup::yosida(&spec.a, n)?.a_n,
            RiccatiKind::EtaN(n.to_f64_lossy()),
        ),
        None => (spec.a.clone(), RiccatiKind::Eta),
    };
    let terminal = -(&spec.g * &spec.f2hat);
    let f1_zero = spec.f1.iter().all(|x| *x == T::zero());
    let symmetrize = is_symmetric(&terminal) && f1_zero && lam.values.iter().all(is_symmetric);

    let bbt = spec.bbt();
    let at_ = a.transpose();
    let lambda_at = |at: At<T>| {
        if at.theta == T::zero() {
            lam.values[at.interval].clone()
        } else if at.theta == T::one() {
            lam.values[at.interval + 1].clone()
        } else {
            lambda_of(spec, &pi.at(at))
        }
    };
    integrate_backward(grid, &terminal, kind, symmetrize, |at, eta| {
        let p = pi.at(at);
        let closed = &a - &bbt * &p;
        let closed_t = &at_ - &p * &bbt;
        -(eta * closed + closed_t * eta + eta * &spec.f1 - eta * &bbt * eta + lambda_at(at))
    })
}

/// Auxiliary Riccati equation with `R(T) = G - G F2hat`; under `F1 = 0`
/// its solution satisfies `eta = R - Pi`.
pub fn solve_r_riccati<T: Real>(
    spec: &ModelSpec<T>,
    grid: &TimeGrid<T>,
    lam: &LambdaPath<T>,
    pi: &RiccatiSolution<T>,
) -> Result<RiccatiSolution<T>> {
    check_same_grid(grid, &pi.grid, "R vs Pi")?;
    check_same_grid(grid, &lam.grid, "R vs Lambda")?;
    let terminal = &spec.g - &spec.g * &spec.f2hat;
    let symmetrize = is_symmetric(&terminal) && lam.values.iter().all(is_symmetric);
    let bbt = spec.bbt();
    integrate_backward(grid, &terminal, RiccatiKind::R, symmetrize, |at, r| {
        let p = pi.at(at);
        let lambda = if at.theta == T::zero() {
            lam.values[at.interval].clone()
        } else if at.theta == T::one() {
            lam.values[at.interval + 1].clone()
        } else {
            lambda_of(spec, &p)
        };
        let dpd = linalg::congruence_sum(&spec.d, &p, &spec.d, &spec.lambda_idio);
        -(r * &spec.a + spec.a.transpose() * r - r * &bbt * r + lambda + dpd + &spec.m)
    })
}

/// Checks of the sufficient conditions for uniqueness of the decoupled solution.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    /// `F1 = 0`, checked literally.
    pub f1_zero: bool,
    /// Reported separately because the drift/diffusion wording is ambiguous.
    pub f2_zero: bool,
    pub terminal_min_eig: f64,
    pub terminal_asymmetry: f64,
    pub terminal_pass: bool,
    pub lambda_min_eigs: Vec<f64>,
    pub lambda_max_asymmetry: f64,
    pub lambda_pass: bool,
    /// `D0 = 0` and `F0 = 0`.
    pub common_diffusion_zero: bool,
}

impl AssumptionReport {
    pub fn passes(&self) -> bool {
        self.f1_zero && self.terminal_pass && self.lambda_pass && self.common_diffusion_zero
    }
}

pub fn check_uniqueness_assumptions<T: Real>(spec: &ModelSpec<T>, lam: &LambdaPath<T>) -> AssumptionReport {
    let tol = 1e-10;
    let terminal = -(&spec.g * &spec.f2hat);
    let terminal_min_eig = linalg::min_eig_sym(&terminal).to_f64_lossy();
    let terminal_asymmetry = linalg::asymmetry(&terminal).to_f64_lossy();
    let lambda_min_eigs: Vec<f64> = lam
        .values
        .iter()
        .map(|l| linalg::min_eig_sym(l).to_f64_lossy())
        .collect();
    let lambda_max_asymmetry = lam
        .values
        .iter()
        .map(|l| linalg::asymmetry(l).to_f64_lossy())
        .fold(0.0, f64::max);
    AssumptionReport {
        f1_zero: spec.f1.iter().all(|x| *x == T::zero()),
        f2_zero: spec.f2.iter().all(|m| m.iter().all(|x| *x == T::zero())),
        terminal_min_eig,
        terminal_asymmetry,
        terminal_pass: terminal_min_eig >= -tol && terminal_asymmetry <= tol,
        lambda_pass: lambda_min_eigs.iter().all(|&e| e >= -tol) && lambda_max_asymmetry <= tol,
        lambda_min_eigs,
        lambda_max_asymmetry,
        common_diffusion_zero: spec.is_det_diff(),
    }
}
