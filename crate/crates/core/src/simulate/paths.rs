// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

//! `N`-player Euler-Maruyama simulation under the mean-field feedback.
//!
//! Common increments are drawn as `+-sqrt(dt)` per mode, the law the noise
//! tree discretizes, so every replica walks down one tree branch and reads
//! the solved `q` and `xbar` at its node exactly. Idiosyncratic increments
//! are Gaussian.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consistency::{solve_offset_bsde, DecoupledSolution, FixedPointResult, TreeValues};
use crate::error::{MfgError, Result};
use crate::grid::TimeGrid;
use crate::linalg;
use crate::model::ModelSpec;
use crate::noise::{self, standard_normal};
use crate::riccati::RiccatiSolution;
use crate::scalar::Real;
use crate::tree::NoiseTree;

const COMMON_TAG: u64 = 0x5c0a;
const AGENT_TAG: u64 = 0x5a6e;

/// A solved mean-field equilibrium: the gain `Pi` and the tree processes
/// `xbar`, `q` the feedback reads.
#[derive(Debug, Clone)]
pub struct Equilibrium<T: Real> {
    pub tree: NoiseTree<T>,
    pub pi: RiccatiSolution<T>,
    pub xbar: TreeValues<DVector<T>>,
    pub q: TreeValues<DVector<T>>,
}

impl<T: Real> Equilibrium<T> {
    pub fn from_decoupled(tree: &NoiseTree<T>, sol: &DecoupledSolution<T>) -> Self {
        Self {
            tree: tree.clone(),
            pi: sol.pi.clone(),
            xbar: sol.xbar.tree_levels().expect("tree-indexed").clone(),
            q: sol.q.clone(),
        }
    }

    /// Recovers `q` from the fixed point by one more offset solve.
    pub fn from_fixed_point(
        spec: &ModelSpec<T>,
        tree: &NoiseTree<T>,
        pi: &RiccatiSolution<T>,
        fixed_point: &FixedPointResult<T>,
    ) -> Result<Self> {
        let offset = solve_offset_bsde(spec, &tree.grid, tree, pi, &fixed_point.xbar)?;
        Ok(Self {
            tree: tree.clone(),
            pi: pi.clone(),
            xbar: fixed_point.xbar.tree_levels().expect("tree-indexed").clone(),
            q: offset.q,
        })
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.tree.grid
    }
}

/// `u = -B^T (Pi x - q)`.
pub fn feedback_control<T: Real>(
    b: &DMatrix<T>,
    pi: &DMatrix<T>,
    q: &DVector<T>,
    x: &DVector<T>,
) -> DVector<T> {
    -b.tr_mul(&(pi * x - q))
}

/// Strategy of the first agent; everybody else plays the equilibrium feedback.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Deviation {
    Equilibrium,
    ZeroControl,
    /// `factor * u`, with `u` the equilibrium feedback at the agent's state.
    Scaled(f64),
}

impl Deviation {
    pub fn name(&self) -> String {
        match self {
            Deviation::Equilibrium => "equilibrium".into(),
            Deviation::ZeroControl => "zero".into(),
            Deviation::Scaled(f) => format!("scaled:{f}"),
        }
    }

    /// Parses `equilibrium`, `zero` or `scaled:<factor>`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "equilibrium" | "eq" => Ok(Deviation::Equilibrium),
            "zero" | "zero-control" => Ok(Deviation::ZeroControl),
            _ => s
                .strip_prefix("scaled:")
                .and_then(|f| f.parse::<f64>().ok())
                .map(Deviation::Scaled)
                .ok_or_else(|| MfgError::InvalidArgument(format!("unknown deviation `{s}`"))),
        }
    }

    fn apply<T: Real>(&self, u: DVector<T>) -> DVector<T> {
        match self {
            Deviation::Equilibrium => u,
            Deviation::ZeroControl => u * T::zero(),
            Deviation::Scaled(f) => u * T::lit(*f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    pub n_agents: usize,
    pub n_mc: usize,
    pub seed: u64,
    pub deviation: Deviation,
    /// Also simulate, for every agent, the twin driven by `xbar` instead of
    /// the empirical average (same noise, same initial state).
    pub limit_twins: bool,
}

/// One Monte Carlo replica. Agent-indexed arrays are `[agent][knot]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaPaths<T: Real> {
    pub states: Vec<Vec<DVector<T>>>,
    pub controls: Vec<Vec<DVector<T>>>,
    pub twin_states: Vec<Vec<DVector<T>>>,
    pub twin_controls: Vec<Vec<DVector<T>>>,
    /// Empirical average `x^(N)` per knot.
    pub average: Vec<DVector<T>>,
    /// `xbar` at the replica's tree node per knot.
    pub mean_field: Vec<DVector<T>>,
    /// Tree node index per knot.
    pub nodes: Vec<usize>,
    /// Common increments (unscaled) per step.
    pub common_increments: Vec<DVector<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrategyTag {
    Equilibrium,
    Deviation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentEnsemble<T: Real> {
    pub grid: TimeGrid<T>,
    pub n_agents: usize,
    pub seed: u64,
    pub strategy: Vec<StrategyTag>,
    pub replicas: Vec<ReplicaPaths<T>>,
}

impl<T: Real> AgentEnsemble<T> {
    pub fn n_mc(&self) -> usize {
        self.replicas.len()
    }
}

/// Shared read-only state of a simulation.
pub(crate) struct Simulator<'a, T: Real> {
    spec: &'a ModelSpec<T>,
    eq: &'a Equilibrium<T>,
    s: DMatrix<T>,
    xi_sqrt: DMatrix<T>,
    sqrt_l: Vec<T>,
    sqrt_l0: Vec<T>,
}

impl<'a, T: Real> Simulator<'a, T> {
    pub(crate) fn new(spec: &'a ModelSpec<T>, grid: &TimeGrid<T>, eq: &'a Equilibrium<T>) -> Result<Self> {
        if !grid.same_as(eq.grid()) {
            return Err(MfgError::GridMismatch(
                "simulation grid differs from the equilibrium grid".into(),
            ));
        }
        Ok(Self {
            spec,
            eq,
            s: linalg::expm(&(&spec.a * grid.dt()))?,
            xi_sqrt: linalg::psd_sqrt(&spec.xi_cov),
            sqrt_l: spec.lambda_idio.iter().map(|l| l.sqrt()).collect(),
            sqrt_l0: spec.lambda_common.iter().map(|l| l.sqrt()).collect(),
        })
    }

    /// Step `x -> S(dt)(x + dt (B u + F1 m) + idiosyncratic + common)`
    /// with mean-field input `m`.
    fn step(&self, x: &DVector<T>, u: &DVector<T>, m: &DVector<T>, dw: &DVector<T>, dw0: &DVector<T>) -> DVector<T> {
        let sp = self.spec;
        let dt = self.eq.tree.grid.dt();
        let mut y = x + (&sp.b * u + &sp.f1 * m) * dt;
        for j in 0..sp.m_idio {
            y += (&sp.d[j] * x + &sp.f2[j] * m + &sp.sigma[j]) * (self.sqrt_l[j] * dw[j]);
        }
        for j in 0..sp.m_common {
            y += (&sp.d0[j] * x + &sp.f0[j] * m + &sp.sigma0[j]) * (self.sqrt_l0[j] * dw0[j]);
        }
        &self.s * y
    }

    fn control(&self, k: usize, node: usize, x: &DVector<T>, deviate: bool, dev: Deviation) -> DVector<T> {
        let u = feedback_control(&self.spec.b, self.eq.pi.at_knot(k), &self.eq.q[k][node], x);
        if deviate {
            dev.apply(u)
        } else {
            u
        }
    }

    pub(crate) fn replica(&self, opts: &SimulationOptions, r: usize) -> Result<ReplicaPaths<T>> {
        let sp = self.spec;
        let tree = &self.eq.tree;
        let grid = &tree.grid;
        let (n, big_n) = (grid.n_steps(), opts.n_agents);
        let sqrt_dt = grid.dt().sqrt();
        let inv_n = T::one() / T::usize(big_n);

        let mut common_rng = noise::substream(opts.seed, &[COMMON_TAG, r as u64]);
        let mut agent_rngs: Vec<ChaCha8Rng> = (0..big_n)
            .map(|i| noise::substream(opts.seed, &[AGENT_TAG, r as u64, i as u64]))
            .collect();

        let mut x: Vec<DVector<T>> = agent_rngs
            .iter_mut()
            .map(|rng| {
                let z = DVector::from_fn(sp.d_state, |_, _| standard_normal::<T, _>(rng));
                &sp.xi_bar + &self.xi_sqrt * z
            })
            .collect();
        let mut tw = if opts.limit_twins { x.clone() } else { Vec::new() };

        let mut out = ReplicaPaths {
            states: vec![Vec::with_capacity(n + 1); big_n],
            controls: vec![Vec::with_capacity(n + 1); big_n],
            twin_states: vec![Vec::with_capacity(n + 1); tw.len()],
            twin_controls: vec![Vec::with_capacity(n + 1); tw.len()],
            average: Vec::with_capacity(n + 1),
            mean_field: Vec::with_capacity(n + 1),
            nodes: Vec::with_capacity(n + 1),
            common_increments: Vec::with_capacity(n),
        };
        let mut node = 0;
        for k in 0..=n {
            let avg = x.iter().fold(DVector::zeros(sp.d_state), |a, v| a + v) * inv_n;
            let xb = self.eq.xbar[k][node].clone();
            let u: Vec<DVector<T>> = x
                .iter()
                .enumerate()
                .map(|(i, xi)| self.control(k, node, xi, i == 0, opts.deviation))
                .collect();
            let ut: Vec<DVector<T>> = tw
                .iter()
                .enumerate()
                .map(|(i, xi)| self.control(k, node, xi, i == 0, opts.deviation))
                .collect();
            for i in 0..big_n {
                out.states[i].push(x[i].clone());
                out.controls[i].push(u[i].clone());
            }
            for i in 0..tw.len() {
                out.twin_states[i].push(tw[i].clone());
                out.twin_controls[i].push(ut[i].clone());
            }
            out.average.push(avg.clone());
            out.mean_field.push(xb.clone());
            out.nodes.push(node);
            if k == n {
                break;
            }

            let dw0 = DVector::from_fn(sp.m_common, |_, _| {
                if common_rng.random::<bool>() {
                    sqrt_dt
                } else {
                    -sqrt_dt
                }
            });
            let branch = tree.branch_from_signs(dw0.as_slice());
            for i in 0..big_n {
                let dw = DVector::from_fn(sp.m_idio, |_, _| standard_normal::<T, _>(&mut agent_rngs[i]) * sqrt_dt);
                x[i] = self.step(&x[i], &u[i], &avg, &dw, &dw0);
                if let Some(t) = tw.get_mut(i) {
                    *t = self.step(t, &ut[i], &xb, &dw, &dw0);
                }
            }
            let finite = x.iter().chain(tw.iter()).all(|v| v.iter().all(|c| c.is_finite()));
            if !finite {
                return Err(MfgError::NonFiniteState { replica: r, step: k + 1 });
            }
            out.common_increments.push(dw0);
            node = tree.child(node, branch);
        }
        Ok(out)
    }
}

pub fn simulate_n_player<T: Real>(
    spec: &ModelSpec<T>,
    grid: &TimeGrid<T>,
    eq: &Equilibrium<T>,
    opts: &SimulationOptions,
) -> Result<AgentEnsemble<T>> {
    if opts.n_agents == 0 || opts.n_mc == 0 {
        return Err(MfgError::InvalidArgument("need at least one agent and one replica".into()));
    }
    let sim = Simulator::new(spec, grid, eq)?;
    let replicas = (0..opts.n_mc)
        .into_par_iter()
        .map(|r| sim.replica(opts, r))
        .collect::<Result<Vec<_>>>()?;
    let mut strategy = vec![StrategyTag::Equilibrium; opts.n_agents];
    if opts.deviation != Deviation::Equilibrium {
        strategy[0] = StrategyTag::Deviation;
    }
    Ok(AgentEnsemble {
        grid: *grid,
        n_agents: opts.n_agents,
        seed: opts.seed,
        strategy,
        replicas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::solve_decoupled;
    use crate::tree::build_noise_tree;

    fn solved(spec: &ModelSpec<f64>, n: usize) -> (TimeGrid<f64>, Equilibrium<f64>) {
        let grid = TimeGrid::new(n, spec.horizon).unwrap();
        let tree = build_noise_tree(spec, &grid).unwrap();
        let sol = solve_decoupled(spec, &grid, &tree).unwrap();
        (grid, Equilibrium::from_decoupled(&tree, &sol))
    }

    #[test]
    fn feedback_hand_values() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let u = feedback_control(&one, &(&one * 2.0), &DVector::from_element(1, 1.0), &DVector::from_element(1, 3.0));
        assert_eq!(u[0], -5.0);
        let zero_b = DMatrix::zeros(1, 1);
        let u = feedback_control(&zero_b, &one, &DVector::from_element(1, 4.0), &DVector::from_element(1, 3.0));
        assert_eq!(u[0], 0.0);
    }

    #[test]
    fn noiseless_zero_data_stays_at_zero() {
        let mut spec = ModelSpec::<f64>::zeros(2, 1, 1, 1, 1.0);
        spec.a = DMatrix::from_row_slice(2, 2, &[-0.5, 1.0, 0.0, -0.2]);
        spec.b = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        spec.m = DMatrix::identity(2, 2);
        let (grid, eq) = solved(&spec, 4);
        let opts = SimulationOptions {
            n_agents: 3,
            n_mc: 2,
            seed: 1,
            deviation: Deviation::Equilibrium,
            limit_twins: true,
        };
        let ens = simulate_n_player(&spec, &grid, &eq, &opts).unwrap();
        for r in &ens.replicas {
            assert!(r.states.iter().flatten().all(|v| v.norm() == 0.0));
        }
    }

    #[test]
    fn same_seed_is_bit_identical_across_pools() {
        let mut spec = ModelSpec::<f64>::zeros(1, 1, 1, 1, 1.0);
        spec.b[(0, 0)] = 1.0;
        spec.g[(0, 0)] = 1.0;
        spec.sigma[0][0] = 0.4;
        spec.sigma0[0][0] = 0.3;
        spec.xi_cov[(0, 0)] = 0.2;
        let (grid, eq) = solved(&spec, 4);
        let opts = SimulationOptions {
            n_agents: 5,
            n_mc: 16,
            seed: 42,
            deviation: Deviation::Equilibrium,
            limit_twins: false,
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_n_player(&spec, &grid, &eq, &opts).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn replica_follows_its_tree_branch() {
        let mut spec = ModelSpec::<f64>::zeros(1, 1, 0, 2, 1.0);
        spec.sigma0[0][0] = 0.5;
        spec.sigma0[1][0] = -0.2;
        let (grid, eq) = solved(&spec, 3);
        let opts = SimulationOptions {
            n_agents: 1,
            n_mc: 4,
            seed: 7,
            deviation: Deviation::Equilibrium,
            limit_twins: false,
        };
        let ens = simulate_n_player(&spec, &grid, &eq, &opts).unwrap();
        for r in &ens.replicas {
            for k in 0..3 {
                let b = eq.tree.branch_of(r.nodes[k + 1]);
                assert_eq!(eq.tree.increments(b), r.common_increments[k]);
            }
            // one agent, no control, no idiosyncratic noise: x = xbar on the tree
            for k in 0..=3 {
                assert!((&r.states[0][k] - &r.mean_field[k]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn deviation_names_round_trip() {
        for d in [Deviation::Equilibrium, Deviation::ZeroControl, Deviation::Scaled(1.2)] {
            assert_eq!(Deviation::parse(&d.name()).unwrap(), d);
        }
        assert!(Deviation::parse("best-response").is_err());
    }

    #[test]
    fn non_finite_state_is_reported() {
        let (grid, eq) = solved(&ModelSpec::zeros(1, 1, 1, 1, 1.0), 2);
        let mut spec = ModelSpec::<f64>::zeros(1, 1, 1, 1, 1.0);
        spec.xi_bar[0] = 1e300;
        spec.f1[(0, 0)] = 1e300;
        let opts = SimulationOptions {
            n_agents: 2,
            n_mc: 1,
            seed: 0,
            deviation: Deviation::Equilibrium,
            limit_twins: false,
        };
        assert!(matches!(
            simulate_n_player(&spec, &grid, &eq, &opts),
            Err(MfgError::NonFiniteState { replica: 0, step: 1 })
        ));
    }
}
