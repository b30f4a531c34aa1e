// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

mod common;

use std::collections::HashMap;
use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use hilbert_mfg::consistency::{
    contraction_certificate, fbsee_residual, measured_lipschitz_sq, picard_fixed_point, solve_decoupled,
    MeanFieldCandidate, PicardOptions,
};
use hilbert_mfg::grid::TimeGrid;
use hilbert_mfg::model::ModelSpec;
use hilbert_mfg::noise::{sample_q_wiener, NoiseKind};
use hilbert_mfg::riccati::{compute_lambda, solve_eta_riccati, solve_pi_riccati, solve_r_riccati};
use hilbert_mfg::simulate::{
    average_state_error_experiment, epsilon_nash_experiment, estimate_cost, simulate_n_player, CostReference,
    Deviation, Equilibrium, ExperimentOptions, NashMode, SimulationOptions,
};
use hilbert_mfg::tree::build_noise_tree;
use nalgebra::{DMatrix, DVector};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn scalar_riccati() -> Outcome {
    let mut spec = ModelSpec::<f64>::zeros(1, 1, 0, 0, 1.0);
    spec.b[(0, 0)] = 1.0;
    spec.g[(0, 0)] = 1.0;
    let start = Instant::now();
    let grid = TimeGrid::new(1000, 1.0).unwrap();
    let pi = solve_pi_riccati(&spec, &grid, true).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let err = (pi.initial()[(0, 0)] - 0.5).abs();
    outcome(err <= 1e-6 && secs < 1.0, format!("|Pi(0) - 0.5| = {err:.2e}, {secs:.3} s"))
}

fn spectral(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

fn stack(s: &[DMatrix<f64>], l: &[f64]) -> f64 {
    s.iter().zip(l).map(|(m, l)| l * spectral(m).powi(2)).sum::<f64>().sqrt()
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn certificate_arithmetic() -> Outcome {
    common::formula::self_check();
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let d = 1 + (seed % 3) as usize;
        let horizon = 0.05 + 0.05 * (seed % 7) as f64;
        let spec = common::random_spec(seed, d, 1 + (seed % 2) as usize, 1 + (seed % 3) as usize, horizon);
        let grid = TimeGrid::new(4, horizon).unwrap();
        let cert = contraction_certificate(&spec, &grid);

        let sym = (&spec.a + spec.a.transpose()) * 0.5;
        let growth = sym.symmetric_eigenvalues().iter().copied().fold(f64::MIN, f64::max).max(0.0);
        let mut v: HashMap<&str, f64> = HashMap::from([
            ("T", horizon),
            ("MT", (growth * horizon).exp()),
            ("nB", spectral(&spec.b)),
            ("nD", stack(&spec.d, &spec.lambda_idio)),
            ("nD0", stack(&spec.d0, &spec.lambda_common)),
            ("nF0", stack(&spec.f0, &spec.lambda_common)),
            ("nF1", spectral(&spec.f1)),
            ("nF2", stack(&spec.f2, &spec.lambda_idio)),
            ("nM", spectral(&spec.m)),
            ("nG", spectral(&spec.g)),
            ("nF1h", spectral(&spec.f1hat)),
            ("nF2h", spectral(&spec.f2hat)),
        ]);
        let c_pi = common::formula::eval("2 * MT^2 * exp(8 * T * MT^2 * (nD^2 + nD0^2) * (nG + T * nM))", &v);
        let alpha = common::formula::eval("16 * MT^2 * T * nD0^2", &v);
        v.insert("CPi", c_pi);
        v.insert("alpha", alpha);
        let (c1, c2) = if alpha < 1.0 {
            let c1 = common::formula::eval(
                "2 * MT^2 / (1 - alpha) * exp(8 * MT^2 / (1 - alpha) * CPi^2 * nB^4) \
                 * ((nG * nF2h)^2 + 16 * T^2 * ((nM * nF1h)^2 \
                 + CPi^2 * ((nD * nF2)^2 + (nD0 * nF0)^2 + nF1^2)))",
                &v,
            );
            v.insert("C1", c1);
            (c1, common::formula::eval("5 * MT^2 * T * (T * (nB^4 * C1 + nF1^2) + nF0^2)", &v))
        } else {
            (f64::INFINITY, f64::INFINITY)
        };
        let c3 = common::formula::eval("5 * MT^2 * (nD0^2 + T * nB^4 * CPi^2)", &v);
        let product = c2 * (horizon * c3).exp();
        for (a, b) in [
            (cert.m_t, v["MT"]),
            (cert.c_pi, c_pi),
            (cert.alpha_t, alpha),
            (cert.c_1, c1),
            (cert.c_2, c2),
            (cert.c_3, c3),
            (cert.product, product),
        ] {
            worst = worst.max(rel(a, b));
        }
    }
    outcome(worst <= 1e-12, format!("max relative deviation over 20 specs {worst:.2e}"))
}

fn small_horizon_certificate() -> Outcome {
    let ts = [0.4, 0.2, 0.1, 0.05, 0.025];
    let products: Vec<f64> = ts
        .iter()
        .map(|&t| contraction_certificate(&common::certified_spec(t), &TimeGrid::new(8, t).unwrap()).product)
        .collect();
    let decreasing = products.windows(2).all(|w| w[1] < w[0]);
    let last = *products.last().unwrap();
    outcome(
        decreasing && last < 1.0,
        format!("products {:?}", products.iter().map(|p| format!("{p:.3e}")).collect::<Vec<_>>()),
    )
}

fn picard_contraction() -> Outcome {
    let start = Instant::now();
    let horizon = 0.1;
    let spec = common::certified_spec(horizon);
    let grid = TimeGrid::new(8, horizon).unwrap();
    let cert = contraction_certificate(&spec, &grid);
    let tree = build_noise_tree(&spec, &grid).unwrap();
    let pi = solve_pi_riccati(&spec, &grid, true).unwrap();
    let mut lip: f64 = 0.0;
    for s in 0..10 {
        let g1 = MeanFieldCandidate::random(&tree, 2, 1.0, 100 + s);
        let g2 = MeanFieldCandidate::random(&tree, 2, 1.0, 200 + s);
        lip = lip.max(measured_lipschitz_sq(&spec, &grid, &tree, &pi, &g1, &g2).unwrap());
    }
    let tol = 1e-10;
    let opts = PicardOptions {
        tol,
        max_iter: 200,
        damping: 1.0,
    };
    let a = picard_fixed_point(&spec, &grid, &tree, &pi, &MeanFieldCandidate::zeros(&tree, 2), &opts).unwrap();
    let b = picard_fixed_point(&spec, &grid, &tree, &pi, &MeanFieldCandidate::random(&tree, 2, 2.0, 7), &opts)
        .unwrap();
    let budget = (tol.ln() / a.measured_ratio.ln()).ceil() as usize + 2;
    let gap = a.xbar.distance_sq(&b.xbar, &tree).sqrt();
    let secs = start.elapsed().as_secs_f64();
    let pass = cert.passes_contraction
        && lip <= cert.product * 1.1
        && a.iterations <= budget
        && gap <= 10.0 * tol
        && a.measured_ratio <= cert.lipschitz_bound() + 0.05
        && secs < 30.0;
    outcome(
        pass,
        format!(
            "certificate {:.3e} (passes {}), measured Lipschitz^2 {lip:.3e}, ratio {:.3e} vs bound {:.3e}, \
             iterations {} <= {budget}, init gap {gap:.1e}, {secs:.2} s",
            cert.product,
            cert.passes_contraction,
            a.measured_ratio,
            cert.lipschitz_bound(),
            a.iterations
        ),
    )
}

fn decoupling_consistency() -> Outcome {
    let spec = common::simulation_spec();
    let run = |n: usize| {
        let grid = TimeGrid::new(n, spec.horizon).unwrap();
        let tree = build_noise_tree(&spec, &grid).unwrap();
        let sol = solve_decoupled(&spec, &grid, &tree).unwrap();
        let res = fbsee_residual(&spec, &grid, &tree, &sol.pi, &sol.xbar, &sol.q, &sol.q_tilde_on_tree(&tree))
            .unwrap();
        let mut qt_err: f64 = 0.0;
        for k in 0..=n {
            for (j, s) in spec.sigma0.iter().enumerate() {
                qt_err = qt_err.max((&sol.q_tilde[k][j] + sol.eta.at_knot(k) * s).amax());
            }
        }
        (res, qt_err)
    };
    let ((a, ea), (b, eb)) = (run(8), run(16));
    let ord_b = (a.backward_defect_l2 / b.backward_defect_l2).log2();
    let ord_m = (a.martingale_defect_l2 / b.martingale_defect_l2).log2();
    let ord_b_max = (a.backward_defect / b.backward_defect).log2();
    let dt = spec.horizon / 16.0;
    let exact = b.forward_defect_l2.max(b.terminal_defect_l2) <= 1e-10;
    let pass = ord_b >= 0.9 && ord_m >= 0.9 && exact && ea.max(eb) <= 1e-10;
    outcome(
        pass,
        format!(
            "L2 defects at 16 steps: backward {:.3e}, martingale {:.3e}, forward {:.1e} (dt = {dt}); \
             orders backward {ord_b:.2}, martingale {ord_m:.2} (node-max backward order {ord_b_max:.2}); \
             |q~ + eta sigma0| {:.1e}",
            b.backward_defect_l2,
            b.martingale_defect_l2,
            b.forward_defect_l2,
            ea.max(eb)
        ),
    )
}

fn cross_method() -> Outcome {
    let horizon = 0.2;
    let spec = common::certified_det_diff_spec(horizon);
    let grid = TimeGrid::new(8, horizon).unwrap();
    let cert = contraction_certificate(&spec, &grid);
    let tree = build_noise_tree(&spec, &grid).unwrap();
    let tol = 1e-10;
    let pi = solve_pi_riccati(&spec, &grid, true).unwrap();
    let opts = PicardOptions {
        tol,
        ..PicardOptions::default()
    };
    let fp = picard_fixed_point(&spec, &grid, &tree, &pi, &MeanFieldCandidate::zeros(&tree, 2), &opts).unwrap();
    let dec = solve_decoupled(&spec, &grid, &tree).unwrap();
    let gap = fp.xbar.distance_sq(&dec.xbar, &tree).sqrt();
    let bound = 10.0 * tol + grid.dt();
    outcome(
        cert.passes_contraction && gap <= bound,
        format!(
            "certificate {:.3e}, sup_k sqrt E|Picard - decoupled|^2 = {gap:.3e} <= {bound:.3e}",
            cert.product
        ),
    )
}

fn eta_decomposition() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let spec = common::decomposable_spec(seed, 2 + (seed % 2) as usize, 1, 0.8);
        let grid = TimeGrid::new(200, spec.horizon).unwrap();
        let pi = solve_pi_riccati(&spec, &grid, true).unwrap();
        let lam = compute_lambda(&spec, &pi).unwrap();
        let eta = solve_eta_riccati(&spec, &grid, &pi, &lam, None).unwrap();
        let r = solve_r_riccati(&spec, &grid, &lam, &pi).unwrap();
        for k in 0..grid.n_knots() {
            let diff = eta.at_knot(k) - (r.at_knot(k) - pi.at_knot(k));
            worst = worst.max(spectral(&diff));
        }
    }
    outcome(worst <= 1e-6, format!("max_k ||eta - (R - Pi)|| over 10 specs {worst:.2e}"))
}

fn experiment_setup() -> (ModelSpec<f64>, TimeGrid<f64>, Equilibrium<f64>, ExperimentOptions) {
    let spec = common::simulation_spec();
    let grid = TimeGrid::new(10, spec.horizon).unwrap();
    let tree = build_noise_tree(&spec, &grid).unwrap();
    let sol = solve_decoupled(&spec, &grid, &tree).unwrap();
    let eq = Equilibrium::from_decoupled(&tree, &sol);
    let opts = ExperimentOptions {
        ns: vec![4, 8, 16, 32, 64, 128, 256],
        n_mc: 400,
        seed: 20261018,
    };
    (spec, grid, eq, opts)
}

fn average_state_rate() -> Outcome {
    let start = Instant::now();
    let (spec, grid, eq, opts) = experiment_setup();
    let exp = average_state_error_experiment(&spec, &grid, &eq, &opts).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let Some(fit) = exp.fit else {
        return outcome(false, "no fit");
    };
    outcome(
        (-1.25..=-0.75).contains(&fit.slope) && secs < 300.0,
        format!("slope {:.3} (r^2 {:.3}), {secs:.1} s", fit.slope, fit.r_squared),
    )
}

fn cost_gap_rate() -> Outcome {
    let (spec, grid, eq, opts) = experiment_setup();
    let exp = epsilon_nash_experiment(&spec, &grid, &eq, &opts, NashMode::LimitGap).unwrap();
    let Some(fit) = exp.gap_fit else {
        return outcome(false, "no fit");
    };
    let gaps: Vec<String> = exp.points.iter().map(|p| format!("{:.2e}", p.value)).collect();
    outcome(
        fit.slope <= -0.35,
        format!("slope {:.3} (r^2 {:.3}), gaps {gaps:?}", fit.slope, fit.r_squared),
    )
}

fn nash_defect() -> Outcome {
    let (spec, grid, eq, opts) = experiment_setup();
    let mut pass = true;
    let mut parts = Vec::new();
    for dev in [Deviation::ZeroControl, Deviation::Scaled(1.2)] {
        let exp = epsilon_nash_experiment(&spec, &grid, &eq, &opts, NashMode::Defect(dev)).unwrap();
        let worst = exp
            .points
            .iter()
            .map(|p| if p.std_error > 0.0 { p.value / p.std_error } else if p.value > 0.0 { f64::INFINITY } else { 0.0 })
            .fold(0.0, f64::max);
        let min_margin = exp.points.iter().map(|p| p.j_other - p.j_eq).fold(f64::INFINITY, f64::min);
        pass &= worst <= 3.0;
        parts.push(format!(
            "{}: max defect/SE {worst:.2}, min J_dev - J_eq {min_margin:.3e}",
            dev.name()
        ));
    }
    outcome(pass, parts.join("; "))
}

fn q_wiener_statistics() -> Outcome {
    let mut spec = ModelSpec::<f64>::zeros(1, 1, 3, 0, 0.1);
    spec.lambda_idio = vec![1.0, 0.25, 0.1];
    let grid = TimeGrid::new(10, 0.1).unwrap();
    let n = 10_000;
    let ens = sample_q_wiener(&spec, &grid, n, 99, NoiseKind::Idiosyncratic).unwrap();
    let mut worst_z: f64 = 0.0;
    for k in 0..grid.n_steps() {
        for (j, &l) in spec.lambda_idio.iter().enumerate() {
            let xs: Vec<f64> = (0..n).map(|p| ens.v_increment(p, k)[j]).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let target = l * grid.dt();
            let se = target * (2.0 / (n - 1) as f64).sqrt();
            worst_z = worst_z.max((var - target).abs() / se);
        }
    }

    // Ito isometry: one agent, no control or coupling, additive noise only.
    let mut iso_z: f64 = 0.0;
    for modes in 1..=3 {
        let mut s = ModelSpec::<f64>::zeros(2, 1, modes, 0, 1.0);
        s.a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]));
        for j in 0..modes {
            s.sigma[j] = DVector::from_vec(vec![0.5 + 0.2 * j as f64, 0.3 - 0.1 * j as f64]);
            s.lambda_idio[j] = 1.0 / (1.0 + j as f64);
        }
        let g = TimeGrid::new(100, 1.0).unwrap();
        let tree = build_noise_tree(&s, &g).unwrap();
        let sol = solve_decoupled(&s, &g, &tree).unwrap();
        let eq = Equilibrium::from_decoupled(&tree, &sol);
        let opts = SimulationOptions {
            n_agents: 1,
            n_mc: 10_000,
            seed: 5 + modes as u64,
            deviation: Deviation::Equilibrium,
            limit_twins: false,
        };
        let ens = simulate_n_player(&s, &g, &eq, &opts).unwrap();
        let xs: Vec<f64> = ens.replicas.iter().map(|r| r.states[0][100].norm_squared()).collect();
        let (mean, se) = hilbert_mfg::simulate::mean_and_se(&xs);
        let exact: f64 = (0..modes)
            .map(|j| {
                let lam = s.lambda_idio[j];
                [1.0f64, 2.0]
                    .iter()
                    .zip(s.sigma[j].iter())
                    .map(|(a, sv)| lam * sv * sv * (1.0 - (-2.0 * a).exp()) / (2.0 * a))
                    .sum::<f64>()
            })
            .sum();
        iso_z = iso_z.max((mean - exact).abs() / se);
        // cost estimation sanity on the same ensemble
        let _ = estimate_cost(&s, &g, &ens, 0, CostReference::EmpiricalAverage).unwrap();
    }
    outcome(
        worst_z <= 5.0 && iso_z <= 5.0,
        format!("max variance deviation {worst_z:.2} SE, max isometry deviation {iso_z:.2} SE"),
    )
}

fn yosida_convergence() -> Outcome {
    let mut pass = true;
    let mut rows = Vec::new();
    for seed in 0..5 {
        let spec = common::decomposable_spec(100 + seed, 2, 1, 1.5);
        let grid = TimeGrid::new(200, spec.horizon).unwrap();
        let pi = solve_pi_riccati(&spec, &grid, true).unwrap();
        let lam = compute_lambda(&spec, &pi).unwrap();
        let eta = solve_eta_riccati(&spec, &grid, &pi, &lam, None).unwrap();
        let gaps: Vec<f64> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|&n| {
                let en = solve_eta_riccati(&spec, &grid, &pi, &lam, Some(n)).unwrap();
                spectral(&(en.initial() - eta.initial()))
            })
            .collect();
        pass &= gaps.windows(2).all(|w| w[1] < w[0]);
        rows.push(format!("[{:.1e} {:.1e} {:.1e}]", gaps[0], gaps[1], gaps[2]));
    }
    outcome(pass, format!("||eta_n(0) - eta(0)|| for n = 10, 100, 1000: {}", rows.join(" ")))
}

type Check = fn() -> Outcome;

fn main() {
    let criteria: [(&str, Check); 12] = [
        ("scalar Riccati closed form", scalar_riccati),
        ("contraction-constant arithmetic", certificate_arithmetic),
        ("small-horizon certificate", small_horizon_certificate),
        ("Picard contraction", picard_contraction),
        ("decoupling consistency", decoupling_consistency),
        ("cross-method agreement", cross_method),
        ("eta = R - Pi decomposition", eta_decomposition),
        ("average-state error rate", average_state_rate),
        ("cost-gap rate", cost_gap_rate),
        ("epsilon-Nash defect", nash_defect),
        ("Q-Wiener statistics", q_wiener_statistics),
        ("Yosida convergence", yosida_convergence),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                outcome(false, format!("panicked: {msg}"))
            });
        if !result.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<34} {}  {}",
            i + 1,
            name,
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
