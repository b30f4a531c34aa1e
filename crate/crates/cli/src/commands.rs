// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use hilbert_mfg::consistency::{
    contraction_certificate, fbsee_residual, picard_fixed_point, solve_decoupled, solve_offset_bsde,
    MeanFieldCandidate, OffsetSolution,
};
use hilbert_mfg::grid::TimeGrid;
use hilbert_mfg::model::{parse_model_json, parse_model_toml, validate_model, ModelSpec};
use hilbert_mfg::riccati::{compute_lambda, solve_eta_riccati, solve_pi_riccati, solve_r_riccati, RiccatiSolution};
use hilbert_mfg::simulate::{
    average_state_error_experiment, epsilon_nash_experiment, estimate_cost, points_csv, simulate_n_player,
    CostReference, Deviation, Equilibrium, ExperimentOptions, NashMode, SimulationOptions,
};
use hilbert_mfg::tree::{build_noise_tree_with_cap, NoiseTree};

use crate::args::{
    Cli, CommonArgs, Command, Experiment, Method, MfgCommand, ModelCommand, NashModeArg, RiccatiCommand,
    RiccatiKindArg, SimulateArgs, SolveArgs,
};
use crate::config::RunConfig;
use crate::output::Bundle;
use crate::{report, Failure};

pub fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Report(args) => report::run(&cli.common, args),
        Command::Model(ModelCommand::Validate) => validate(&Context::load(&cli.common, None)?),
        Command::Riccati(RiccatiCommand::Solve { kind }) => riccati(&Context::load(&cli.common, None)?.checked()?, *kind),
        Command::Mfg(cmd) => {
            let sim = match cmd {
                MfgCommand::Simulate(s) | MfgCommand::Rates { sim: s, .. } => Some(s),
                _ => None,
            };
            let ctx = Context::load(&cli.common, sim)?.checked()?;
            match cmd {
                MfgCommand::Certify => certify(&ctx),
                MfgCommand::Solve(args) => solve(&ctx, args),
                MfgCommand::Residual(args) => residual(&ctx, args),
                MfgCommand::Simulate(args) => simulate(&ctx, args),
                MfgCommand::Rates { experiment, mode, sim } => rates(&ctx, *experiment, *mode, sim),
            }
        }
    }
}

/// Effective configuration plus the parsed model.
pub struct Context {
    pub cfg: RunConfig,
    pub model_bytes: Vec<u8>,
    pub model: Result<ModelSpec<f64>, Failure>,
    pub out_dir: PathBuf,
}

impl Context {
    pub fn load(common: &CommonArgs, sim: Option<&SimulateArgs>) -> Result<Self, Failure> {
        let mut cfg = match (&common.config, &common.model) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(model)) => RunConfig::for_model(model.clone()),
            (None, None) => return Err(Failure::Usage("either --config or --model is required".into())),
        };
        if let (Some(_), Some(model)) = (&common.config, &common.model) {
            cfg.model = model.clone();
        }
        if let Some(n) = common.steps {
            cfg.grid.n_steps = n;
        }
        if let Some(s) = sim {
            if s.seed.is_some() {
                cfg.simulate.seed = s.seed;
            }
            if let Some(n) = s.n_mc {
                cfg.simulate.n_mc = n;
            }
            if let Some(ns) = &s.ns {
                cfg.simulate.ns = ns.clone();
            }
            if let Some(d) = &s.deviation {
                cfg.simulate.deviation = d.clone();
            }
        }
        cfg.check()?;
        let model_bytes = std::fs::read(&cfg.model).map_err(|e| Failure::io(&cfg.model, e))?;
        let text = String::from_utf8_lossy(&model_bytes);
        let parsed = match cfg.model.extension().and_then(|e| e.to_str()) {
            Some("json") => parse_model_json(&text),
            _ => parse_model_toml(&text),
        };
        let out_dir = cfg.output_dir(common.output.as_deref());
        Ok(Self {
            model: parsed.map_err(|e| Failure::Validation(format!("{}: {e}", cfg.model.display()))),
            cfg,
            model_bytes,
            out_dir,
        })
    }

    /// Fails with the validation report unless the model is usable.
    pub fn checked(self) -> Result<Checked, Failure> {
        let spec = self.model?;
        let report = validate_model(&spec);
        if !report.is_valid() {
            return Err(Failure::Validation(format!("invalid model:\n{report}")));
        }
        let grid = TimeGrid::new(self.cfg.grid.n_steps, spec.horizon)?;
        Ok(Checked {
            cfg: self.cfg,
            model_bytes: self.model_bytes,
            spec,
            grid,
            out_dir: self.out_dir,
        })
    }
}

pub struct Checked {
    pub cfg: RunConfig,
    pub model_bytes: Vec<u8>,
    pub spec: ModelSpec<f64>,
    pub grid: TimeGrid<f64>,
    pub out_dir: PathBuf,
}

/// Config text that enters the hash: the model is identified by content, so
/// only its file name is kept.
fn hashed_config(cfg: &RunConfig) -> String {
    let mut c = cfg.clone();
    c.model = c.model.file_name().map(PathBuf::from).unwrap_or_default();
    c.output.directory = None;
    c.to_toml()
}

fn bundle(cfg: &RunConfig, model_bytes: &[u8], out_dir: &std::path::Path, command: String) -> Bundle {
    Bundle::new(out_dir.to_path_buf(), command).hashes(&hashed_config(cfg), model_bytes)
}

fn announce(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

impl Checked {
    fn bundle(&self, command: impl Into<String>) -> Bundle {
        bundle(&self.cfg, &self.model_bytes, &self.out_dir, command.into())
    }

    fn tree(&self) -> Result<NoiseTree<f64>, Failure> {
        Ok(build_noise_tree_with_cap(&self.spec, &self.grid, self.cfg.tree.node_cap)?)
    }

    fn seed(&self) -> Result<u64, Failure> {
        self.cfg
            .simulate
            .seed
            .ok_or_else(|| Failure::Usage("--seed is required (or set simulate.seed in the config)".into()))
    }
}

fn validate(ctx: &Context) -> Result<(), Failure> {
    let (text, ok) = match &ctx.model {
        Ok(spec) => {
            let report = validate_model(spec);
            (format!("{report}\n"), report.is_valid())
        }
        Err(e) => (format!("{e}\n"), false),
    };
    print!("{text}");
    let mut b = bundle(&ctx.cfg, &ctx.model_bytes, &ctx.out_dir, "model validate".into());
    b.add("validation.txt", text);
    b.commit()?;
    if ok {
        Ok(())
    } else {
        Err(Failure::Validation("model validation failed".into()))
    }
}

fn riccati(ctx: &Checked, kind: RiccatiKindArg) -> Result<(), Failure> {
    let (spec, grid) = (&ctx.spec, &ctx.grid);
    let pi = solve_pi_riccati(spec, grid, true)?;
    let (name, sol) = match kind {
        RiccatiKindArg::Pi => ("pi", pi),
        RiccatiKindArg::Eta => {
            let lam = compute_lambda(spec, &pi)?;
            ("eta", solve_eta_riccati(spec, grid, &pi, &lam, None)?)
        }
        RiccatiKindArg::R => {
            let lam = compute_lambda(spec, &pi)?;
            ("r", solve_r_riccati(spec, grid, &lam, &pi)?)
        }
    };
    let mut b = ctx.bundle(format!("riccati solve --kind {name}"));
    b.add(&format!("riccati_{name}.csv"), sol.to_csv());
    announce(&b.commit()?);
    Ok(())
}

fn certify(ctx: &Checked) -> Result<(), Failure> {
    let cert = contraction_certificate(&ctx.spec, &ctx.grid);
    println!(
        "C2 exp(T C3) = {:.6e}, alpha(T) = {:.6e}, passes_contraction = {}",
        cert.product, cert.alpha_t, cert.passes_contraction
    );
    let mut b = ctx.bundle("mfg certify");
    b.add("certificate.toml", cert.to_toml());
    announce(&b.commit()?);
    Ok(())
}

/// A solved equilibrium and what produced it.
struct Solved {
    method: Method,
    tree: NoiseTree<f64>,
    pi: RiccatiSolution<f64>,
    xbar: MeanFieldCandidate<f64>,
    offset: OffsetSolution<f64>,
    summary: String,
}

fn default_method(spec: &ModelSpec<f64>, args: &SolveArgs) -> Method {
    args.method
        .unwrap_or(if spec.is_det_diff() { Method::Decoupled } else { Method::Picard })
}

fn solve_equilibrium(ctx: &Checked, args: &SolveArgs) -> Result<Solved, Failure> {
    let (spec, grid) = (&ctx.spec, &ctx.grid);
    let method = default_method(spec, args);
    let tree = ctx.tree()?;
    match method {
        Method::Decoupled => {
            let sol = solve_decoupled(spec, grid, &tree)?;
            let summary = format!(
                "method = \"decoupled\"\nn_steps = {}\neta_symmetric = {}\n",
                grid.n_steps(),
                sol.eta.symmetric
            );
            Ok(Solved {
                method,
                offset: sol.offset(&tree),
                pi: sol.pi,
                xbar: sol.xbar,
                tree,
                summary,
            })
        }
        Method::Picard => {
            let cert = contraction_certificate(spec, grid);
            if !cert.passes_contraction && !args.allow_uncertified {
                return Err(Failure::Numerical(format!(
                    "contraction certificate fails (C2 exp(T C3) = {:.3e}); Picard convergence is not \
                     guaranteed. Use --method decoupled for det-diff models, a shorter horizon, or \
                     --allow-uncertified",
                    cert.product
                )));
            }
            let pi = solve_pi_riccati(spec, grid, true)?;
            let g0 = MeanFieldCandidate::zeros(&tree, spec.d_state);
            let fp = picard_fixed_point(spec, grid, &tree, &pi, &g0, &ctx.cfg.picard.options())?;
            let offset = solve_offset_bsde(spec, grid, &tree, &pi, &fp.xbar)?;
            let summary = format!(
                "method = \"picard\"\nn_steps = {}\niterations = {}\nmeasured_ratio = {:e}\n\
                 certificate_product = {:e}\nresidual_history = {:?}\n",
                grid.n_steps(),
                fp.iterations,
                fp.measured_ratio,
                cert.product,
                fp.residual_history
            );
            Ok(Solved {
                method,
                tree,
                pi,
                xbar: fp.xbar,
                offset,
                summary,
            })
        }
    }
}

fn solve(ctx: &Checked, args: &SolveArgs) -> Result<(), Failure> {
    let s = solve_equilibrium(ctx, args)?;
    let m = s.method.name();
    let mut b = ctx.bundle(format!("mfg solve --method {m}"));
    b.add(&format!("solution_{m}.toml"), s.summary.clone());
    b.add(&format!("xbar_{m}.csv"), s.xbar.to_csv(&s.tree));
    b.add(&format!("q_{m}.csv"), s.offset.q_csv(&s.tree));
    b.add(&format!("q_tilde_{m}.csv"), s.offset.q_tilde_csv(&s.tree));
    announce(&b.commit()?);
    Ok(())
}

fn residual(ctx: &Checked, args: &SolveArgs) -> Result<(), Failure> {
    let s = solve_equilibrium(ctx, args)?;
    let r = fbsee_residual(&ctx.spec, &ctx.grid, &s.tree, &s.pi, &s.xbar, &s.offset.q, &s.offset.q_tilde)?;
    println!("max node defect {:.3e}", r.max_defect());
    let m = s.method.name();
    let mut b = ctx.bundle(format!("mfg residual --method {m}"));
    b.add(&format!("residual_{m}.toml"), format!("method = \"{m}\"\ndt = {:e}\n{}", ctx.grid.dt(), r.to_toml()));
    announce(&b.commit()?);
    Ok(())
}

fn equilibrium(ctx: &Checked, args: &SolveArgs) -> Result<(Method, Equilibrium<f64>), Failure> {
    let s = solve_equilibrium(ctx, args)?;
    let eq = Equilibrium {
        xbar: s.xbar.tree_levels().expect("tree-indexed").clone(),
        q: s.offset.q,
        pi: s.pi,
        tree: s.tree,
    };
    Ok((s.method, eq))
}

fn deviation(ctx: &Checked) -> Result<Deviation, Failure> {
    Deviation::parse(&ctx.cfg.simulate.deviation).map_err(|e| Failure::Usage(e.to_string()))
}

fn simulate(ctx: &Checked, args: &SimulateArgs) -> Result<(), Failure> {
    let seed = ctx.seed()?;
    let dev = deviation(ctx)?;
    let (method, eq) = equilibrium(ctx, &args.solve)?;
    let mut csv = String::from("N,estimate,std_error,running_tracking,control_energy,terminal_tracking\n");
    for &n in &ctx.cfg.simulate.ns {
        let opts = SimulationOptions {
            n_agents: n,
            n_mc: ctx.cfg.simulate.n_mc,
            seed,
            deviation: dev,
            limit_twins: false,
        };
        let ens = simulate_n_player(&ctx.spec, &ctx.grid, &eq, &opts)?;
        let c = estimate_cost(&ctx.spec, &ctx.grid, &ens, 0, CostReference::EmpiricalAverage)?;
        csv.push_str(&format!(
            "{n},{},{},{},{},{}\n",
            c.mean_cost, c.std_error, c.running_tracking, c.control_energy, c.terminal_tracking
        ));
    }
    let mut b = ctx
        .bundle(format!("mfg simulate --method {} --deviation {}", method.name(), dev.name()))
        .seed(Some(seed));
    b.add("simulate.csv", csv);
    announce(&b.commit()?);
    Ok(())
}

fn rates(ctx: &Checked, experiment: Experiment, mode: NashModeArg, args: &SimulateArgs) -> Result<(), Failure> {
    let seed = ctx.seed()?;
    let (method, eq) = equilibrium(ctx, &args.solve)?;
    let opts = ExperimentOptions {
        ns: ctx.cfg.simulate.ns.clone(),
        n_mc: ctx.cfg.simulate.n_mc,
        seed,
    };
    let (command, tag, points, detail, fit) = match experiment {
        Experiment::AvgError => {
            let e = average_state_error_experiment(&ctx.spec, &ctx.grid, &eq, &opts)?;
            ("avg-error".to_string(), "avg_error", e.points, None, e.fit)
        }
        Experiment::EpsNash => {
            let (nash_mode, tag) = match mode {
                NashModeArg::LimitGap => (NashMode::LimitGap, "limit_gap"),
                NashModeArg::Defect => (NashMode::Defect(deviation(ctx)?), "defect"),
            };
            let e = epsilon_nash_experiment(&ctx.spec, &ctx.grid, &eq, &opts, nash_mode)?;
            let command = match nash_mode {
                NashMode::Defect(d) => format!("eps-nash --mode defect --deviation {}", d.name()),
                NashMode::LimitGap => "eps-nash --mode limit-gap".into(),
            };
            (command, tag, e.rate_points(), Some(e.to_csv()), e.gap_fit)
        }
    };
    let mut b = ctx
        .bundle(format!("mfg rates --method {} --experiment {command}", method.name()))
        .seed(Some(seed));
    b.add(&format!("rates_{tag}.csv"), points_csv(&points));
    if let Some(d) = detail {
        b.add(&format!("nash_{tag}.csv"), d);
    }
    match &fit {
        Some(f) => {
            println!("log-log slope {:.4} (r^2 {:.4})", f.slope, f.r_squared);
            b.add(&format!("fit_{tag}.csv"), f.to_csv());
        }
        None => println!("no rate fit (needs four or more positive estimates)"),
    }
    announce(&b.commit()?);
    Ok(())
}
