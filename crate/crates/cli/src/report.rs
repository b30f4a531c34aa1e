// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

//! Collates a run directory into `summary.md` and optional SVG plots. Only
//! files listed in the manifest are read.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::args::{CommonArgs, ReportArgs};
use crate::config::RunConfig;
use crate::output::{Bundle, Manifest};
use crate::plot::{chart, Scale, Series};
use crate::Failure;

/// Slope tolerance around the theoretical rate.
pub const RATE_TOLERANCE: f64 = 0.25;

struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self, Failure> {
        let bad = |e: csv::Error| Failure::Validation(format!("{}: {e}", path.display()));
        let mut r = csv::Reader::from_path(path).map_err(bad)?;
        let headers = r.headers().map_err(bad)?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
            .collect::<Result<_, _>>()
            .map_err(bad)?;
        Ok(Self { headers, rows })
    }

    fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.headers.iter().position(|h| h == name)?;
        self.rows.iter().map(|r| r.get(i)?.parse().ok()).collect()
    }

    fn markdown(&self, out: &mut String) {
        writeln!(out, "| {} |", self.headers.join(" | ")).unwrap();
        writeln!(out, "|{}", "---|".repeat(self.headers.len())).unwrap();
        for r in &self.rows {
            writeln!(out, "| {} |", r.join(" | ")).unwrap();
        }
        out.push('\n');
    }
}

fn cell(v: &toml::Value) -> String {
    match v {
        toml::Value::Float(f) => format!("{f:.6e}"),
        toml::Value::String(s) => s.clone(),
        v => v.to_string(),
    }
}

fn toml_section(path: &Path, out: &mut String) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    let table: toml::Table =
        toml::from_str(&text).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    writeln!(out, "| quantity | value |\n|---|---|").unwrap();
    let mut nested = Vec::new();
    for (k, v) in &table {
        match v {
            toml::Value::Table(t) => nested.push((k, t)),
            toml::Value::Array(a) if a.len() > 8 => {
                writeln!(out, "| {k} | {} entries, last {} |", a.len(), a.last().unwrap()).unwrap()
            }
            v => writeln!(out, "| {k} | {} |", cell(v)).unwrap(),
        }
    }
    for (k, t) in nested {
        for (kk, v) in t {
            writeln!(out, "| {k}.{kk} | {} |", cell(v)).unwrap();
        }
    }
    out.push('\n');
    Ok(())
}

struct Rate {
    tag: &'static str,
    title: &'static str,
    target: Option<(f64, &'static str)>,
    /// Bounds only cap the slope from above; faster decay is still consistent.
    upper_bound_only: bool,
}

const RATES: [Rate; 3] = [
    Rate {
        tag: "avg_error",
        title: "Average-state error sup_k E|xbar - x^(N)|^2",
        target: Some((-1.0, "C/N")),
        upper_bound_only: false,
    },
    Rate {
        tag: "limit_gap",
        title: "Cost gap |J^inf - J^[N]|",
        target: Some((-0.5, "C/sqrt(N)")),
        upper_bound_only: true,
    },
    Rate {
        tag: "defect",
        title: "Nash defect max(0, J_eq - J_dev)",
        target: None,
        upper_bound_only: true,
    },
];

/// Verdict line for a fitted slope against the theoretical one. With
/// `upper_bound_only`, any slope at most `target + RATE_TOLERANCE` passes.
pub fn rate_verdict(slope: f64, target: f64, name: &str, upper_bound_only: bool) -> String {
    let gap = if upper_bound_only { (slope - target).max(0.0) } else { (slope - target).abs() };
    if gap <= RATE_TOLERANCE {
        format!("slope {slope:.3}: consistent with {name}")
    } else {
        format!("slope {slope:.3}: rate differs from {name} by more than {RATE_TOLERANCE}")
    }
}

fn eigen_series(table: &Table) -> Vec<Series> {
    let n = ((table.headers.len().saturating_sub(1)) as f64).sqrt().round() as usize;
    let mut series: Vec<Series> = (0..n)
        .map(|i| Series {
            label: format!("eigenvalue {}", i + 1),
            points: Vec::new(),
            dashed: false,
        })
        .collect();
    for row in &table.rows {
        let vals: Option<Vec<f64>> = row.iter().map(|v| v.parse().ok()).collect();
        let Some(vals) = vals else { continue };
        if vals.len() != n * n + 1 {
            continue;
        }
        let m = DMatrix::from_row_slice(n, n, &vals[1..]);
        let sym = (&m + m.transpose()) * 0.5;
        let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        for (s, e) in series.iter_mut().zip(ev) {
            s.points.push((vals[0], e));
        }
    }
    series
}

pub fn run(common: &CommonArgs, args: &ReportArgs) -> Result<(), Failure> {
    let cfg = match &common.config {
        Some(p) => Some(RunConfig::load(p)?),
        None => None,
    };
    let dir: PathBuf = match (&args.run_dir, &cfg) {
        (Some(d), _) => d.clone(),
        (None, Some(c)) => c.output_dir(common.output.as_deref()),
        (None, None) => RunConfig::for_model(PathBuf::new()).output_dir(common.output.as_deref()),
    };
    let plots = args.plots || cfg.as_ref().is_some_and(|c| c.output.emit_plots);
    let manifest = Manifest::load(&dir)?
        .ok_or_else(|| Failure::Validation(format!("{} has no manifest; nothing to report", dir.display())))?;

    let listed = |name: &str| manifest.lists(name).then(|| dir.join(name));
    let mut md = String::from("# hmfg run summary\n\n## Runs\n\n| command | seed | config hash | timestamp |\n|---|---|---|---|\n");
    for r in manifest.runs.iter().filter(|r| r.command != "report") {
        let hash = r.config_hash.as_deref().map_or("-", |h| &h[..12.min(h.len())]);
        let seed = r.seed.map_or("-".into(), |s| s.to_string());
        writeln!(md, "| `{}` | {seed} | {hash} | {} |", r.command, r.timestamp).unwrap();
    }
    md.push('\n');
    let mut bundle = Bundle::new(dir.clone(), "report".into());

    if let Some(p) = listed("validation.txt") {
        let text = std::fs::read_to_string(&p).map_err(|e| Failure::io(&p, e))?;
        writeln!(md, "## Model validation\n\n```\n{}```\n", text).unwrap();
    }
    if let Some(p) = listed("certificate.toml") {
        md.push_str("## Contraction certificate\n\n");
        toml_section(&p, &mut md)?;
    }
    for m in ["decoupled", "picard"] {
        if let Some(p) = listed(&format!("solution_{m}.toml")) {
            writeln!(md, "## Solution ({m})\n").unwrap();
            toml_section(&p, &mut md)?;
        }
        if let Some(p) = listed(&format!("residual_{m}.toml")) {
            writeln!(md, "## Residual ({m})\n").unwrap();
            toml_section(&p, &mut md)?;
        }
    }
    if let Some(p) = listed("simulate.csv") {
        md.push_str("## N-player cost of agent 1\n\n");
        Table::read(&p)?.markdown(&mut md);
    }
    for rate in &RATES {
        let Some(p) = listed(&format!("rates_{}.csv", rate.tag)) else { continue };
        let table = Table::read(&p)?;
        writeln!(md, "## {}\n", rate.title).unwrap();
        table.markdown(&mut md);
        let fit = match listed(&format!("fit_{}.csv", rate.tag)) {
            Some(fp) => {
                let f = Table::read(&fp)?;
                match (f.column("slope"), f.column("intercept")) {
                    (Some(s), Some(i)) if !s.is_empty() && !i.is_empty() => Some((s[0], i[0])),
                    _ => None,
                }
            }
            None => None,
        };
        if let (Some((slope, _)), Some((target, name))) = (fit, rate.target) {
            writeln!(md, "Log-log fit: {}.\n", rate_verdict(slope, target, name, rate.upper_bound_only)).unwrap();
        }
        if rate.target.is_none() {
            if let (Some(v), Some(se)) = (table.column("estimate"), table.column("std_error")) {
                let worst = v
                    .iter()
                    .zip(&se)
                    .map(|(v, s)| if *v <= 0.0 { 0.0 } else if *s > 0.0 { v / s } else { f64::INFINITY })
                    .fold(0.0, f64::max);
                let verdict = if worst <= 3.0 { "within" } else { "beyond" };
                writeln!(md, "Largest defect is {worst:.2} standard errors: {verdict} 3 SE of zero.\n").unwrap();
            }
        }
        if plots {
            if let (Some(ns), Some(vals)) = (table.column("N"), table.column("estimate")) {
                let mut series = vec![Series {
                    label: rate.tag.replace('_', " "),
                    points: ns.iter().copied().zip(vals).collect(),
                    dashed: false,
                }];
                if let Some((slope, intercept)) = fit {
                    series.push(Series {
                        label: format!("fit, slope {slope:.3}"),
                        points: ns.iter().map(|&n| (n, (intercept + slope * n.ln()).exp())).collect(),
                        dashed: true,
                    });
                }
                let name = format!("rates_{}.svg", rate.tag);
                bundle.add(&name, chart(rate.title, "N", "estimate", Scale::Log, &series));
                writeln!(md, "![{}]({name})\n", rate.tag).unwrap();
            }
        }
    }
    if plots {
        if let Some(p) = listed("riccati_pi.csv") {
            let series = eigen_series(&Table::read(&p)?);
            bundle.add(
                "pi_eigenvalues.svg",
                chart("Eigenvalues of Pi(t)", "t", "eigenvalue", Scale::Linear, &series),
            );
            md.push_str("## Pi eigenvalues\n\n![pi eigenvalues](pi_eigenvalues.svg)\n\n");
        }
    }
    if manifest.outputs().is_empty() {
        return Err(Failure::Validation(format!("{} lists no outputs to report", dir.display())));
    }
    bundle.add("summary.md", md);
    for p in bundle.commit()? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
