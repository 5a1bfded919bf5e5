//! `nelson-fk`: experiment driver.
//!
//! Exit status: 0 on success, 2 when a numerical budget is violated (a
//! `failure.json` record is written next to the manifest), 3 on a
//! configuration or usage error.

mod config;
mod output;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use nelson_fk::action::{ActionForm, ActionKernel};
use nelson_fk::fock::CoherentLabel;
use nelson_fk::levy::{sample_path_seeded, PathSeed};
use nelson_fk::mc::{fiber_semigroup, lambda_sweep, map_paths};
use nelson_fk::oracle::{build_fiber, mc_vs_oracle, renormalization_scan, ScanRow, TruncatedFock};
use nelson_fk::stats::quantile;
use nelson_fk::Cutoff;

use config::{ConfigError, RunConfig};
use output::Outputs;

#[derive(Parser)]
#[command(name = "nelson-fk", version, about = "Feynman-Kac studies of the 2D relativistic Nelson model")]
struct Cli {
    /// TOML run configuration; defaults are used when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 lets rayon decide.
    #[arg(long, global = true, env = "NELSON_FK_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the invariant suite.
    Validate,
    /// Fiber semigroup estimates over the configured t and ξ lists.
    Semigroup,
    /// Cutoff sweep on common paths over `mc.lambdas`.
    Sweep,
    /// Oracle ground-energy scan over `scan.lambdas` and vacuum evolution.
    Oracle,
    /// Monte Carlo against the oracle at the model cutoff.
    Compare,
    /// Sample paths and dump their jumps as CSV.
    Paths {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Per-path identity between the two forms of the action.
    ActionId,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Semigroup => "semigroup",
            Command::Sweep => "sweep",
            Command::Oracle => "oracle",
            Command::Compare => "compare",
            Command::Paths { .. } => "paths",
            Command::ActionId => "action-id",
        }
    }
}

enum Status {
    Pass,
    Fail(serde_json::Value),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::Fail(_)) => ExitCode::from(2),
        Err(e) if e.is::<ConfigError>() || e.downcast_ref::<nelson_fk::Error>().is_some_and(is_input_error) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn is_input_error(e: &nelson_fk::Error) -> bool {
    matches!(e, nelson_fk::Error::InvalidParameter { .. } | nelson_fk::Error::BasisTooLarge { .. } | nelson_fk::Error::InfiniteCutoff)
}

fn run(cli: Cli) -> Result<Status> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    if let Command::Paths { n, seed } = &cli.command {
        cfg.mc.n_paths = n.unwrap_or(cfg.mc.n_paths);
        cfg.mc.seed = seed.unwrap_or(cfg.mc.seed);
    }
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("starting worker pool")?;
    }
    let name = cli.command.name();
    let mut out = Outputs::new(&cfg.output.dir, name, &cfg)?;
    let status = match cli.command {
        Command::Validate => cmd_validate(&cfg, &mut out)?,
        Command::Semigroup => cmd_semigroup(&cfg, &mut out)?,
        Command::Sweep => cmd_sweep(&cfg, &mut out)?,
        Command::Oracle => cmd_oracle(&cfg, &mut out)?,
        Command::Compare => cmd_compare(&cfg, &mut out)?,
        Command::Paths { .. } => cmd_paths(&cfg, &mut out)?,
        Command::ActionId => cmd_action_id(&cfg, &mut out)?,
    };
    let label = match &status {
        Status::Pass => "pass",
        Status::Fail(record) => {
            out.json("failure.json", &json!({ "kind": "numerical_budget", "failures": record }))?;
            "numerical_budget_failure"
        }
    };
    out.finish(&cfg, label)?;
    Ok(status)
}

fn cmd_validate(cfg: &RunConfig, out: &mut Outputs) -> Result<Status> {
    let checks = validate::run(cfg)?;
    for c in &checks {
        println!("{:<4} {:<52} {:>11.3e} <= {:.1e}", if c.pass { "ok" } else { "FAIL" }, c.name, c.residual, c.tolerance);
    }
    out.json("validate.json", &checks)?;
    let failed: Vec<_> = checks.iter().filter(|c| !c.pass).collect();
    Ok(if failed.is_empty() {
        Status::Pass
    } else {
        Status::Fail(serde_json::to_value(failed)?)
    })
}

#[derive(Serialize)]
struct EstimateRow {
    t: f64,
    xi_x: f64,
    xi_y: f64,
    lambda: Cutoff,
    mean_re: f64,
    mean_im: f64,
    std_err: f64,
    n_paths: usize,
}

fn cmd_semigroup(cfg: &RunConfig, out: &mut Outputs) -> Result<Status> {
    let p = cfg.params()?;
    let grid = cfg.grid_for(&[p.lambda])?;
    let om = CoherentLabel::vacuum(&grid);
    let mut ests = Vec::new();
    for &t in &cfg.mc.t {
        for &xi in &cfg.mc.xi {
            ests.push(fiber_semigroup(xi, t, &p, &grid, &om, &om, &cfg.mc())?);
        }
    }
    let rows: Vec<EstimateRow> = ests
        .iter()
        .map(|e| EstimateRow {
            t: e.t,
            xi_x: e.xi.unwrap_or_default()[0],
            xi_y: e.xi.unwrap_or_default()[1],
            lambda: e.lambda,
            mean_re: e.mean_re,
            mean_im: e.mean_im,
            std_err: e.std_err,
            n_paths: e.n_paths,
        })
        .collect();
    out.json("semigroup.json", &ests)?;
    out.csv("semigroup.csv", &rows)?;
    Ok(Status::Pass)
}

#[derive(Serialize)]
struct SweepRow {
    t: f64,
    xi_x: f64,
    xi_y: f64,
    lambda: Cutoff,
    mean_re: f64,
    mean_im: f64,
    std_err: f64,
    diff_to_last: f64,
    std_err_diff_to_last: f64,
}

fn cmd_sweep(cfg: &RunConfig, out: &mut Outputs) -> Result<Status> {
    let p = cfg.params()?;
    let grid = cfg.grid_for(&cfg.mc.lambdas)?;
    let om = CoherentLabel::vacuum(&grid);
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for &t in &cfg.mc.t {
        for &xi in &cfg.mc.xi {
            let r = lambda_sweep(xi, t, &p, &grid, &cfg.mc.lambdas, &om, &om, &cfg.mc())?;
            for (e, d) in r.estimates.iter().zip(&r.to_last) {
                rows.push(SweepRow {
                    t,
                    xi_x: xi[0],
                    xi_y: xi[1],
                    lambda: e.lambda,
                    mean_re: e.mean_re,
                    mean_im: e.mean_im,
                    std_err: e.std_err,
                    diff_to_last: d.abs_diff,
                    std_err_diff_to_last: d.std_err,
                });
            }
            reports.push(r);
        }
    }
    out.json("sweep.json", &reports)?;
    out.csv("sweep.csv", &rows)?;
    Ok(Status::Pass)
}

fn cmd_oracle(cfg: &RunConfig, out: &mut Outputs) -> Result<Status> {
    let p = cfg.params()?;
    let mut rows: Vec<ScanRow> = Vec::new();
    for &xi in &cfg.mc.xi {
        rows.extend(renormalization_scan(xi, &p, &cfg.scan.lambdas, &cfg.oracle)?);
    }
    let mut evolution = Vec::new();
    if let Cutoff::Finite(l) = p.lambda {
        let tr = TruncatedFock::on_ball(l, p.m_b, &cfg.oracle)?;
        for &xi in &cfg.mc.xi {
            let spec = build_fiber(xi, &p, &tr, cfg.oracle.eren_mode)?.spectral()?;
            let v = tr.vacuum();
            for &t in &cfg.mc.t {
                let z = spec.expectation(t, &v, &v)?;
                evolution.push(json!({ "xi": xi, "t": t, "vacuum_re": z.re, "vacuum_im": z.im, "E0": spec.ground_energy(), "dim": tr.dim() }));
            }
        }
    }
    out.json("oracle.json", &json!({ "scan": rows, "evolution": evolution }))?;
    out.csv("scan.csv", &rows)?;
    Ok(Status::Pass)
}

fn cmd_compare(cfg: &RunConfig, out: &mut Outputs) -> Result<Status> {
    let p = cfg.params()?;
    let grid = cfg.grid_for(&[p.lambda])?;
    let vacuum = |_: [f64; 2]| Complex64::new(0.0, 0.0);
    let mut results = Vec::new();
    for &t in &cfg.mc.t {
        for &xi in &cfg.mc.xi {
            let c = mc_vs_oracle(xi, t, &p, &cfg.oracle, &grid, &vacuum, &vacuum, &cfg.mc())?;
            println!(
                "t={t} xi={xi:?}: oracle {:.6} mc {:.6} |diff| {:.2e} <= 3SE {:.2e} + budget {:.2e}: {}",
                c.oracle_re,
                c.mc.mean_re,
                c.abs_diff,
                3.0 * c.mc.std_err,
                c.budget.total(),
                if c.pass { "pass" } else { "FAIL" }
            );
            results.push(c);
        }
    }
    out.json("compare.json", &results)?;
    let failed: Vec<_> = results.iter().filter(|c| !c.pass).collect();
    Ok(if failed.is_empty() {
        Status::Pass
    } else {
        Status::Fail(serde_json::to_value(failed)?)
    })
}

fn cmd_paths(cfg: &RunConfig, out: &mut Outputs) -> Result<Status> {
    let p = cfg.params()?;
    let horizon = cfg.mc.t.iter().copied().fold(0.0, f64::max);
    anyhow::ensure!(horizon > 0.0, ConfigError("at `mc.t`: need a positive time to sample paths".into()));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["path", "s", "dx", "dy"])?;
    for i in 0..cfg.mc.n_paths {
        let path = sample_path_seeded(horizon, cfg.levy.eps, &p, PathSeed { seed: cfg.mc.seed, index: i as u64 })?;
        for e in path.events() {
            w.serialize((i, e.time, e.jump[0], e.jump[1]))?;
        }
    }
    out.raw("paths.csv", &w.into_inner()?)?;
    Ok(Status::Pass)
}

#[derive(Serialize)]
struct ActionRow {
    path: usize,
    lambda: f64,
    defining: f64,
    ito_re: f64,
    ito_im: f64,
}

fn cmd_action_id(cfg: &RunConfig, out: &mut Outputs) -> Result<Status> {
    let lambdas: Vec<f64> = cfg.mc.lambdas.iter().filter_map(|l| l.finite().ok()).collect();
    anyhow::ensure!(!lambdas.is_empty(), ConfigError("at `mc.lambdas`: need at least one finite cutoff".into()));
    let top = lambdas.iter().copied().fold(0.0, f64::max);
    let p = cfg.params()?.with_cutoff(Cutoff::Finite(top));
    let t = cfg.mc.t.iter().copied().fold(0.0, f64::max);
    anyhow::ensure!(t > 0.0, ConfigError("at `mc.t`: need a positive time".into()));
    let cutoffs: Vec<Cutoff> = lambdas.iter().map(|&l| Cutoff::Finite(l)).collect();
    let grid = cfg.grid_for(&cutoffs)?;
    let kernel = ActionKernel::new(&grid, &p, Cutoff::Finite(top));
    let per_path = map_paths(&cfg.mc(), t, &p, |path| {
        let scan = kernel.scan(path, t, &[], &[])?;
        cutoffs
            .iter()
            .map(|&l| {
                let d = kernel.defining_from(&scan, l)?;
                let i = kernel.ito_from(&scan, l, ActionForm::Ito);
                Ok((l.as_f64(), d.value, i.raw))
            })
            .collect::<nelson_fk::Result<Vec<_>>>()
    })?;
    let mut rows = Vec::new();
    for (k, vals) in per_path.iter().enumerate() {
        for &(lambda, defining, ito) in vals {
            rows.push(ActionRow {
                path: k,
                lambda,
                defining,
                ito_re: ito.re,
                ito_im: ito.im,
            });
        }
    }
    let diff: Vec<f64> = rows.iter().map(|r| (r.defining - r.ito_re).abs()).collect();
    let imag: Vec<f64> = rows.iter().map(|r| r.ito_im.abs()).collect();
    let stats = json!({
        "t": t,
        "lambdas": lambdas,
        "n_paths": cfg.mc.n_paths,
        "diff_median": quantile(&diff, 0.5),
        "diff_p99": quantile(&diff, 0.99),
        "diff_max": diff.iter().copied().fold(0.0, f64::max),
        "imag_median": quantile(&imag, 0.5),
        "imag_p99": quantile(&imag, 0.99),
        "budget": { "median": 1e-4, "p99": 1e-3 },
    });
    println!("{}", serde_json::to_string_pretty(&stats)?);
    out.json("action_id.json", &stats)?;
    out.csv("action_id.csv", &rows)?;
    let ok = quantile(&diff, 0.5) <= 1e-4 && quantile(&diff, 0.99) <= 1e-3 && quantile(&imag, 0.5) <= 1e-4 && quantile(&imag, 0.99) <= 1e-3;
    Ok(if ok { Status::Pass } else { Status::Fail(stats) })
}
