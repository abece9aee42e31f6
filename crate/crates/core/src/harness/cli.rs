//! `fednewton run | grid | hessian-similarity`
//!
//! Flags are generated from [`CONFIG_KEYS`], so every config key is also a
//! `--flag` and vice versa.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Arg, ArgMatches, Command};

use super::{
    hessian_similarity, load_dataset, run_grid, run_on, run_to_file, with_workers,
    write_grid_summary, write_hessian_report, HessianPoint, HessianSimilarityConfig, RunConfig,
    CONFIG_KEYS,
};
use crate::error::{Error, Result};
use crate::linalg::ParameterVector;
use crate::model::objectives;

fn help_for(key: &str) -> &'static str {
    match key {
        "method" => "giant | giant-local-global-ls | giant-local-local-ls | localnewton-global-ls | localnewton | fedavg",
        "dataset" => "w8a | w8a-like | synthetic-iid | synthetic-het | cache",
        "data-path" => "LibSVM file for w8a, cache file for cache",
        "width" => "feature count override for LibSVM input",
        "clients" => "number of clients |S|",
        "active" => "active clients per round |S_t|",
        "rounds" => "server steps",
        "seed" => "seed for data generation, partitioning and client sampling",
        "local-steps" => "local iterations l",
        "step-size" => "local step size (second-order) or gradient step (fedavg)",
        "cg-max-iter" => "CG iteration cap",
        "cg-tol" => "CG relative residual tolerance",
        "cg-init" => "zero | random:<seed>",
        "mu-set" => "comma-separated decreasing server step sizes",
        "armijo-c" => "sufficient-decrease constant",
        "resample-ls" => "poll a fresh client sample for the server line search",
        "charge-loss-evals" => "charge loss-only passes to the gradient budget",
        "gamma" => "l2 regularization",
        "fraction" => "row sampling fraction before partitioning (w8a)",
        "dim" => "synthetic dimension",
        "samples-per-client" => "synthetic samples per client",
        "bias-range" => "synthetic heterogeneous bias range B",
        "workers" => "worker threads",
        "out" => "output directory",
        "grid-step-sizes" => "comma-separated grid step sizes",
        "grid-local-steps" => "comma-separated grid local step counts",
        "norm" => "frobenius | spectral",
        "hessian-point" => "zero | final",
        "draws" => "random subsets per k in the Hessian analysis",
        _ => "",
    }
}

fn with_flags(cmd: Command) -> Command {
    let cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .help("key = value config file; flags override it"),
    );
    CONFIG_KEYS.iter().fold(cmd, |cmd, key| {
        cmd.arg(
            Arg::new(*key)
                .long(*key)
                .value_name("VALUE")
                .help(help_for(key)),
        )
    })
}

pub fn command() -> Command {
    Command::new("fednewton")
        .about("Second-order federated optimization simulator")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(with_flags(
            Command::new("run").about("Run one experiment and write its trace CSV"),
        ))
        .subcommand(with_flags(
            Command::new("grid").about("Sweep step size × local steps and report the best cell"),
        ))
        .subcommand(with_flags(Command::new("hessian-similarity").about(
            "Error of averaged local Hessians against the population Hessian",
        )))
}

/// File values first, then flags.
pub fn resolve_config(matches: &ArgMatches) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = matches.get_one::<String>("config") {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        cfg.apply_text(&text)?;
    }
    for key in CONFIG_KEYS {
        if let Some(value) = matches.get_one::<String>(key) {
            cfg.set(key, value)?;
        }
    }
    Ok(cfg)
}

fn run(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let (trace, path) = run_to_file(cfg)?;
    let report = trace.divergence();
    writeln!(
        out,
        "{} on {}: final loss {} after {} rounds, trace {}",
        cfg.method,
        cfg.dataset,
        trace
            .final_loss()
            .map_or("n/a".into(), |l| format!("{l:.6e}")),
        trace.rounds(),
        path.display()
    )?;
    if report.diverged() {
        writeln!(
            out,
            "divergence: {} client failures, {} degenerate rounds, {} rounds above initial loss",
            report.client_failures.len(),
            report.degenerate_rounds.len(),
            report.loss_above_initial.len()
        )?;
    }
    Ok(())
}

fn grid(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let data = load_dataset(cfg)?;
    let spec = cfg.grid();
    let outcome = run_grid(cfg, &data, &spec)?;
    write_grid_summary(cfg, &outcome, &cfg.out)?;
    match outcome.best_cell() {
        Some(best) => writeln!(
            out,
            "{} on {}: best step size {} with {} local steps, final loss {:.6e} ({} cells)",
            cfg.method,
            cfg.dataset,
            best.step_size,
            best.local_steps,
            best.final_loss,
            outcome.cells.len()
        )?,
        None => writeln!(out, "{}: every grid cell diverged", cfg.method)?,
    }
    Ok(())
}

fn hessian(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let data = load_dataset(cfg)?;
    let w = match cfg.hessian_point {
        HessianPoint::Zero => ParameterVector::zeros(data.d),
        HessianPoint::Final => run_on(cfg, &data)?
            .records
            .last()
            .expect("trace has an initial record")
            .weights
            .clone(),
    };
    let objs = objectives(&data.clients, cfg.gamma)?;
    let hcfg = HessianSimilarityConfig {
        norm: cfg.norm,
        draws: cfg.draws,
        seed: cfg.seed,
        ..HessianSimilarityConfig::default()
    };
    let report = with_workers(cfg.workers, || hessian_similarity(&objs, &w, &hcfg))??;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::file(&cfg.out, e))?;
    let path: PathBuf = cfg.out.join(format!(
        "hessian_similarity_{}_{}.csv",
        cfg.dataset.name(),
        cfg.seed
    ));
    write_hessian_report(&report, &path)?;
    writeln!(
        out,
        "identity baseline {:.6e}; k=1 error {:.6e}; k={} error {:.6e}; report {}",
        report.identity_baseline,
        report.mean_error.first().copied().unwrap_or(f64::NAN),
        report.ks.last().copied().unwrap_or(0),
        report.mean_error.last().copied().unwrap_or(f64::NAN),
        path.display()
    )?;
    Ok(())
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render();
            let _ = if code == 0 {
                write!(out, "{rendered}")
            } else {
                write!(err, "{rendered}")
            };
            return code;
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let result = resolve_config(sub).and_then(|cfg| match name {
        "run" => run(&cfg, out),
        "grid" => grid(&cfg, out),
        "hessian-similarity" => hessian(&cfg, out),
        _ => unreachable!("clap rejects unknown subcommands"),
    });
    match result {
        Ok(()) => 0,
        Err(e @ (Error::InvalidConfig(_) | Error::UnknownKey(_))) => {
            let _ = writeln!(err, "usage error: {e}");
            2
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

pub fn main() -> i32 {
    run_cli(
        std::env::args_os(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    )
}
