//! Tune LocalNewton with global line search, then give FedAvg the same
//! per-round gradient budget and compare final losses.
//!
//! cargo run --release --example fair_budget -- [path/to/w8a]
//!
//! Without a path the generated w8a-shaped surrogate is used.

use std::path::PathBuf;

use fednewton::accounting::match_budget;
use fednewton::harness::{load_dataset, run_grid, DatasetKind, GridSpec, RunConfig};
use fednewton::orchestrator::{Method, MethodConfig};

fn main() -> fednewton::Result<()> {
    let base = match std::env::args().nth(1) {
        Some(path) => RunConfig {
            dataset: DatasetKind::W8a,
            data_path: Some(PathBuf::from(path)),
            width: Some(300),
            ..RunConfig::default()
        },
        None => RunConfig {
            dataset: DatasetKind::W8aLike,
            ..RunConfig::default()
        },
    };
    let base = RunConfig { workers: 4, ..base };
    let data = load_dataset(&base)?;
    println!(
        "{}: {} clients, ~{:.1} rows each",
        data.provenance,
        data.clients.len(),
        data.mean_client_samples()
    );

    let ln = RunConfig {
        method: Method::LocalNewtonGlobalLS,
        ..base.clone()
    };
    let tuned = run_grid(&ln, &data, &ln.grid())?;
    let best = tuned.best_cell().expect("a finite cell");
    let trace = best.trace.as_ref().expect("finite cell");
    let fedavg = match_budget(
        trace,
        data.mean_client_samples(),
        &MethodConfig::new(Method::FedAvg),
    )?;
    println!(
        "LocalNewton+LS: loss {:.6} (step {}, l = {}), {} gradient-equivalents -> FedAvg l = {}",
        best.final_loss,
        best.step_size,
        best.local_steps,
        trace.records.last().expect("record").grad_evals,
        fedavg.local.local_steps
    );

    let fa = RunConfig {
        method: Method::FedAvg,
        ..base.clone()
    };
    let spec = GridSpec {
        step_sizes: fa.grid().step_sizes,
        local_steps: vec![fedavg.local.local_steps],
    };
    let sweep = run_grid(&fa, &data, &spec)?;
    let fa_best = sweep.best_cell().expect("a finite cell");
    println!(
        "FedAvg: loss {:.6} (step {}), {} gradient-equivalents; ratio {:.4}",
        fa_best.final_loss,
        fa_best.step_size,
        fa_best
            .trace
            .as_ref()
            .expect("finite cell")
            .records
            .last()
            .expect("record")
            .grad_evals,
        fa_best.final_loss / best.final_loss
    );
    Ok(())
}
