//! Heterogeneous synthetic clients (per-client mean shifts up to ±100 and
//! per-client covariances): grid-tuned final losses and divergence reports.
//!
//! cargo run --release --example heterogeneous -- [seed]

use fednewton::harness::{load_dataset, run_grid, DatasetKind, RunConfig};
use fednewton::orchestrator::Method;

fn main() -> fednewton::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .map_or(0, |s| s.parse().expect("integer seed"));
    let base = RunConfig {
        dataset: DatasetKind::SyntheticHet,
        seed,
        workers: 4,
        ..RunConfig::default()
    };
    let data = load_dataset(&base)?;
    for method in Method::ALL {
        let cfg = RunConfig {
            method,
            ..base.clone()
        };
        let outcome = run_grid(&cfg, &data, &cfg.grid())?;
        let diverged = outcome.cells.iter().filter(|c| c.diverged).count();
        match outcome.best_cell() {
            Some(best) => {
                let report = best.trace.as_ref().expect("finite cell").divergence();
                println!(
                    "{method:<24} best loss {:>12.4e} (step {}, l = {}); best run above initial loss in {} rounds; {diverged}/{} cells diverged",
                    best.final_loss,
                    best.step_size,
                    best.local_steps,
                    report.loss_above_initial.len(),
                    outcome.cells.len()
                );
            }
            None => println!("{method:<24} every cell diverged"),
        }
    }
    Ok(())
}
