//! Step size × local steps sweep with per-cell traces and a summary CSV.
//!
//! cargo run --release --example grid_search -- [method] [out_dir]

use std::path::PathBuf;

use fednewton::harness::{load_dataset, run_grid, write_grid_summary, RunConfig};
use fednewton::orchestrator::Method;

fn main() -> fednewton::Result<()> {
    let mut args = std::env::args().skip(1);
    let method: Method = args
        .next()
        .as_deref()
        .unwrap_or("giant-local-global-ls")
        .parse()?;
    let out = PathBuf::from(args.next().unwrap_or_else(|| "grid".into()));
    let cfg = RunConfig {
        method,
        workers: 4,
        ..RunConfig::default()
    };
    let data = load_dataset(&cfg)?;
    let grid = cfg.grid();
    let outcome = run_grid(&cfg, &data, &grid)?;
    write_grid_summary(&cfg, &outcome, &out)?;

    print!("{:>8}", "step");
    for l in &grid.local_steps {
        print!("{:>11}", format!("l={l}"));
    }
    println!();
    for (row, step) in grid.step_sizes.iter().enumerate() {
        print!("{step:>8}");
        for col in 0..grid.local_steps.len() {
            let cell = &outcome.cells[row * grid.local_steps.len() + col];
            print!("{:>11.5}", cell.final_loss);
        }
        println!();
    }
    if let Some(best) = outcome.best_cell() {
        println!(
            "best: step {} with l = {} -> {:.6}; summary in {}",
            best.step_size,
            best.local_steps,
            best.final_loss,
            out.display()
        );
    }
    Ok(())
}
