//! All six methods on the i.i.d. synthetic benchmark with their default
//! settings, writing one trace CSV per method.
//!
//! cargo run --release --example iid_synthetic -- [out_dir]

use std::path::PathBuf;

use fednewton::accounting::{export_trace, trace_file_name};
use fednewton::harness::{load_dataset, run_on, DatasetKind, RunConfig};
use fednewton::orchestrator::Method;

fn main() -> fednewton::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "traces".into()));
    std::fs::create_dir_all(&out)?;
    let base = RunConfig {
        dataset: DatasetKind::SyntheticIid,
        rounds: 20,
        ..RunConfig::default()
    };
    let data = load_dataset(&base)?;
    println!(
        "{} ({} clients, d = {})",
        data.provenance,
        data.clients.len(),
        data.d
    );
    println!(
        "{:<24} {:>12} {:>12} {:>12}",
        "method", "final loss", "comm rounds", "grad evals"
    );
    for method in Method::ALL {
        let cfg = match method {
            Method::FedAvg => RunConfig {
                method,
                local_steps: 10,
                step_size: 0.01,
                ..base.clone()
            },
            _ => RunConfig {
                method,
                local_steps: 3,
                step_size: 0.5,
                ..base.clone()
            },
        };
        let trace = run_on(&cfg, &data)?;
        let last = trace.records.last().expect("initial record");
        println!(
            "{:<24} {:>12.6} {:>12} {:>12}",
            method, last.global_loss, last.comm_rounds, last.grad_evals
        );
        export_trace(
            &trace,
            &out.join(trace_file_name(method, "synthetic-iid", cfg.seed)),
        )?;
    }
    println!("traces written to {}", out.display());
    Ok(())
}
