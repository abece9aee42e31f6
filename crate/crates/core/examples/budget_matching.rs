//! Per-round cost breakdown for every method and the FedAvg local-step count
//! that matches each second-order method's gradient budget.
//!
//! cargo run --example budget_matching

use fednewton::accounting::match_budget;
use fednewton::harness::{load_dataset, RunConfig};
use fednewton::model::objectives;
use fednewton::orchestrator::{run_experiment, ExperimentConfig, Method, MethodConfig};

fn main() -> fednewton::Result<()> {
    let cfg = RunConfig {
        rounds: 5,
        ..RunConfig::default()
    };
    let data = load_dataset(&cfg)?;
    let objs = objectives(&data.clients, cfg.gamma)?;
    println!(
        "{:<24} {:>6} {:>10} {:>10} {:>10} {:>10}",
        "method", "comm", "gradient", "hvp", "loss", "FedAvg l"
    );
    for method in Method::ALL {
        let mut mc = MethodConfig::new(method);
        mc.local.local_steps = 3;
        let exp = ExperimentConfig {
            method: mc,
            rounds: cfg.rounds,
            active_clients: cfg.active,
            seed: cfg.seed,
        };
        let trace = run_experiment(&exp, &objs)?;
        let last = trace.records.last().expect("record");
        // trace rows carry only the total; the round state keeps the breakdown
        let mut state = fednewton::orchestrator::RoundState::initial(data.d, cfg.seed);
        for _ in 0..cfg.rounds {
            state = fednewton::orchestrator::run_round(&state, &exp.method, cfg.active, &objs)?.0;
        }
        let matched = match_budget(
            &trace,
            data.mean_client_samples(),
            &MethodConfig::new(Method::FedAvg),
        )?;
        println!(
            "{:<24} {:>6} {:>10} {:>10} {:>10} {:>10}",
            method,
            last.comm_rounds,
            state.counters.gradient_evals,
            state.counters.hvp_evals,
            state.counters.loss_evals,
            matched.local.local_steps
        );
    }
    Ok(())
}
