//! A single GIANT step on a pure quadratic lands on the optimum, and
//! matrix-free CG reproduces a dense Newton solve.
//!
//! cargo run --example quadratic_newton

use fednewton::accounting::CostCounters;
use fednewton::cg::{cg_solve, CgConfig, HessianOperator};
use fednewton::linalg::{Matrix, ParameterVector};
use fednewton::model::{ClientDataset, RegularizedObjective};
use fednewton::orchestrator::{run_round, Method, MethodConfig, RoundState};

fn main() -> fednewton::Result<()> {
    // zero features leave only the regularizer: f(w) = ln 2 + γ/2 ‖w‖²
    let data = ClientDataset::new(0, Matrix::zeros(4, 3), vec![1.0, 0.0, 1.0, 0.0])?;
    let clients = vec![RegularizedObjective::new(&data, 0.5)?];
    let state = RoundState {
        w: ParameterVector::from(vec![2.0, -1.0, 0.5]),
        ..RoundState::initial(3, 0)
    };
    let (next, report) = run_round(&state, &MethodConfig::new(Method::Giant), 1, &clients)?;
    println!(
        "GIANT on a quadratic: ‖w‖ {:.3} -> {:.1e} with μ = {:?}, {} comm rounds, {} gradient-equivalents",
        state.w.norm(),
        next.w.norm(),
        report.step_size,
        next.counters.comm_rounds,
        next.counters.grad_evals
    );

    let rows = vec![
        vec![1.0, 0.2, -0.5],
        vec![-0.3, 1.1, 0.4],
        vec![0.8, -0.7, 0.9],
        vec![0.1, 0.3, -1.2],
    ];
    let data = ClientDataset::new(1, Matrix::from_rows(&rows)?, vec![1.0, 0.0, 1.0, 0.0])?;
    let obj = RegularizedObjective::new(&data, 1e-2)?;
    let w = [0.2, -0.1, 0.3];
    let g = obj.gradient(&w)?;
    let mut counters = CostCounters::default();
    let cfg = CgConfig {
        relative_tolerance: 1e-12,
        ..CgConfig::default()
    };
    let res = cg_solve(&HessianOperator::new(&obj, &w), &g, &cfg, &mut counters)?;
    let dense = obj
        .dense_hessian(&w, 16)?
        .cholesky()
        .expect("positive definite")
        .solve(&nalgebra::DVector::from_column_slice(&g));
    let diff = res
        .direction
        .iter()
        .zip(dense.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!(
        "CG: {} iterations, {} HVP sample-passes, max |u_cg - u_dense| = {diff:.1e}",
        res.iterations_used, counters.hvp_evals
    );
    Ok(())
}
