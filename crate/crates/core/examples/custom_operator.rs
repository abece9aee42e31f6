//! `cg_solve` works on any symmetric positive definite operator that exposes
//! products. Here a tridiagonal Laplacian stands in for a Hessian.
//!
//! cargo run --example custom_operator

use fednewton::accounting::CostCounters;
use fednewton::cg::{cg_solve, CgConfig, CgInit, LinearOperator};

struct Laplacian {
    n: usize,
    shift: f64,
}

impl LinearOperator for Laplacian {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, v: &[f64]) -> fednewton::Result<Vec<f64>> {
        Ok((0..self.n)
            .map(|i| {
                let left = if i > 0 { v[i - 1] } else { 0.0 };
                let right = if i + 1 < self.n { v[i + 1] } else { 0.0 };
                (2.0 + self.shift) * v[i] - left - right
            })
            .collect())
    }

    fn unit_cost(&self) -> u64 {
        1
    }
}

fn main() -> fednewton::Result<()> {
    let op = Laplacian { n: 50, shift: 0.01 };
    let rhs = vec![1.0; op.n];
    for init in [CgInit::Zero, CgInit::RandomUniform(7)] {
        let mut counters = CostCounters::default();
        let cfg = CgConfig {
            relative_tolerance: 1e-10,
            init,
            ..CgConfig::default()
        };
        let res = cg_solve(&op, &rhs, &cfg, &mut counters)?;
        println!(
            "{init:?}: converged {} after {} iterations, residual {:.2e}, {} operator applications",
            res.converged, res.iterations_used, res.final_residual_norm, counters.hvp_evals
        );
    }
    Ok(())
}
