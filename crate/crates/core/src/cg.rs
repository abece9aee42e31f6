//! Matrix-free conjugate gradient for `H u = g`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::accounting::CostCounters;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, ParameterVector};
use crate::model::RegularizedObjective;

/// Symmetric positive definite operator applied through products only.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>>;

    /// Per-sample gradient-equivalents charged per application.
    fn unit_cost(&self) -> u64;
}

/// `v ↦ H_i(w) v` for one client at fixed weights.
#[derive(Debug, Clone, Copy)]
pub struct HessianOperator<'o, 'a> {
    objective: &'o RegularizedObjective<'a>,
    weights: &'o [f64],
}

impl<'o, 'a> HessianOperator<'o, 'a> {
    pub fn new(objective: &'o RegularizedObjective<'a>, weights: &'o [f64]) -> Self {
        HessianOperator { objective, weights }
    }
}

impl LinearOperator for HessianOperator<'_, '_> {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.objective.hvp(self.weights, v)?.into_inner())
    }

    fn unit_cost(&self) -> u64 {
        self.objective.samples()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CgInit {
    Zero,
    /// Entries drawn from `U(-1, 1)`.
    RandomUniform(u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgConfig {
    pub max_iterations: usize,
    pub relative_tolerance: f64,
    pub init: CgInit,
}

impl Default for CgConfig {
    fn default() -> Self {
        CgConfig {
            max_iterations: 250,
            relative_tolerance: 1e-6,
            init: CgInit::Zero,
        }
    }
}

impl CgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::InvalidConfig(
                "CG max_iterations must be >= 1".into(),
            ));
        }
        if self.relative_tolerance.is_nan() || self.relative_tolerance <= 0.0 {
            return Err(Error::InvalidConfig(
                "CG relative_tolerance must be > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgResult {
    pub direction: ParameterVector,
    pub iterations_used: usize,
    pub final_residual_norm: f64,
    pub converged: bool,
}

/// Solves `op · u = rhs`. Every operator application charges
/// `op.unit_cost()` to `counters`; with [`CgInit::Zero`] that is exactly one
/// application per iteration, a random start adds one for the initial residual.
pub fn cg_solve<O: LinearOperator>(
    op: &O,
    rhs: &[f64],
    cfg: &CgConfig,
    counters: &mut CostCounters,
) -> Result<CgResult> {
    cfg.validate()?;
    let d = op.dim();
    if rhs.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rhs.len(),
        });
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("CG right-hand side".into()));
    }
    let rhs_norm = norm(rhs);
    if rhs_norm == 0.0 {
        return Ok(CgResult {
            direction: ParameterVector::zeros(d),
            iterations_used: 0,
            final_residual_norm: 0.0,
            converged: true,
        });
    }

    let mut x = vec![0.0; d];
    let mut r = rhs.to_vec();
    if let CgInit::RandomUniform(seed) = cfg.init {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        x.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        let ax = op.apply(&x)?;
        counters.charge_hvp(op.unit_cost());
        axpy(-1.0, &ax, &mut r);
    }

    let threshold = cfg.relative_tolerance * rhs_norm;
    let mut rr = dot(&r, &r);
    let mut p = r.clone();
    let mut iterations = 0;
    while rr.sqrt() > threshold && iterations < cfg.max_iterations {
        let ap = op.apply(&p)?;
        counters.charge_hvp(op.unit_cost());
        iterations += 1;
        let pap = dot(&p, &ap);
        if !pap.is_finite() || pap <= 0.0 {
            return Err(Error::CgBreakdown {
                iteration: iterations,
                reason: format!("curvature pᵀHp = {pap:e}"),
            });
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_next = dot(&r, &r);
        if !rr_next.is_finite() || !alpha.is_finite() {
            return Err(Error::CgBreakdown {
                iteration: iterations,
                reason: "non-finite residual".into(),
            });
        }
        if rr_next == 0.0 {
            rr = 0.0;
            break;
        }
        let beta = rr_next / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_next;
    }

    let final_residual_norm = rr.sqrt();
    Ok(CgResult {
        direction: x.into(),
        iterations_used: iterations,
        final_residual_norm,
        converged: final_residual_norm <= threshold,
    })
}
