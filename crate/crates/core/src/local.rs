//! Per-client local optimization procedures.
//!
//! Methods that are followed by a server line search emit an update vector
//! `u_i = w_0 - w_l`, so the server rule `w - μ u` with `μ = 1` lands on the
//! local endpoint. Methods whose server step averages weights emit `w_l`.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::accounting::CostCounters;
use crate::cg::{cg_solve, CgConfig, HessianOperator};
use crate::error::{Error, Result};
use crate::linalg::ParameterVector;
use crate::line_search::{local_backtracking, StepSizeSet};
use crate::model::RegularizedObjective;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minibatch {
    pub batch_size: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalStepConfig {
    /// `l`, the number of local iterations.
    pub local_steps: usize,
    /// Fixed local step for the second-order methods with a global line search.
    pub local_step_size: f64,
    /// Gradient step for FedAvg.
    pub sgd_step_size: f64,
    /// FedAvg only: sampled minibatches instead of full local gradients.
    pub minibatch: Option<Minibatch>,
}

impl Default for LocalStepConfig {
    fn default() -> Self {
        LocalStepConfig {
            local_steps: 1,
            local_step_size: 1.0,
            sgd_step_size: 0.1,
            minibatch: None,
        }
    }
}

impl LocalStepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.local_steps < 1 {
            return Err(Error::InvalidConfig("local_steps must be >= 1".into()));
        }
        if !(self.local_step_size > 0.0 && self.local_step_size.is_finite()) {
            return Err(Error::InvalidConfig("local step size must be > 0".into()));
        }
        if !(self.sgd_step_size >= 0.0 && self.sgd_step_size.is_finite()) {
            return Err(Error::InvalidConfig("FedAvg step size must be >= 0".into()));
        }
        if matches!(self.minibatch, Some(m) if m.batch_size == 0) {
            return Err(Error::InvalidConfig("minibatch size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LocalOutput {
    UpdateVector(ParameterVector),
    Weights(ParameterVector),
}

impl LocalOutput {
    pub fn vector(&self) -> &ParameterVector {
        match self {
            LocalOutput::UpdateVector(v) | LocalOutput::Weights(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalResult {
    pub kind: LocalOutput,
    pub counters_delta: CostCounters,
    pub cg_iterations: usize,
}

/// What the gradient-exchange phase hands each active client.
#[derive(Debug, Clone, Copy)]
pub struct GlobalGradient<'g> {
    /// `∇f_t(w^t)`, the mean over the active set.
    pub global: &'g [f64],
    /// `∇f_i(w^t)`, this client's own contribution, already paid for.
    pub local: &'g [f64],
    /// `|S_t|`
    pub active: usize,
}

fn ensure_finite(w: &ParameterVector, step: usize) -> Result<()> {
    if w.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged(format!(
            "non-finite weights after local step {}",
            step + 1
        )))
    }
}

struct Solve {
    direction: ParameterVector,
    iterations: usize,
}

fn newton_direction(
    obj: &RegularizedObjective<'_>,
    w: &[f64],
    rhs: &[f64],
    cg: &CgConfig,
    counters: &mut CostCounters,
) -> Result<Solve> {
    let res = cg_solve(&HessianOperator::new(obj, w), rhs, cg, counters)?;
    Ok(Solve {
        direction: res.direction,
        iterations: res.iterations_used,
    })
}

/// GIANT: solve `H_i(w^t) u = ∇f_t(w^t)`.
pub fn giant_local(
    global_grad: &[f64],
    w_t: &ParameterVector,
    obj: &RegularizedObjective<'_>,
    cg: &CgConfig,
) -> Result<LocalResult> {
    let mut counters = CostCounters::default();
    let solve = newton_direction(obj, w_t, global_grad, cg, &mut counters)?;
    Ok(LocalResult {
        kind: LocalOutput::UpdateVector(solve.direction),
        counters_delta: counters,
        cg_iterations: solve.iterations,
    })
}

/// Step rule inside the GIANT-with-local-steps loop.
enum LocalStepRule<'s> {
    Fixed(f64),
    Backtracking(&'s StepSizeSet),
}

fn giant_local_steps(
    grads: GlobalGradient<'_>,
    w_t: &ParameterVector,
    obj: &RegularizedObjective<'_>,
    cg: &CgConfig,
    local_steps: usize,
    rule: LocalStepRule<'_>,
) -> Result<(ParameterVector, CostCounters, usize)> {
    let mut counters = CostCounters::default();
    let mut cg_iterations = 0;
    let inv_active = 1.0 / grads.active as f64;
    let mut w = w_t.clone();
    let mut g = ParameterVector::from(grads.global.to_vec());
    let mut local_grad = ParameterVector::from(grads.local.to_vec());
    for j in 0..local_steps {
        let solve = newton_direction(obj, &w, &g, cg, &mut counters)?;
        cg_iterations += solve.iterations;
        let step = match rule {
            LocalStepRule::Fixed(gamma) => gamma,
            LocalStepRule::Backtracking(set) => {
                local_backtracking(obj, &w, &solve.direction, &local_grad, set, &mut counters)?
            }
        };
        let next = w.stepped(step, &solve.direction);
        ensure_finite(&next, j)?;
        // g_{j+1} = g_j - ∇f_i(w_j)/|S_t| + ∇f_i(w_{j+1})/|S_t|; the last one is never used
        if j + 1 < local_steps {
            let next_grad = obj.gradient(&next)?;
            counters.charge_gradient(obj.samples());
            g.axpy(-inv_active, &local_grad);
            g.axpy(inv_active, &next_grad);
            local_grad = next_grad;
        }
        w = next;
    }
    Ok((w, counters, cg_iterations))
}

/// GIANT with local steps and global line search: fixed local step `γ`,
/// global-gradient estimate refreshed with the client's own gradients.
pub fn giant_local_steps_global_ls(
    grads: GlobalGradient<'_>,
    w_t: &ParameterVector,
    obj: &RegularizedObjective<'_>,
    cg: &CgConfig,
    cfg: &LocalStepConfig,
) -> Result<LocalResult> {
    let (w_l, counters, cg_iterations) = giant_local_steps(
        grads,
        w_t,
        obj,
        cg,
        cfg.local_steps,
        LocalStepRule::Fixed(cfg.local_step_size),
    )?;
    Ok(LocalResult {
        kind: LocalOutput::UpdateVector(w_t.sub(&w_l)),
        counters_delta: counters,
        cg_iterations,
    })
}

/// GIANT with local steps and local line search; returns `w_l`.
pub fn giant_local_steps_local_ls(
    grads: GlobalGradient<'_>,
    w_t: &ParameterVector,
    obj: &RegularizedObjective<'_>,
    cg: &CgConfig,
    cfg: &LocalStepConfig,
    ls: &StepSizeSet,
) -> Result<LocalResult> {
    let (w_l, counters, cg_iterations) = giant_local_steps(
        grads,
        w_t,
        obj,
        cg,
        cfg.local_steps,
        LocalStepRule::Backtracking(ls),
    )?;
    Ok(LocalResult {
        kind: LocalOutput::Weights(w_l),
        counters_delta: counters,
        cg_iterations,
    })
}

fn local_newton_steps(
    w_t: &ParameterVector,
    obj: &RegularizedObjective<'_>,
    cg: &CgConfig,
    local_steps: usize,
    rule: LocalStepRule<'_>,
) -> Result<(ParameterVector, CostCounters, usize)> {
    let mut counters = CostCounters::default();
    let mut cg_iterations = 0;
    let mut w = w_t.clone();
    for j in 0..local_steps {
        let grad = obj.gradient(&w)?;
        counters.charge_gradient(obj.samples());
        let solve = newton_direction(obj, &w, &grad, cg, &mut counters)?;
        cg_iterations += solve.iterations;
        let step = match rule {
            LocalStepRule::Fixed(gamma) => gamma,
            LocalStepRule::Backtracking(set) => {
                local_backtracking(obj, &w, &solve.direction, &grad, set, &mut counters)?
            }
        };
        let next = w.stepped(step, &solve.direction);
        ensure_finite(&next, j)?;
        w = next;
    }
    Ok((w, counters, cg_iterations))
}

/// LocalNewton with global line search: `l` local Newton-CG steps with fixed
/// step `γ`, emitted as `u_i = w_0 - w_l`.
pub fn localnewton_global_ls(
    w_t: &ParameterVector,
    obj: &RegularizedObjective<'_>,
    cg: &CgConfig,
    cfg: &LocalStepConfig,
) -> Result<LocalResult> {
    let (w_l, counters, cg_iterations) = local_newton_steps(
        w_t,
        obj,
        cg,
        cfg.local_steps,
        LocalStepRule::Fixed(cfg.local_step_size),
    )?;
    Ok(LocalResult {
        kind: LocalOutput::UpdateVector(w_t.sub(&w_l)),
        counters_delta: counters,
        cg_iterations,
    })
}

/// LocalNewton: local Newton-CG steps with local backtracking; returns `w_l`.
pub fn localnewton_local(
    w_t: &ParameterVector,
    obj: &RegularizedObjective<'_>,
    cg: &CgConfig,
    cfg: &LocalStepConfig,
    ls: &StepSizeSet,
) -> Result<LocalResult> {
    let (w_l, counters, cg_iterations) = local_newton_steps(
        w_t,
        obj,
        cg,
        cfg.local_steps,
        LocalStepRule::Backtracking(ls),
    )?;
    Ok(LocalResult {
        kind: LocalOutput::Weights(w_l),
        counters_delta: counters,
        cg_iterations,
    })
}

/// FedAvg client: `l` gradient steps `w ← w - η ∇f_i(w)`, full-batch unless a
/// minibatch is configured. `stream` separates minibatch draws per
/// (round, client).
pub fn fedavg_local(
    w_t: &ParameterVector,
    obj: &RegularizedObjective<'_>,
    cfg: &LocalStepConfig,
    stream: u64,
) -> Result<LocalResult> {
    let mut counters = CostCounters::default();
    let mut w = w_t.clone();
    let n = obj.data().len();
    let mut rng = cfg.minibatch.map(|m| {
        let mut rng = ChaCha8Rng::seed_from_u64(m.seed);
        rng.set_stream(stream);
        (rng, m.batch_size.min(n))
    });
    for j in 0..cfg.local_steps {
        let grad = match rng.as_mut() {
            None => {
                counters.charge_gradient(obj.samples());
                obj.gradient(&w)?
            }
            Some((rng, batch)) => {
                let mut rows = index::sample(rng, n, *batch).into_vec();
                rows.sort_unstable();
                counters.charge_gradient(*batch as u64);
                obj.gradient_on(&w, &rows)?
            }
        };
        w.axpy(-cfg.sgd_step_size, &grad);
        ensure_finite(&w, j)?;
    }
    Ok(LocalResult {
        kind: LocalOutput::Weights(w),
        counters_delta: counters,
        cg_iterations: 0,
    })
}
