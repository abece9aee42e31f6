//! Step-size selection over a fixed, decreasing candidate set.
//!
//! Updates are always `w - μ u` with `u` a descent step; the sufficient
//! decrease test is `f(w - μ u) <= f(w) - μ c ⟨u, ∇f(w)⟩`.

use crate::accounting::CostCounters;
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::model::RegularizedObjective;

#[derive(Debug, Clone, PartialEq)]
pub struct StepSizeSet {
    candidates: Vec<f64>,
    armijo_c: f64,
}

impl Default for StepSizeSet {
    fn default() -> Self {
        StepSizeSet {
            candidates: vec![1.0, 0.5, 0.25, 0.1, 0.05, 0.01],
            armijo_c: 1e-4,
        }
    }
}

impl StepSizeSet {
    /// Candidates must be positive and strictly decreasing; `armijo_c ∈ (0, 1)`.
    pub fn new(candidates: Vec<f64>, armijo_c: f64) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::EmptyCandidateSet);
        }
        if candidates.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "step sizes must be positive, got {candidates:?}"
            )));
        }
        if candidates.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidConfig(format!(
                "step sizes must be strictly decreasing, got {candidates:?}"
            )));
        }
        if !(armijo_c > 0.0 && armijo_c < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "armijo constant must lie in (0, 1), got {armijo_c}"
            )));
        }
        Ok(StepSizeSet {
            candidates,
            armijo_c,
        })
    }

    pub fn with_candidates(candidates: Vec<f64>) -> Result<Self> {
        Self::new(candidates, StepSizeSet::default().armijo_c)
    }

    pub fn candidates(&self) -> &[f64] {
        &self.candidates
    }

    pub fn armijo_c(&self) -> f64 {
        self.armijo_c
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    fn smallest(&self) -> f64 {
        *self.candidates.last().expect("validated nonempty")
    }
}

/// Per-client losses at `w - μ_m u` for every candidate `μ_m`, indexed
/// `[client][candidate]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateLosses {
    pub per_client: Vec<Vec<f64>>,
}

impl CandidateLosses {
    fn check(&self, set: &StepSizeSet) -> Result<()> {
        if set.is_empty() {
            return Err(Error::EmptyCandidateSet);
        }
        if self.per_client.is_empty() {
            return Err(Error::IncompleteLossTable("no polled clients".into()));
        }
        if let Some((i, row)) = self
            .per_client
            .iter()
            .enumerate()
            .find(|(_, row)| row.len() != set.len())
        {
            return Err(Error::IncompleteLossTable(format!(
                "client row {i} has {} losses for {} candidates",
                row.len(),
                set.len()
            )));
        }
        Ok(())
    }

    fn sum_at(&self, m: usize) -> f64 {
        self.per_client.iter().map(|row| row[m]).sum()
    }

    fn mean_at(&self, m: usize) -> f64 {
        self.sum_at(m) / self.per_client.len() as f64
    }
}

/// First (largest) candidate satisfying sufficient decrease on the mean
/// polled loss, else the smallest candidate.
pub fn global_backtracking(
    losses: &CandidateLosses,
    base_loss: f64,
    directional_term: f64,
    set: &StepSizeSet,
) -> Result<f64> {
    losses.check(set)?;
    for (m, &mu) in set.candidates.iter().enumerate() {
        if losses.mean_at(m) <= base_loss - mu * set.armijo_c * directional_term {
            return Ok(mu);
        }
    }
    Ok(set.smallest())
}

/// Candidate minimizing the summed polled loss; ties go to the larger step.
/// Non-finite sums never win; if every sum is non-finite the smallest
/// candidate is returned.
pub fn global_argmin(losses: &CandidateLosses, set: &StepSizeSet) -> Result<f64> {
    losses.check(set)?;
    let mut best: Option<(f64, f64)> = None;
    for (m, &mu) in set.candidates.iter().enumerate() {
        let total = losses.sum_at(m);
        if !total.is_finite() {
            continue;
        }
        // strict `<` keeps the earlier (larger) candidate on ties
        if best.is_none_or(|(b, _)| total < b) {
            best = Some((total, mu));
        }
    }
    Ok(best.map_or(set.smallest(), |(_, mu)| mu))
}

/// Sufficient-decrease backtracking on a single client's `f_i`. Evaluates
/// `f_i(w)` and then candidates in order until one is accepted; each loss
/// pass charges `n_i`.
pub fn local_backtracking(
    obj: &RegularizedObjective<'_>,
    w: &[f64],
    u: &[f64],
    grad_at_w: &[f64],
    set: &StepSizeSet,
    counters: &mut CostCounters,
) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptyCandidateSet);
    }
    let base = obj.loss(w)?;
    counters.charge_loss(obj.samples());
    let directional = dot(u, grad_at_w);
    let mut trial = w.to_vec();
    for &mu in &set.candidates {
        trial.copy_from_slice(w);
        crate::linalg::axpy(-mu, u, &mut trial);
        let value = obj.loss(&trial)?;
        counters.charge_loss(obj.samples());
        if value <= base - mu * set.armijo_c * directional {
            return Ok(mu);
        }
    }
    Ok(set.smallest())
}
