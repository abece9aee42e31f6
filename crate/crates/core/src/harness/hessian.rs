//! How well an average of `k` local Hessians estimates the population Hessian.

use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::MatrixNorm;
use crate::accounting::format_real;
use crate::error::{Error, Result};
use crate::model::{RegularizedObjective, DEFAULT_DENSE_CAP};

#[derive(Debug, Clone, PartialEq)]
pub struct HessianSimilarityConfig {
    pub norm: MatrixNorm,
    /// Random `k`-subsets averaged per `k` for `mean_error`.
    pub draws: usize,
    pub seed: u64,
    /// Largest `k` reported; defaults to all clients.
    pub max_k: Option<usize>,
    pub dense_cap: usize,
}

impl Default for HessianSimilarityConfig {
    fn default() -> Self {
        HessianSimilarityConfig {
            norm: MatrixNorm::Frobenius,
            draws: 20,
            seed: 0,
            max_k: None,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HessianSimilarityReport {
    pub ks: Vec<usize>,
    /// Mean over random `k`-subsets of `‖mean_k H_i - H‖` in the configured norm.
    pub mean_error: Vec<f64>,
    /// Exact root-mean-square Frobenius error over all `k`-subsets.
    pub rms_frobenius: Vec<f64>,
    /// `‖I - H‖`, the implicit preconditioner of plain gradient steps.
    pub identity_baseline: f64,
}

/// Largest absolute eigenvalue of a symmetric matrix by power iteration.
fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    let d = m.nrows();
    if d == 0 {
        return 0.0;
    }
    let mut v = nalgebra::DVector::from_fn(d, |i, _| 1.0 + (i as f64 * 0.618_033_988_7).fract());
    v /= v.norm();
    let mut estimate = 0.0;
    for _ in 0..500 {
        let next = m * &v;
        let n = next.norm();
        if n == 0.0 {
            return 0.0;
        }
        let converged = (n - estimate).abs() <= 1e-12 * n;
        estimate = n;
        v = next / n;
        if converged {
            break;
        }
    }
    estimate
}

pub fn matrix_norm(m: &DMatrix<f64>, norm: MatrixNorm) -> f64 {
    match norm {
        MatrixNorm::Frobenius => m.norm(),
        MatrixNorm::Spectral => spectral_norm(m),
    }
}

fn mean_of(hessians: &[DMatrix<f64>], subset: &[usize]) -> DMatrix<f64> {
    let mut acc = hessians[subset[0]].clone();
    for &i in &subset[1..] {
        acc += &hessians[i];
    }
    acc / subset.len() as f64
}

/// Dense local Hessians at `w`, their mean `H`, and for `k = 1..=K` the error
/// of averaging `k` randomly chosen local Hessians.
pub fn hessian_similarity(
    clients: &[RegularizedObjective<'_>],
    w: &[f64],
    cfg: &HessianSimilarityConfig,
) -> Result<HessianSimilarityReport> {
    let total = clients.len();
    if total == 0 {
        return Err(Error::EmptyClientSet);
    }
    if cfg.draws == 0 {
        return Err(Error::InvalidConfig("draws must be >= 1".into()));
    }
    let max_k = cfg.max_k.unwrap_or(total).min(total);
    let hessians = clients
        .par_iter()
        .map(|c| c.dense_hessian(w, cfg.dense_cap))
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<usize> = (0..total).collect();
    let global = mean_of(&hessians, &all);
    let d = global.nrows();
    let identity_baseline = matrix_norm(&(DMatrix::identity(d, d) - &global), cfg.norm);

    let spread = hessians
        .iter()
        .map(|h| (h - &global).norm_squared())
        .sum::<f64>()
        / total as f64;

    let ks: Vec<usize> = (1..=max_k).collect();
    let mean_error = ks
        .par_iter()
        .map(|&k| {
            if k == total {
                return matrix_norm(&(mean_of(&hessians, &all) - &global), cfg.norm);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k as u64);
            let mut sum = 0.0;
            for _ in 0..cfg.draws {
                let mut subset = index::sample(&mut rng, total, k).into_vec();
                subset.sort_unstable();
                sum += matrix_norm(&(mean_of(&hessians, &subset) - &global), cfg.norm);
            }
            sum / cfg.draws as f64
        })
        .collect();
    // E‖mean_k - H‖²_F = (N-k) / (k (N-1)) · (1/N) Σ ‖H_i - H‖²_F for sampling without replacement
    let rms_frobenius = ks
        .iter()
        .map(|&k| {
            if total == 1 {
                0.0
            } else {
                ((total - k) as f64 / (k as f64 * (total - 1) as f64) * spread).sqrt()
            }
        })
        .collect();

    Ok(HessianSimilarityReport {
        ks,
        mean_error,
        rms_frobenius,
        identity_baseline,
    })
}

/// CSV with columns `k, mean_error, rms_frobenius, identity_baseline`.
pub fn write_hessian_report(report: &HessianSimilarityReport, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(["k", "mean_error", "rms_frobenius", "identity_baseline"])?;
    for (i, k) in report.ks.iter().enumerate() {
        w.write_record([
            k.to_string(),
            format_real(report.mean_error[i]),
            format_real(report.rms_frobenius[i]),
            format_real(report.identity_baseline),
        ])?;
    }
    w.flush()?;
    Ok(())
}
