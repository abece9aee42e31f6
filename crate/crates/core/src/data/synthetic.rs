use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};

use super::{FederatedDataset, LabeledData};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::model::{sigmoid, ClientDataset};

/// Gaussian class-conditional data per client: label 0 from
/// `N(μ_0 + b_i, A_{i,0}ᵀ A_{i,0})`, label 1 from `N(μ_1 + b_i, A_{i,1}ᵀ A_{i,1})`
/// with `A ~ U(0,1)^{d×d}` and `b_i ~ U(-B, B)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub d: usize,
    pub n_per_client: usize,
    pub clients: usize,
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
    pub bias_range: f64,
    /// `false` forces `b_i = 0` and covariance factors shared by all clients.
    pub heterogeneous: bool,
    /// Share the per-class factors across clients even in heterogeneous mode.
    pub shared_covariance: bool,
    pub seed: u64,
}

impl SyntheticSpec {
    /// 50 clients × 20 samples in `d = 10`, `μ_0 = 0`, `μ_1 = 1`, `B = 100`.
    pub fn iid(seed: u64) -> Self {
        let d = 10;
        SyntheticSpec {
            d,
            n_per_client: 20,
            clients: 50,
            mu0: vec![0.0; d],
            mu1: vec![1.0; d],
            bias_range: 100.0,
            heterogeneous: false,
            shared_covariance: true,
            seed,
        }
    }

    pub fn heterogeneous(seed: u64) -> Self {
        SyntheticSpec {
            heterogeneous: true,
            shared_covariance: false,
            ..SyntheticSpec::iid(seed)
        }
    }

    /// Resizes `d`, resetting the class means to `0` and `1`.
    pub fn with_dim(mut self, d: usize) -> Self {
        self.d = d;
        self.mu0 = vec![0.0; d];
        self.mu1 = vec![1.0; d];
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 1 {
            return Err(Error::InvalidConfig("synthetic d must be >= 1".into()));
        }
        if self.n_per_client < 2 {
            return Err(Error::InvalidConfig(
                "synthetic clients need >= 2 samples so both classes appear".into(),
            ));
        }
        if self.clients < 1 {
            return Err(Error::InvalidConfig("need at least one client".into()));
        }
        if self.mu0.len() != self.d || self.mu1.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: self.mu0.len().min(self.mu1.len()),
            });
        }
        if !(self.bias_range >= 0.0 && self.bias_range.is_finite()) {
            return Err(Error::InvalidConfig("bias range must be >= 0".into()));
        }
        Ok(())
    }

    fn shares_factors(&self) -> bool {
        !self.heterogeneous || self.shared_covariance
    }
}

fn uniform_factor<R: Rng>(d: usize, rng: &mut R) -> Matrix {
    let data = (0..d * d).map(|_| rng.random::<f64>()).collect();
    Matrix::from_row_major(d, d, data).expect("square")
}

/// `mean + Aᵀ z` with `z` standard normal, which has covariance `AᵀA`.
fn gaussian_sample<R: Rng>(mean: &[f64], factor: &Matrix, rng: &mut R, out: &mut [f64]) {
    out.copy_from_slice(mean);
    for k in 0..factor.rows() {
        let z: f64 = rng.sample(StandardNormal);
        crate::linalg::axpy(z, factor.row(k), out);
    }
}

pub fn synth_generate(spec: &SyntheticSpec) -> Result<FederatedDataset> {
    spec.validate()?;
    let d = spec.d;
    let mut shared_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let shared = spec.shares_factors().then(|| {
        [
            uniform_factor(d, &mut shared_rng),
            uniform_factor(d, &mut shared_rng),
        ]
    });

    let mut clients = Vec::with_capacity(spec.clients);
    for i in 0..spec.clients {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64 + 1);
        let bias: Vec<f64> = if spec.heterogeneous && spec.bias_range > 0.0 {
            (0..d)
                .map(|_| rng.random_range(-spec.bias_range..spec.bias_range))
                .collect()
        } else {
            vec![0.0; d]
        };
        let factors = match &shared {
            Some(f) => f.clone(),
            None => [uniform_factor(d, &mut rng), uniform_factor(d, &mut rng)],
        };
        let n0 = spec.n_per_client / 2;
        let mut features = Matrix::zeros(spec.n_per_client, d);
        let mut labels = Vec::with_capacity(spec.n_per_client);
        for j in 0..spec.n_per_client {
            let class = usize::from(j >= n0);
            let mu = if class == 0 { &spec.mu0 } else { &spec.mu1 };
            let mean: Vec<f64> = mu.iter().zip(&bias).map(|(m, b)| m + b).collect();
            gaussian_sample(&mean, &factors[class], &mut rng, features.row_mut(j));
            labels.push(class as f64);
        }
        clients.push(ClientDataset::new(i, features, labels)?);
    }
    let kind = if spec.heterogeneous {
        "synthetic-het"
    } else {
        "synthetic-iid"
    };
    FederatedDataset::new(clients, format!("{kind}(d={d}, seed={})", spec.seed))
}

/// Sparse binary features with a skewed label balance, shaped like the w8a
/// web-page benchmark (300 binary features, ~12 active per row, ~3% positives).
/// Labels come from a planted sparse logistic model.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseBinarySpec {
    pub rows: usize,
    pub d: usize,
    pub mean_active: f64,
    pub positive_rate: f64,
    pub seed: u64,
}

/// Stand-in for w8a when the real file is unavailable.
pub fn w8a_like(seed: u64) -> SparseBinarySpec {
    SparseBinarySpec {
        rows: 49_749,
        d: 300,
        mean_active: 11.65,
        positive_rate: 0.0297,
        seed,
    }
}

impl SparseBinarySpec {
    pub fn generate(&self) -> Result<LabeledData> {
        if self.d == 0 || self.rows == 0 {
            return Err(Error::InvalidConfig("empty sparse binary spec".into()));
        }
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return Err(Error::InvalidConfig(
                "positive rate must lie in (0, 1)".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        // power-law feature popularity
        let raw: Vec<f64> = (0..self.d)
            .map(|j| 1.0 / ((j + 1) as f64).powf(0.8))
            .collect();
        let scale = self.mean_active / raw.iter().sum::<f64>();
        let probs: Vec<Bernoulli> = raw
            .iter()
            .map(|r| Bernoulli::new((r * scale).min(0.9)).expect("valid probability"))
            .collect();
        let mut features = Matrix::zeros(self.rows, self.d);
        for i in 0..self.rows {
            let row = features.row_mut(i);
            for (v, p) in row.iter_mut().zip(&probs) {
                if p.sample(&mut rng) {
                    *v = 1.0;
                }
            }
        }
        let planted: Vec<f64> = (0..self.d)
            .map(|_| {
                if rng.random::<f64>() < 0.3 {
                    2.0 * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                }
            })
            .collect();
        let margins: Vec<f64> = features.row_iter().map(|x| dot(x, &planted)).collect();
        // intercept by bisection on the expected positive rate
        let rate =
            |b: f64| margins.iter().map(|m| sigmoid(m + b)).sum::<f64>() / margins.len() as f64;
        let (mut lo, mut hi) = (-50.0, 50.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if rate(mid) < self.positive_rate {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let intercept = 0.5 * (lo + hi);
        let labels = margins
            .iter()
            .map(|m| f64::from(u8::from(rng.random::<f64>() < sigmoid(m + intercept))))
            .collect();
        let stored_entries = features.nonzeros();
        Ok(LabeledData {
            features,
            labels,
            stored_entries,
        })
    }
}
