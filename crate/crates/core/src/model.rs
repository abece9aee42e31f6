//! ℓ2-regularized logistic regression on one client and over a client set.

use crate::accounting::CostCounters;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Matrix, ParameterVector};

/// Largest dimension for which [`RegularizedObjective::dense_hessian`] materializes `d × d`.
pub const DEFAULT_DENSE_CAP: usize = 512;

/// Feature rows and binary labels owned by one client.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientDataset {
    features: Matrix,
    labels: Vec<f64>,
    client_id: usize,
}

impl ClientDataset {
    /// Labels must be 0 or 1 and there must be at least one row.
    pub fn new(client_id: usize, features: Matrix, labels: Vec<f64>) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::InvalidConfig(format!(
                "client {client_id} has no samples"
            )));
        }
        if labels.len() != features.rows() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                found: labels.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|y| **y != 0.0 && **y != 1.0) {
            return Err(Error::InvalidConfig(format!(
                "client {client_id} has label {bad}, expected 0 or 1"
            )));
        }
        Ok(ClientDataset {
            features,
            labels,
            client_id,
        })
    }

    pub fn client_id(&self) -> usize {
        self.client_id
    }

    pub fn with_client_id(mut self, client_id: usize) -> Self {
        self.client_id = client_id;
        self
    }

    /// Number of samples `n_i`.
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow for large `|z|`.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `f_i(w) = l_i(w) + γ/2 ‖w‖²` for one client's data.
#[derive(Debug, Clone, Copy)]
pub struct RegularizedObjective<'a> {
    data: &'a ClientDataset,
    gamma: f64,
}

impl<'a> RegularizedObjective<'a> {
    pub fn new(data: &'a ClientDataset, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "regularization must be finite and nonnegative, got {gamma}"
            )));
        }
        Ok(RegularizedObjective { data, gamma })
    }

    pub fn data(&self) -> &'a ClientDataset {
        self.data
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `n_i`, the cost of one full pass in per-sample gradient-equivalents.
    pub fn samples(&self) -> u64 {
        self.data.len() as u64
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.data.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.data.dim(),
                found: v.len(),
            });
        }
        Ok(())
    }

    /// Mean negative log-likelihood plus the ℓ2 term, using
    /// `-y log p - (1-y) log(1-p) = softplus(z) - y z` with `z = xᵀw`.
    pub fn loss(&self, w: &[f64]) -> Result<f64> {
        self.check_dim(w)?;
        let n = self.data.len() as f64;
        let nll: f64 = self
            .data
            .features
            .row_iter()
            .zip(&self.data.labels)
            .map(|(x, &y)| {
                let z = dot(x, w);
                softplus(z) - y * z
            })
            .sum();
        Ok(nll / n + 0.5 * self.gamma * dot(w, w))
    }

    /// `(1/n_i) Σ (p_j - y_j) x_j + γ w`
    pub fn gradient(&self, w: &[f64]) -> Result<ParameterVector> {
        self.check_dim(w)?;
        let n = self.data.len() as f64;
        let mut g = vec![0.0; w.len()];
        for (x, &y) in self.data.features.row_iter().zip(&self.data.labels) {
            let r = sigmoid(dot(x, w)) - y;
            if r != 0.0 {
                axpy(r / n, x, &mut g);
            }
        }
        axpy(self.gamma, w, &mut g);
        Ok(g.into())
    }

    /// Gradient of the loss restricted to `rows` (plus the full ℓ2 term).
    pub fn gradient_on(&self, w: &[f64], rows: &[usize]) -> Result<ParameterVector> {
        self.check_dim(w)?;
        if rows.is_empty() {
            return Err(Error::InvalidConfig("empty minibatch".into()));
        }
        let n = rows.len() as f64;
        let mut g = vec![0.0; w.len()];
        for &j in rows {
            let x = self.data.features.row(j);
            let r = sigmoid(dot(x, w)) - self.data.labels[j];
            axpy(r / n, x, &mut g);
        }
        axpy(self.gamma, w, &mut g);
        Ok(g.into())
    }

    /// `H_i(w) v` without forming `H_i`. Pure; see [`Self::hessian_vector_product`]
    /// for the counted variant.
    pub fn hvp(&self, w: &[f64], v: &[f64]) -> Result<ParameterVector> {
        self.check_dim(w)?;
        self.check_dim(v)?;
        let n = self.data.len() as f64;
        let mut out = vec![0.0; w.len()];
        for x in self.data.features.row_iter() {
            let p = sigmoid(dot(x, w));
            let s = p * (1.0 - p) * dot(x, v);
            if s != 0.0 {
                axpy(s / n, x, &mut out);
            }
        }
        axpy(self.gamma, v, &mut out);
        Ok(out.into())
    }

    /// [`Self::hvp`], charging `n_i` per-sample gradient-equivalents to `counters`.
    pub fn hessian_vector_product(
        &self,
        w: &[f64],
        v: &[f64],
        counters: &mut CostCounters,
    ) -> Result<ParameterVector> {
        let out = self.hvp(w, v)?;
        counters.charge_hvp(self.samples());
        Ok(out)
    }

    /// `(1/n_i) Xᵀ diag(p(1-p)) X + γI`, as an analysis oracle only.
    pub fn dense_hessian(&self, w: &[f64], cap: usize) -> Result<nalgebra::DMatrix<f64>> {
        self.check_dim(w)?;
        let d = self.data.dim();
        if d > cap {
            return Err(Error::DenseCapExceeded { d, cap });
        }
        let n = self.data.len() as f64;
        let mut h = nalgebra::DMatrix::<f64>::zeros(d, d);
        for x in self.data.features.row_iter() {
            let p = sigmoid(dot(x, w));
            let s = p * (1.0 - p) / n;
            if s == 0.0 {
                continue;
            }
            for a in 0..d {
                let xa = s * x[a];
                if xa == 0.0 {
                    continue;
                }
                for b in 0..d {
                    h[(a, b)] += xa * x[b];
                }
            }
        }
        for a in 0..d {
            h[(a, a)] += self.gamma;
        }
        Ok(h)
    }
}

/// Objectives for a set of clients sharing `γ`.
pub fn objectives(clients: &[ClientDataset], gamma: f64) -> Result<Vec<RegularizedObjective<'_>>> {
    clients
        .iter()
        .map(|c| RegularizedObjective::new(c, gamma))
        .collect()
}

fn check_client_set(objs: &[RegularizedObjective<'_>]) -> Result<()> {
    let first = objs.first().ok_or(Error::EmptyClientSet)?;
    let d = first.data.dim();
    if let Some(o) = objs.iter().find(|o| o.data.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: o.data.dim(),
        });
    }
    Ok(())
}

/// Unweighted mean of the per-client losses.
pub fn aggregate_loss(objs: &[RegularizedObjective<'_>], w: &[f64]) -> Result<f64> {
    check_client_set(objs)?;
    let mut total = 0.0;
    for o in objs {
        total += o.loss(w)?;
    }
    Ok(total / objs.len() as f64)
}

/// Unweighted mean of the per-client gradients.
pub fn aggregate_gradient(objs: &[RegularizedObjective<'_>], w: &[f64]) -> Result<ParameterVector> {
    check_client_set(objs)?;
    let grads = objs
        .iter()
        .map(|o| o.gradient(w))
        .collect::<Result<Vec<_>>>()?;
    Ok(ParameterVector::mean(&grads).expect("nonempty"))
}
