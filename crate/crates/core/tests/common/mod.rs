//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library's numerical kernels.

#![allow(dead_code)]

use fednewton::linalg::Matrix;
use fednewton::model::ClientDataset;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plain-data copy of one client.
#[derive(Debug, Clone)]
pub struct Plain {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl Plain {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn dataset(&self, id: usize) -> ClientDataset {
        ClientDataset::new(id, Matrix::from_rows(&self.x).unwrap(), self.y.clone()).unwrap()
    }
}

pub fn random_plain(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> Plain {
    let x = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| scale * rng.random_range(-1.0..1.0))
                .collect()
        })
        .collect();
    let y = (0..n)
        .map(|_| f64::from(u8::from(rng.random::<bool>())))
        .collect();
    Plain { x, y }
}

pub fn random_clients(seed: u64, count: usize, n: usize, d: usize) -> Vec<Plain> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| random_plain(&mut rng, n, d, 1.0))
        .collect()
}

fn margin(x: &[f64], w: &[f64]) -> f64 {
    x.iter().zip(w).map(|(a, b)| a * b).sum()
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `(1/n) Σ [-y log p - (1-y) log(1-p)] + γ/2 ‖w‖²`, written out directly.
pub fn loss(c: &Plain, gamma: f64, w: &[f64]) -> f64 {
    let data: f64 =
        c.x.iter()
            .zip(&c.y)
            .map(|(x, y)| {
                let p = logistic(margin(x, w));
                -y * p.ln() - (1.0 - y) * (1.0 - p).ln()
            })
            .sum::<f64>()
            / c.n() as f64;
    data + 0.5 * gamma * w.iter().map(|v| v * v).sum::<f64>()
}

pub fn gradient(c: &Plain, gamma: f64, w: &[f64]) -> Vec<f64> {
    let d = w.len();
    let mut g = vec![0.0; d];
    for (x, y) in c.x.iter().zip(&c.y) {
        let r = logistic(margin(x, w)) - y;
        for k in 0..d {
            g[k] += r * x[k] / c.n() as f64;
        }
    }
    for k in 0..d {
        g[k] += gamma * w[k];
    }
    g
}

pub fn hessian(c: &Plain, gamma: f64, w: &[f64]) -> DMatrix<f64> {
    let d = w.len();
    let mut h = DMatrix::<f64>::identity(d, d) * gamma;
    for x in &c.x {
        let p = logistic(margin(x, w));
        let s = p * (1.0 - p) / c.n() as f64;
        for a in 0..d {
            for b in 0..d {
                h[(a, b)] += s * x[a] * x[b];
            }
        }
    }
    h
}

/// `H⁻¹ g` by Cholesky.
pub fn solve(h: &DMatrix<f64>, g: &[f64]) -> Vec<f64> {
    h.clone()
        .cholesky()
        .expect("positive definite")
        .solve(&DVector::from_column_slice(g))
        .as_slice()
        .to_vec()
}

pub fn mean_loss(cs: &[&Plain], gamma: f64, w: &[f64]) -> f64 {
    cs.iter().map(|c| loss(c, gamma, w)).sum::<f64>() / cs.len() as f64
}

pub fn mean_vec(vs: &[Vec<f64>]) -> Vec<f64> {
    let d = vs[0].len();
    (0..d)
        .map(|k| vs.iter().map(|v| v[k]).sum::<f64>() / vs.len() as f64)
        .collect()
}

pub fn step(w: &[f64], mu: f64, u: &[f64]) -> Vec<f64> {
    w.iter().zip(u).map(|(a, b)| a - mu * b).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    diff / scale.max(1e-300)
}

/// Armijo scan over `mus` on the mean loss of `cs`; falls back to the last.
pub fn armijo_pick(
    cs: &[&Plain],
    gamma: f64,
    w: &[f64],
    u: &[f64],
    g: &[f64],
    mus: &[f64],
    c: f64,
) -> f64 {
    let base = mean_loss(cs, gamma, w);
    let slope = dot(u, g);
    for &mu in mus {
        if mean_loss(cs, gamma, &step(w, mu, u)) <= base - mu * c * slope {
            return mu;
        }
    }
    *mus.last().unwrap()
}

/// Exhaustive argmin over `mus` of the summed loss; first minimum wins.
pub fn argmin_pick(cs: &[&Plain], gamma: f64, w: &[f64], u: &[f64], mus: &[f64]) -> f64 {
    let mut best = (f64::INFINITY, mus[0]);
    for &mu in mus {
        let total: f64 = cs.iter().map(|c| loss(c, gamma, &step(w, mu, u))).sum();
        if total < best.0 {
            best = (total, mu);
        }
    }
    best.1
}

pub const MUS: [f64; 6] = [1.0, 0.5, 0.25, 0.1, 0.05, 0.01];
pub const ARMIJO: f64 = 1e-4;
