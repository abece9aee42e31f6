//! Flat `key = value` configuration shared by the config file and the CLI.
//!
//! Every CLI flag `--some-key` has the config twin `some-key` (underscores are
//! accepted too). Values from the command line override the file.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::cg::{CgConfig, CgInit};
use crate::error::{Error, Result};
use crate::line_search::StepSizeSet;
use crate::local::LocalStepConfig;
use crate::orchestrator::{ExperimentConfig, Method, MethodConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    W8a,
    /// Generated stand-in with the shape of w8a, see [`crate::data::w8a_like`].
    W8aLike,
    SyntheticIid,
    SyntheticHet,
    Cache,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::W8a => "w8a",
            DatasetKind::W8aLike => "w8a-like",
            DatasetKind::SyntheticIid => "synthetic-iid",
            DatasetKind::SyntheticHet => "synthetic-het",
            DatasetKind::Cache => "cache",
        }
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "w8a" => Ok(DatasetKind::W8a),
            "w8a-like" => Ok(DatasetKind::W8aLike),
            "synthetic-iid" => Ok(DatasetKind::SyntheticIid),
            "synthetic-het" => Ok(DatasetKind::SyntheticHet),
            "cache" => Ok(DatasetKind::Cache),
            other => Err(Error::InvalidConfig(format!(
                "unknown dataset `{other}`, expected w8a, w8a-like, synthetic-iid, synthetic-het or cache"
            ))),
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixNorm {
    Frobenius,
    Spectral,
}

impl FromStr for MatrixNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "frobenius" => Ok(MatrixNorm::Frobenius),
            "spectral" => Ok(MatrixNorm::Spectral),
            other => Err(Error::InvalidConfig(format!(
                "unknown norm `{other}`, expected frobenius or spectral"
            ))),
        }
    }
}

/// Where the Hessians are evaluated for the similarity analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianPoint {
    Zero,
    /// Final weights of the configured experiment.
    Final,
}

impl FromStr for HessianPoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "zero" => Ok(HessianPoint::Zero),
            "final" => Ok(HessianPoint::Final),
            other => Err(Error::InvalidConfig(format!(
                "unknown hessian point `{other}`, expected zero or final"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub dataset: DatasetKind,
    pub data_path: Option<PathBuf>,
    pub width: Option<usize>,
    pub clients: usize,
    pub active: usize,
    pub rounds: usize,
    pub seed: u64,
    pub local_steps: usize,
    pub step_size: f64,
    pub cg_max_iter: usize,
    pub cg_tol: f64,
    pub cg_init: CgInit,
    pub mu_set: Vec<f64>,
    pub armijo_c: f64,
    pub resample_ls: Option<bool>,
    pub charge_loss_evals: bool,
    pub gamma: f64,
    pub fraction: f64,
    pub dim: usize,
    pub samples_per_client: usize,
    pub bias_range: f64,
    pub workers: usize,
    pub out: PathBuf,
    pub grid_step_sizes: Option<Vec<f64>>,
    pub grid_local_steps: Option<Vec<usize>>,
    pub norm: MatrixNorm,
    pub hessian_point: HessianPoint,
    pub draws: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: Method::LocalNewtonGlobalLS,
            dataset: DatasetKind::SyntheticIid,
            data_path: None,
            width: None,
            clients: 50,
            active: 5,
            rounds: 20,
            seed: 0,
            local_steps: 1,
            step_size: 1.0,
            cg_max_iter: 250,
            cg_tol: 1e-6,
            cg_init: CgInit::Zero,
            mu_set: StepSizeSet::default().candidates().to_vec(),
            armijo_c: StepSizeSet::default().armijo_c(),
            resample_ls: None,
            charge_loss_evals: true,
            gamma: 1e-3,
            fraction: 0.1,
            dim: 10,
            samples_per_client: 20,
            bias_range: 100.0,
            workers: 1,
            out: PathBuf::from("."),
            grid_step_sizes: None,
            grid_local_steps: None,
            norm: MatrixNorm::Frobenius,
            hessian_point: HessianPoint::Zero,
            draws: 20,
        }
    }
}

/// Every accepted key, in canonical (hyphenated) form.
pub const CONFIG_KEYS: &[&str] = &[
    "method",
    "dataset",
    "data-path",
    "width",
    "clients",
    "active",
    "rounds",
    "seed",
    "local-steps",
    "step-size",
    "cg-max-iter",
    "cg-tol",
    "cg-init",
    "mu-set",
    "armijo-c",
    "resample-ls",
    "charge-loss-evals",
    "gamma",
    "fraction",
    "dim",
    "samples-per-client",
    "bias-range",
    "workers",
    "out",
    "grid-step-sizes",
    "grid-local-steps",
    "norm",
    "hessian-point",
    "draws",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("invalid value `{value}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::InvalidConfig(format!(
            "invalid boolean `{value}` for `{key}`"
        ))),
    }
}

impl RunConfig {
    /// Canonical key for `key`, or [`Error::UnknownKey`].
    pub fn canonical_key(key: &str) -> Result<&'static str> {
        let normalized = key.trim().trim_start_matches("--").replace('_', "-");
        CONFIG_KEYS
            .iter()
            .copied()
            .find(|k| *k == normalized)
            .ok_or_else(|| Error::UnknownKey(key.trim().to_string()))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = Self::canonical_key(key)?;
        let v = value.trim();
        match key {
            "method" => self.method = v.parse()?,
            "dataset" => self.dataset = v.parse()?,
            "data-path" => self.data_path = Some(PathBuf::from(v)),
            "width" => self.width = Some(parse(key, v)?),
            "clients" => self.clients = parse(key, v)?,
            "active" => self.active = parse(key, v)?,
            "rounds" => self.rounds = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "local-steps" => self.local_steps = parse(key, v)?,
            "step-size" => self.step_size = parse(key, v)?,
            "cg-max-iter" => self.cg_max_iter = parse(key, v)?,
            "cg-tol" => self.cg_tol = parse(key, v)?,
            "cg-init" => {
                self.cg_init = match v {
                    "zero" => CgInit::Zero,
                    _ => match v.strip_prefix("random:") {
                        Some(seed) => CgInit::RandomUniform(parse(key, seed)?),
                        None => {
                            return Err(Error::InvalidConfig(format!(
                                "invalid value `{v}` for `cg-init`, expected zero or random:<seed>"
                            )))
                        }
                    },
                }
            }
            "mu-set" => self.mu_set = parse_list(key, v)?,
            "armijo-c" => self.armijo_c = parse(key, v)?,
            "resample-ls" => self.resample_ls = Some(parse_bool(key, v)?),
            "charge-loss-evals" => self.charge_loss_evals = parse_bool(key, v)?,
            "gamma" => self.gamma = parse(key, v)?,
            "fraction" => self.fraction = parse(key, v)?,
            "dim" => self.dim = parse(key, v)?,
            "samples-per-client" => self.samples_per_client = parse(key, v)?,
            "bias-range" => self.bias_range = parse(key, v)?,
            "workers" => self.workers = parse(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "grid-step-sizes" => self.grid_step_sizes = Some(parse_list(key, v)?),
            "grid-local-steps" => self.grid_local_steps = Some(parse_list(key, v)?),
            "norm" => self.norm = v.parse()?,
            "hessian-point" => self.hessian_point = v.parse()?,
            "draws" => self.draws = parse(key, v)?,
            _ => unreachable!("every canonical key is handled"),
        }
        Ok(())
    }

    /// Applies a config file's `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected `key = value`", i + 1))
            })?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn method_config(&self) -> Result<MethodConfig> {
        let mut cfg = MethodConfig::new(self.method);
        cfg.local = LocalStepConfig {
            local_steps: self.local_steps,
            local_step_size: if self.method.is_second_order() {
                self.step_size
            } else {
                LocalStepConfig::default().local_step_size
            },
            sgd_step_size: if self.method.is_second_order() {
                LocalStepConfig::default().sgd_step_size
            } else {
                self.step_size
            },
            minibatch: None,
        };
        cfg.cg = CgConfig {
            max_iterations: self.cg_max_iter,
            relative_tolerance: self.cg_tol,
            init: self.cg_init,
        };
        cfg.ls = StepSizeSet::new(self.mu_set.clone(), self.armijo_c)?;
        if let Some(resample) = self.resample_ls {
            cfg.resample_for_linesearch = resample;
        }
        cfg.charge_loss_evaluations = self.charge_loss_evals;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            method: self.method_config()?,
            rounds: self.rounds,
            active_clients: self.active,
            seed: self.seed,
        })
    }
}
