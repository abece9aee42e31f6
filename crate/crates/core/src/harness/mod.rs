//! Experiment drivers: configuration, single runs, grid search, the Hessian
//! estimation analysis and the command-line front end.

pub mod cli;
mod config;
mod grid;
mod hessian;

pub use config::{DatasetKind, HessianPoint, MatrixNorm, RunConfig, CONFIG_KEYS};
pub use grid::{
    default_grid, run_grid, select_best, write_grid_summary, GridCell, GridOutcome, GridSpec,
};
pub use hessian::{
    hessian_similarity, matrix_norm, write_hessian_report, HessianSimilarityConfig,
    HessianSimilarityReport,
};

use std::path::PathBuf;

use crate::accounting::{export_trace, trace_file_name, Trace};
use crate::data::{
    load_cache, partition, read_libsvm_file, synth_generate, w8a_like, FederatedDataset,
    SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::model::objectives;
use crate::orchestrator::run_experiment;

/// Builds or loads the client population described by `cfg`.
pub fn load_dataset(cfg: &RunConfig) -> Result<FederatedDataset> {
    let path = || {
        cfg.data_path.as_deref().ok_or_else(|| {
            Error::InvalidConfig(format!("dataset `{}` needs data-path", cfg.dataset))
        })
    };
    match cfg.dataset {
        DatasetKind::SyntheticIid | DatasetKind::SyntheticHet => {
            let base = if cfg.dataset == DatasetKind::SyntheticHet {
                SyntheticSpec::heterogeneous(cfg.seed)
            } else {
                SyntheticSpec::iid(cfg.seed)
            };
            let spec = SyntheticSpec {
                n_per_client: cfg.samples_per_client,
                clients: cfg.clients,
                bias_range: cfg.bias_range,
                ..base.with_dim(cfg.dim)
            };
            synth_generate(&spec)
        }
        DatasetKind::W8a => {
            let data = read_libsvm_file(path()?, cfg.width)?;
            partition(&data, cfg.clients, cfg.fraction, cfg.seed)
        }
        DatasetKind::W8aLike => {
            let data = w8a_like(cfg.seed).generate()?;
            partition(&data, cfg.clients, cfg.fraction, cfg.seed)
        }
        DatasetKind::Cache => load_cache(path()?),
    }
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn run_on(cfg: &RunConfig, data: &FederatedDataset) -> Result<Trace> {
    let experiment = cfg.experiment_config()?;
    let objs = objectives(&data.clients, cfg.gamma)?;
    with_workers(cfg.workers, || run_experiment(&experiment, &objs))?
}

/// Loads the dataset, runs the experiment and writes
/// `<out>/<method>_<dataset>_<seed>.csv`.
pub fn run_to_file(cfg: &RunConfig) -> Result<(Trace, PathBuf)> {
    let data = load_dataset(cfg)?;
    let trace = run_on(cfg, &data)?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::file(&cfg.out, e))?;
    let path = cfg
        .out
        .join(trace_file_name(cfg.method, cfg.dataset.name(), cfg.seed));
    export_trace(&trace, &path)?;
    Ok((trace, path))
}
