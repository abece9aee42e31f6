//! How close is the average of k local Hessians to the population Hessian?
//!
//! cargo run --release --example hessian_similarity -- [path/to/w8a]

use std::path::PathBuf;

use fednewton::harness::{
    hessian_similarity, load_dataset, DatasetKind, HessianSimilarityConfig, MatrixNorm, RunConfig,
};
use fednewton::model::objectives;

fn main() -> fednewton::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => RunConfig {
            dataset: DatasetKind::W8a,
            data_path: Some(PathBuf::from(path)),
            width: Some(300),
            ..RunConfig::default()
        },
        None => RunConfig {
            dataset: DatasetKind::W8aLike,
            ..RunConfig::default()
        },
    };
    let data = load_dataset(&cfg)?;
    let objs = objectives(&data.clients, cfg.gamma)?;
    let w = vec![0.0; data.d];
    for norm in [MatrixNorm::Frobenius, MatrixNorm::Spectral] {
        let report = hessian_similarity(
            &objs,
            &w,
            &HessianSimilarityConfig {
                norm,
                draws: 10,
                ..HessianSimilarityConfig::default()
            },
        )?;
        println!("{norm:?} norm, ‖I - H‖ = {:.3}", report.identity_baseline);
        for (i, k) in report
            .ks
            .iter()
            .enumerate()
            .filter(|(_, k)| [1, 2, 5, 10, 25, 50].contains(*k))
        {
            println!(
                "  k = {k:>2}: sampled {:.4}, exact rms (Frobenius) {:.4}",
                report.mean_error[i], report.rms_frobenius[i]
            );
        }
    }
    Ok(())
}
