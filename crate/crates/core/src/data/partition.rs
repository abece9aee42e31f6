use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{FederatedDataset, LabeledData};
use crate::error::{Error, Result};
use crate::model::ClientDataset;

/// Uniformly subsamples `fraction` of the rows, shuffles them and splits them
/// into `clients` contiguous blocks whose sizes differ by at most one.
pub fn partition(
    data: &LabeledData,
    clients: usize,
    fraction: f64,
    seed: u64,
) -> Result<FederatedDataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "sampling fraction must lie in (0, 1], got {fraction}"
        )));
    }
    if clients == 0 {
        return Err(Error::InvalidConfig("need at least one client".into()));
    }
    let n = data.labels.len();
    let keep = (fraction * n as f64).round() as usize;
    if keep < clients {
        return Err(Error::InvalidConfig(format!(
            "{keep} sampled rows cannot fill {clients} clients"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = index::sample(&mut rng, n, keep).into_vec();
    rows.shuffle(&mut rng);

    let base = keep / clients;
    let extra = keep % clients;
    let mut out = Vec::with_capacity(clients);
    let mut start = 0;
    for id in 0..clients {
        let len = base + usize::from(id < extra);
        let block = &rows[start..start + len];
        start += len;
        let labels = block.iter().map(|&r| data.labels[r]).collect();
        out.push(ClientDataset::new(
            id,
            data.features.select_rows(block),
            labels,
        )?);
    }
    FederatedDataset::new(
        out,
        format!("partition(rows={n}, clients={clients}, fraction={fraction}, seed={seed})"),
    )
}
