//! Datasets: LibSVM parsing, client partitioning, synthetic generators and
//! the binary dataset cache.

mod cache;
mod libsvm;
mod partition;
mod synthetic;

pub use cache::{load_cache, read_cache, save_cache, write_cache, CACHE_MAGIC, CACHE_VERSION};
pub use libsvm::{format_libsvm, parse_libsvm, read_libsvm_file, LabeledData};
pub use partition::partition;
pub use synthetic::{synth_generate, w8a_like, SparseBinarySpec, SyntheticSpec};

use crate::error::{Error, Result};
use crate::model::ClientDataset;

/// The full client population `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct FederatedDataset {
    pub clients: Vec<ClientDataset>,
    pub d: usize,
    pub provenance: String,
}

impl FederatedDataset {
    /// Client ids must be unique and every client must share `d`.
    pub fn new(clients: Vec<ClientDataset>, provenance: impl Into<String>) -> Result<Self> {
        let d = clients.first().ok_or(Error::EmptyClientSet)?.dim();
        let mut ids = std::collections::BTreeSet::new();
        for c in &clients {
            if c.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: c.dim(),
                });
            }
            if !ids.insert(c.client_id()) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate client id {}",
                    c.client_id()
                )));
            }
        }
        Ok(FederatedDataset {
            clients,
            d,
            provenance: provenance.into(),
        })
    }

    pub fn total_samples(&self) -> usize {
        self.clients.iter().map(ClientDataset::len).sum()
    }

    pub fn mean_client_samples(&self) -> f64 {
        self.total_samples() as f64 / self.clients.len() as f64
    }
}
