//! Binary dataset cache.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "FEDNDSET" | version u32 | d u64 | clients u64
//! per client: client_id u64, rows u64
//! provenance: len u64, UTF-8 bytes
//! per client: rows × d f64 features, row-major
//! per client: rows u8 labels
//! SHA-256 of everything above
//! ```

use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::FederatedDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::ClientDataset;

pub const CACHE_MAGIC: &[u8; 8] = b"FEDNDSET";
pub const CACHE_VERSION: u32 = 1;

fn encode(data: &FederatedDataset) -> Result<Vec<u8>> {
    if data.clients.is_empty() {
        return Err(Error::Cache("refusing to cache an empty dataset".into()));
    }
    let mut buf = Vec::new();
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(data.d as u64).to_le_bytes());
    buf.extend_from_slice(&(data.clients.len() as u64).to_le_bytes());
    for c in &data.clients {
        buf.extend_from_slice(&(c.client_id() as u64).to_le_bytes());
        buf.extend_from_slice(&(c.len() as u64).to_le_bytes());
    }
    buf.extend_from_slice(&(data.provenance.len() as u64).to_le_bytes());
    buf.extend_from_slice(data.provenance.as_bytes());
    for c in &data.clients {
        for v in c.features().as_slice() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    for c in &data.clients {
        buf.extend(c.labels().iter().map(|y| *y as u8));
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    Ok(buf)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.bytes.len())
            .ok_or_else(|| Error::Cache("truncated file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Cache("size overflow".into()))
    }
}

fn decode(bytes: &[u8]) -> Result<FederatedDataset> {
    if bytes.len() < CACHE_MAGIC.len() + 4 + 32 || &bytes[..8] != CACHE_MAGIC {
        return Err(Error::Cache("not a dataset cache (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CACHE_VERSION {
        return Err(Error::Cache(format!(
            "version {version} unsupported, expected {CACHE_VERSION}"
        )));
    }
    let (body, stored) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != stored {
        return Err(Error::Cache("checksum mismatch".into()));
    }
    let mut cur = Cursor {
        bytes: body,
        pos: 12,
    };
    let d = cur.usize()?;
    let count = cur.usize()?;
    if count == 0 {
        return Err(Error::Cache("cache holds no clients".into()));
    }
    let mut shapes = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        shapes.push((cur.usize()?, cur.usize()?));
    }
    let plen = cur.usize()?;
    let provenance = String::from_utf8(cur.take(plen)?.to_vec())
        .map_err(|_| Error::Cache("provenance is not UTF-8".into()))?;
    let mut matrices = Vec::with_capacity(count);
    for &(_, rows) in &shapes {
        let n = rows
            .checked_mul(d)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::Cache("size overflow".into()))?;
        let raw = cur.take(n)?;
        let values = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        matrices.push(Matrix::from_row_major(rows, d, values)?);
    }
    let mut clients = Vec::with_capacity(count);
    for ((id, rows), features) in shapes.into_iter().zip(matrices) {
        let labels = cur.take(rows)?.iter().map(|b| f64::from(*b)).collect();
        clients.push(ClientDataset::new(id, features, labels)?);
    }
    if cur.pos != body.len() {
        return Err(Error::Cache("trailing bytes".into()));
    }
    FederatedDataset::new(clients, provenance)
}

pub fn write_cache<W: Write>(data: &FederatedDataset, mut out: W) -> Result<()> {
    out.write_all(&encode(data)?)?;
    Ok(())
}

pub fn read_cache<R: Read>(mut input: R) -> Result<FederatedDataset> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub fn save_cache(data: &FederatedDataset, path: &Path) -> Result<()> {
    let bytes = encode(data)?;
    std::fs::write(path, bytes).map_err(|e| Error::file(path, e))
}

pub fn load_cache(path: &Path) -> Result<FederatedDataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
    decode(&bytes)
}
