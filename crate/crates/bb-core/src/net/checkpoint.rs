//! Checkpoint file format: a little-endian `u32` header length, a JSON
//! header (tensor names/shapes, arbitrary model config, optimizer step
//! counter, and a SHA-256 of the blob), then the raw little-endian
//! float32 parameter blob in header order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::store::ParamStore;
use super::NetError;
use crate::util::sha256_hex;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorMeta {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub params: Vec<TensorMeta>,
    pub step: u64,
    pub config: serde_json::Value,
    pub blob_sha256: String,
}

pub fn save_checkpoint(path: &Path, store: &ParamStore, config: &serde_json::Value) -> Result<(), NetError> {
    let blob = store.flat_bytes();
    let header = CheckpointHeader {
        version: 1,
        params: store
            .entries()
            .map(|(name, t)| TensorMeta { name: name.to_string(), rows: t.rows, cols: t.cols })
            .collect(),
        step: store.step_count(),
        config: config.clone(),
        blob_sha256: sha256_hex(&blob),
    };
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| NetError::CheckpointFormat(e.to_string()))?;
    let mut out = Vec::with_capacity(4 + header_bytes.len() + blob.len());
    out.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    out.extend_from_slice(&blob);
    fs::write(path, out).map_err(|e| NetError::Io(format!("{}: {e}", path.display())))
}

pub fn read_checkpoint(path: &Path) -> Result<(CheckpointHeader, Vec<u8>), NetError> {
    let bytes = fs::read(path).map_err(|e| NetError::Io(format!("{}: {e}", path.display())))?;
    if bytes.len() < 4 {
        return Err(NetError::CheckpointFormat("file too short".into()));
    }
    let hlen = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
    if bytes.len() < 4 + hlen {
        return Err(NetError::CheckpointFormat("truncated header".into()));
    }
    let header: CheckpointHeader = serde_json::from_slice(&bytes[4..4 + hlen])
        .map_err(|e| NetError::CheckpointFormat(e.to_string()))?;
    let blob = bytes[4 + hlen..].to_vec();
    if sha256_hex(&blob) != header.blob_sha256 {
        return Err(NetError::CheckpointFormat("blob hash mismatch".into()));
    }
    Ok((header, blob))
}

/// Load a checkpoint into an already-constructed store, verifying that
/// names and shapes line up.
pub fn load_into_store(path: &Path, store: &mut ParamStore) -> Result<CheckpointHeader, NetError> {
    let (header, blob) = read_checkpoint(path)?;
    let metas: Vec<TensorMeta> = store
        .entries()
        .map(|(name, t)| TensorMeta { name: name.to_string(), rows: t.rows, cols: t.cols })
        .collect();
    if metas.len() != header.params.len() {
        return Err(NetError::CheckpointFormat(format!(
            "store has {} tensors, checkpoint has {}",
            metas.len(),
            header.params.len()
        )));
    }
    for (have, want) in metas.iter().zip(&header.params) {
        if have.name != want.name || have.rows != want.rows || have.cols != want.cols {
            return Err(NetError::CheckpointFormat(format!(
                "tensor mismatch: store {}[{}x{}] vs checkpoint {}[{}x{}]",
                have.name, have.rows, have.cols, want.name, want.rows, want.cols
            )));
        }
    }
    store.load_flat_bytes(&blob)?;
    store.set_step(header.step);
    Ok(header)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::tensor::Tensor;

    #[test]
    fn checkpoint_roundtrip_preserves_params_and_step() {
        let dir = std::env::temp_dir().join("bb_ckpt_test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("net.ckpt");

        let mut store = ParamStore::new();
        store.add("w", Tensor::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]));
        store.add("b", Tensor::row_vec(vec![-0.5]));
        store.set_step(42);
        let cfg = serde_json::json!({"kind": "test", "dims": [2, 2]});
        save_checkpoint(&path, &store, &cfg).unwrap();

        let mut other = ParamStore::new();
        other.add("w", Tensor::zeros(2, 2));
        other.add("b", Tensor::zeros(1, 1));
        let header = load_into_store(&path, &mut other).unwrap();
        assert_eq!(other.get(0).data, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(other.step_count(), 42);
        assert_eq!(header.config["kind"], "test");
    }

    #[test]
    fn corrupted_blob_is_rejected() {
        let dir = std::env::temp_dir().join("bb_ckpt_test2");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("net.ckpt");
        let mut store = ParamStore::new();
        store.add("w", Tensor::row_vec(vec![7.0, 8.0]));
        save_checkpoint(&path, &store, &serde_json::Value::Null).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        let n = bytes.len();
        bytes[n - 1] ^= 0xff;
        fs::write(&path, bytes).unwrap();
        assert!(matches!(read_checkpoint(&path), Err(NetError::CheckpointFormat(_))));
    }
}
