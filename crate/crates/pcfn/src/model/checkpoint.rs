//! Checkpoint file: magic "PCFN", a u32 format version, a length-prefixed
//! UTF-8 JSON metadata block (model config plus normalization stats), then
//! every registry tensor in order as little-endian 32-bit floats. The loader
//! validates magic, version and total length before touching tensor bytes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, ModelError, ModelResult};
use crate::data::NormStats;
use crate::tensor::Scalar;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"PCFN";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything the tensor block cannot carry.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub config: ModelConfig,
    pub norm: NormStats,
    /// Dynamic viscosity of the training fluid; residual audits need it.
    pub mu: f64,
    /// Seed the registry was built from (provenance only).
    pub seed: u64,
}

/// Serializes the model registry plus metadata.
pub fn save_checkpoint<T: Scalar>(
    path: &Path,
    model: &Model<T>,
    norm: &NormStats,
    mu: f64,
    seed: u64,
) -> ModelResult<()> {
    let meta = CheckpointMeta {
        format_version: CHECKPOINT_VERSION,
        config: model.config().clone(),
        norm: *norm,
        mu,
        seed,
    };
    let meta_json =
        serde_json::to_vec(&meta).map_err(|e| ModelError::Meta { what: e.to_string() })?;
    let mut bytes = Vec::with_capacity(16 + meta_json.len() + 4 * model.trainable_scalar_count());
    bytes.extend_from_slice(&CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(meta_json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&meta_json);
    for entry in model.entries() {
        for &v in entry.tensor.data() {
            bytes.extend_from_slice(&(v.to_f64() as f32).to_le_bytes());
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Reads a checkpoint back into a model of the requested precision.
pub fn load_checkpoint<T: Scalar>(path: &Path) -> ModelResult<(Model<T>, CheckpointMeta)> {
    let bytes = fs::read(path)?;
    if bytes.len() < 12 {
        return Err(ModelError::LengthMismatch {
            expected: 12,
            got: bytes.len() as u64,
        });
    }
    if bytes[0..4] != CHECKPOINT_MAGIC {
        let mut got = [0u8; 4];
        got.copy_from_slice(&bytes[0..4]);
        return Err(ModelError::BadMagic { got });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(ModelError::BadVersion { got: version });
    }
    let meta_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if bytes.len() < 12 + meta_len {
        return Err(ModelError::LengthMismatch {
            expected: (12 + meta_len) as u64,
            got: bytes.len() as u64,
        });
    }
    let meta: CheckpointMeta = serde_json::from_slice(&bytes[12..12 + meta_len])
        .map_err(|e| ModelError::Meta { what: e.to_string() })?;
    if meta.format_version != CHECKPOINT_VERSION {
        return Err(ModelError::BadVersion {
            got: meta.format_version,
        });
    }
    meta.norm.validate().map_err(|e| ModelError::Meta {
        what: format!("normalization stats: {e}"),
    })?;

    // Allocate from the config, then overwrite every tensor in order.
    let mut model = Model::<T>::build(meta.config.clone(), meta.seed)?;
    let scalar_total: usize = model.entries().iter().map(|e| e.tensor.numel()).sum();
    let expected = (12 + meta_len + 4 * scalar_total) as u64;
    if bytes.len() as u64 != expected {
        return Err(ModelError::LengthMismatch {
            expected,
            got: bytes.len() as u64,
        });
    }
    let mut offset = 12 + meta_len;
    for entry in model.entries_mut() {
        for v in entry.tensor.data_mut() {
            let raw = f32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap());
            *v = T::from_f64(raw as f64);
            offset += 4;
        }
    }
    if !model.all_finite() {
        return Err(ModelError::Meta {
            what: "checkpoint holds non-finite parameters".into(),
        });
    }
    Ok((model, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::VarStats;
    use tempfile::tempdir;

    fn norm() -> NormStats {
        NormStats {
            rho: 1.0,
            u_inf: 1.0,
            p0: 0.0,
            u: VarStats { min: -1.0, max: 2.0 },
            v: VarStats { min: -1.0, max: 1.0 },
            p: VarStats { min: -0.6, max: 0.5 },
        }
    }

    #[test]
    fn save_load_round_trip_preserves_bytes() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let config = ModelConfig::new(16, 2, 3, 64).unwrap();
        let model = Model::<f64>::build(config, 5).unwrap();
        save_checkpoint(&path, &model, &norm(), 0.05, 5).unwrap();
        let (loaded, meta) = load_checkpoint::<f64>(&path).unwrap();
        assert_eq!(meta.config, *model.config());
        let path2 = dir.path().join("m2.ckpt");
        save_checkpoint(&path2, &loaded, &meta.norm, meta.mu, meta.seed).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap(),
            "reserializing a loaded checkpoint must be byte-identical"
        );
    }

    #[test]
    fn loader_validates_magic_version_and_length() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let config = ModelConfig::new(8, 2, 3, 64).unwrap();
        let model = Model::<f64>::build(config, 1).unwrap();
        save_checkpoint(&path, &model, &norm(), 0.05, 1).unwrap();
        let good = std::fs::read(&path).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(
            load_checkpoint::<f64>(&path).unwrap_err(),
            ModelError::BadMagic { .. }
        ));

        let mut bad = good.clone();
        bad[4] = 99;
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(
            load_checkpoint::<f64>(&path).unwrap_err(),
            ModelError::BadVersion { got: 99 }
        ));

        let mut bad = good.clone();
        bad.truncate(good.len() - 3);
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(
            load_checkpoint::<f64>(&path).unwrap_err(),
            ModelError::LengthMismatch { .. }
        ));
    }
}
