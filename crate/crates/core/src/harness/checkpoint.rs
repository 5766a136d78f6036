//! Model persistence: a directory holding `manifest.json` (format version,
//! training configuration, vocabulary, label schema, parameter layout) and
//! `params.bin` (little-endian f32 values in manifest order).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{LabelSchema, Vocab};
use crate::error::{Error, Result};
use crate::networks::Model;
use crate::numeric::{Real, Tensor};
use crate::semivae::TrainConfig;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PAYLOAD_FILE: &str = "params.bin";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the payload.
    pub offset: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub config: TrainConfig,
    pub vocab: Vocab,
    pub schema: LabelSchema,
    pub params: Vec<ParamEntry>,
    pub payload_bytes: usize,
}

pub fn save_checkpoint<T: Real>(model: &Model<T>, config: &TrainConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut params = Vec::with_capacity(model.store.len());
    let mut payload = Vec::with_capacity(model.store.num_scalars() * 4);
    for (_, p) in model.store.iter() {
        params.push(ParamEntry {
            name: p.name.clone(),
            shape: p.value.shape().to_vec(),
            offset: payload.len(),
        });
        for &v in p.value.data() {
            payload.extend_from_slice(&(v.f64() as f32).to_le_bytes());
        }
    }
    let mut config = config.clone();
    config.dims = model.dims.clone();
    let manifest = Manifest {
        version: FORMAT_VERSION,
        config,
        vocab: model.vocab.clone(),
        schema: model.schema.clone(),
        params,
        payload_bytes: payload.len(),
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    fs::write(dir.join(PAYLOAD_FILE), payload)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::CorruptCheckpoint(format!("manifest is not JSON: {e}")))?;
    let version = value
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::CorruptCheckpoint("manifest has no version".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(Error::VersionMismatch {
            found: version as u32,
            expected: FORMAT_VERSION,
        });
    }
    serde_json::from_value(value).map_err(|e| Error::CorruptCheckpoint(format!("manifest: {e}")))
}

/// Rebuild the model described by a checkpoint directory.
pub fn load_checkpoint(dir: &Path) -> Result<(Model<f32>, TrainConfig)> {
    let manifest = read_manifest(dir)?;
    let schema = LabelSchema::new(manifest.schema.classes.clone(), manifest.schema.negative)
        .map_err(|e| Error::CorruptCheckpoint(format!("label schema: {e}")))?;
    let payload = fs::read(dir.join(PAYLOAD_FILE))?;
    if payload.len() != manifest.payload_bytes {
        return Err(Error::CorruptCheckpoint(format!(
            "payload holds {} bytes, manifest expects {}",
            payload.len(),
            manifest.payload_bytes
        )));
    }
    let config = manifest.config;
    let mut model = Model::<f32>::new(config.dims.clone(), manifest.vocab, schema, config.seed);
    if manifest.params.len() != model.store.len() {
        return Err(Error::CorruptCheckpoint(format!(
            "manifest lists {} parameters, model has {}",
            manifest.params.len(),
            model.store.len()
        )));
    }
    for entry in &manifest.params {
        let id = model
            .store
            .id(&entry.name)
            .ok_or_else(|| Error::CorruptCheckpoint(format!("unknown parameter '{}'", entry.name)))?;
        let expected = model.store.value(id).shape().to_vec();
        if entry.shape != expected {
            return Err(Error::ParamShape {
                name: entry.name.clone(),
                expected,
                found: entry.shape.clone(),
            });
        }
        let n: usize = expected.iter().product();
        let end = entry.offset + 4 * n;
        let bytes = payload.get(entry.offset..end).ok_or_else(|| {
            Error::CorruptCheckpoint(format!("parameter '{}' runs past the payload", entry.name))
        })?;
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        model.store.get_mut(id).value = Tensor::new(expected, data)?;
    }
    Ok((model, config))
}
