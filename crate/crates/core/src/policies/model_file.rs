//! Model files: a JSON manifest next to a little-endian f32 parameter blob.
//!
//! The manifest records the algorithm, full policy config, normalization
//! statistics and the ordered `(name, shape, byte offset)` table of the
//! blob. Loading rebuilds the architecture from the config and checks that
//! the table matches it exactly.

use std::path::{Path, PathBuf};

use chicgrasp_nn::{ParamStore, TensorRecord};
use serde::{Deserialize, Serialize};

use crate::datasets::NormStats;
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

use super::model::PolicyModel;
use super::{Algo, PolicyConfig};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub algo: Algo,
    pub config: PolicyConfig,
    pub norm: NormStats,
    #[serde(default)]
    pub image: Option<usize>,
    /// Blob file name, relative to the manifest's directory.
    pub blob: String,
    pub tensors: Vec<TensorRecord>,
}

/// `model.json` → `model.bin`.
pub fn blob_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

impl PolicyModel {
    pub fn manifest(&self, blob_name: &str) -> (Manifest, Vec<u8>) {
        let (tensors, blob) = self.params.to_blob();
        (
            Manifest {
                format_version: MODEL_FORMAT_VERSION,
                algo: self.config.algo,
                config: self.config.clone(),
                norm: self.norm.clone(),
                image: self.image,
                blob: blob_name.to_string(),
                tensors,
            },
            blob,
        )
    }

    /// Write the manifest to `path` and the blob beside it.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bp = blob_path(path);
        let name = bp
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Config(format!("bad model path {}", path.display())))?
            .to_string();
        let (manifest, blob) = self.manifest(&name);
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(&bp, blob).map_err(|e| Error::io(&bp, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn from_parts(manifest: Manifest, blob: &[u8]) -> Result<Self> {
        if manifest.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: manifest.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        if manifest.algo != manifest.config.algo {
            return Err(Error::Format(format!(
                "manifest algo {} disagrees with config algo {}",
                manifest.algo, manifest.config.algo
            )));
        }
        manifest.norm.validate()?;
        let params = ParamStore::from_blob(&manifest.tensors, blob)?;
        let (fresh, net) = Self::build(&manifest.config, manifest.image, &mut stream(0, Stream::Init))?;
        let layout = |s: &ParamStore| -> Vec<(String, Vec<usize>)> {
            s.iter().map(|p| (p.name.clone(), p.value.shape().to_vec())).collect()
        };
        if layout(&fresh) != layout(&params) {
            return Err(Error::Format(
                "parameter table does not match the architecture in the manifest".into(),
            ));
        }
        Ok(Self {
            config: manifest.config,
            norm: manifest.norm,
            image: manifest.image,
            params,
            net,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        if let Some(v) = raw.get("format_version").and_then(|v| v.as_u64()) {
            if v != MODEL_FORMAT_VERSION as u64 {
                return Err(Error::FormatVersion {
                    found: v as u32,
                    expected: MODEL_FORMAT_VERSION,
                });
            }
        }
        let manifest: Manifest =
            serde_json::from_value(raw).map_err(|e| Error::Format(format!("bad manifest: {e}")))?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        let bp = dir.join(&manifest.blob);
        let blob = std::fs::read(&bp).map_err(|e| Error::io(&bp, e))?;
        Self::from_parts(manifest, &blob)
    }
}
