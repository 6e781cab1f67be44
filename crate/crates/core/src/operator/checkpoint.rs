//! Checkpoint files: a magic line, one JSON header line, then the parameter
//! vector as little-endian `f64` (spectral weights interleaved re/im).

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Layout, NeuralOperator, OperatorConfig};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "PIFTCKPT";

/// Training provenance stored next to the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub steps: usize,
    pub loss_mode: String,
    #[serde(default)]
    pub tags: Vec<String>,
    /// Grid side the weights were trained on, if any.
    #[serde(default)]
    pub grid_n: Option<usize>,
    #[serde(default)]
    pub task: Option<String>,
    #[serde(default)]
    pub optimizer: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: NeuralOperator,
    pub meta: CheckpointMeta,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: OperatorConfig,
    layout: Layout,
    param_count: usize,
    meta: CheckpointMeta,
}

impl Checkpoint {
    pub fn new(model: NeuralOperator, meta: CheckpointMeta) -> Self {
        Checkpoint { model, meta }
    }

    pub fn config(&self) -> &OperatorConfig {
        self.model.config()
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.meta.tags.iter().any(|t| t == tag)
    }

    /// Fails with a shape error unless the stored config equals `config`.
    pub fn expect_config(&self, config: &OperatorConfig) -> Result<()> {
        if self.config() != config {
            return Err(Error::Shape(format!(
                "checkpoint config {:?} does not match {:?}",
                self.config(),
                config
            )));
        }
        Ok(())
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let header = Header {
        format_version: CHECKPOINT_VERSION,
        config: *ckpt.config(),
        layout: ckpt.model.layout(),
        param_count: ckpt.model.params().len(),
        meta: ckpt.meta.clone(),
    };
    let mut bytes = format!("{MAGIC} {CHECKPOINT_VERSION}\n").into_bytes();
    serde_json::to_writer(&mut bytes, &header)?;
    bytes.push(b'\n');
    for v in ckpt.model.params() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let malformed = |detail: String| Error::Malformed {
        what: path.display().to_string(),
        detail,
    };
    let mut magic = String::new();
    reader.read_line(&mut magic).map_err(|e| Error::io(path, e))?;
    let version = magic
        .trim_end()
        .strip_prefix(MAGIC)
        .and_then(|v| v.trim().parse::<u32>().ok())
        .ok_or_else(|| malformed("not a checkpoint file".into()))?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version(version));
    }
    let mut line = String::new();
    reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
    if !line.ends_with('\n') {
        return Err(malformed("header line truncated".into()));
    }
    let header: Header = serde_json::from_str(&line)?;
    if header.format_version != CHECKPOINT_VERSION {
        return Err(Error::Version(header.format_version));
    }
    header.config.validate()?;
    if header.param_count != header.config.param_count() || header.layout != Layout::new(&header.config) {
        return Err(Error::Shape(format!(
            "header layout does not match config {:?}",
            header.config
        )));
    }
    let mut blob = Vec::new();
    reader.read_to_end(&mut blob).map_err(|e| Error::io(path, e))?;
    let expected = header.param_count as u64 * 8;
    if blob.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            file: path.display().to_string(),
            expected,
            found: blob.len() as u64,
        });
    }
    let params = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(Checkpoint {
        model: NeuralOperator::from_params(header.config, params)?,
        meta: header.meta,
    })
}
