//! Dataset persistence: `manifest.json` next to raw little-endian float64
//! payloads (`inputs.bin`, plus `solutions.bin` for labeled sets).
//!
//! Payloads are sample-major, then channel-major, then row-major, with no
//! header. The manifest checksum is the hex SHA-256 of `inputs.bin` followed
//! by `solutions.bin` when present.

use std::fs;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{Grid, ScalarField2D};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

const MANIFEST_FILE: &str = "manifest.json";
const INPUTS_FILE: &str = "inputs.bin";
const SOLUTIONS_FILE: &str = "solutions.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub grid_n: usize,
    pub sample_count: usize,
    pub channels_per_input: usize,
    pub has_solutions: bool,
    pub generator: String,
    pub generator_params: Value,
    pub seed: u64,
    pub checksum: String,
}

/// Input fields with optional paired solutions, described by a [`Manifest`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    grid: Grid,
    channels: usize,
    inputs: Vec<Vec<ScalarField2D>>,
    solutions: Option<Vec<ScalarField2D>>,
    manifest: Manifest,
}

impl SampleSet {
    pub fn new(
        grid: Grid,
        inputs: Vec<Vec<ScalarField2D>>,
        solutions: Option<Vec<ScalarField2D>>,
        generator: impl Into<String>,
        generator_params: Value,
        seed: u64,
    ) -> Result<Self> {
        let channels = inputs.first().map_or(1, Vec::len);
        if channels == 0 {
            return Err(Error::Shape("samples need at least one channel".into()));
        }
        for (k, sample) in inputs.iter().enumerate() {
            if sample.len() != channels {
                return Err(Error::Shape(format!(
                    "sample {k} has {} channels, expected {channels}",
                    sample.len()
                )));
            }
            for field in sample {
                field.check_on(grid)?;
            }
        }
        if let Some(sol) = &solutions {
            if sol.len() != inputs.len() {
                return Err(Error::Shape(format!(
                    "{} solutions for {} inputs",
                    sol.len(),
                    inputs.len()
                )));
            }
            for field in sol {
                field.check_on(grid)?;
            }
        }
        let mut set = SampleSet {
            grid,
            channels,
            manifest: Manifest {
                format_version: FORMAT_VERSION,
                grid_n: grid.n(),
                sample_count: inputs.len(),
                channels_per_input: channels,
                has_solutions: solutions.is_some(),
                generator: generator.into(),
                generator_params,
                seed,
                checksum: String::new(),
            },
            inputs,
            solutions,
        };
        set.manifest.checksum = set.compute_checksum();
        Ok(set)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn checksum(&self) -> &str {
        &self.manifest.checksum
    }

    pub fn has_solutions(&self) -> bool {
        self.solutions.is_some()
    }

    pub fn input(&self, index: usize) -> &[ScalarField2D] {
        &self.inputs[index]
    }

    pub fn inputs(&self) -> &[Vec<ScalarField2D>] {
        &self.inputs
    }

    pub fn solution(&self, index: usize) -> Option<&ScalarField2D> {
        self.solutions.as_ref().map(|s| &s[index])
    }

    pub fn solutions(&self) -> Option<&[ScalarField2D]> {
        self.solutions.as_deref()
    }

    /// Contiguous sub-range; the manifest records the parent and range.
    pub fn slice(&self, range: Range<usize>) -> Result<SampleSet> {
        if range.end > self.len() || range.start > range.end {
            return Err(Error::InvalidParameter(format!(
                "range {range:?} outside set of {}",
                self.len()
            )));
        }
        let params = json!({
            "parent_generator": self.manifest.generator,
            "parent_checksum": self.manifest.checksum,
            "parent_params": self.manifest.generator_params,
            "range": [range.start, range.end],
        });
        SampleSet::new(
            self.grid,
            self.inputs[range.clone()].to_vec(),
            self.solutions.as_ref().map(|s| s[range].to_vec()),
            self.manifest.generator.clone(),
            params,
            self.manifest.seed,
        )
    }

    /// Same inputs with the solutions dropped.
    pub fn without_solutions(&self) -> SampleSet {
        SampleSet::new(
            self.grid,
            self.inputs.clone(),
            None,
            self.manifest.generator.clone(),
            self.manifest.generator_params.clone(),
            self.manifest.seed,
        )
        .expect("shapes already validated")
    }

    /// Same inputs paired with `solutions`.
    pub fn with_solutions(
        &self,
        solutions: Vec<ScalarField2D>,
        extra_params: Value,
    ) -> Result<SampleSet> {
        let mut params = self.manifest.generator_params.clone();
        if let (Value::Object(map), Value::Object(extra)) = (&mut params, extra_params) {
            map.extend(extra);
        }
        SampleSet::new(
            self.grid,
            self.inputs.clone(),
            Some(solutions),
            self.manifest.generator.clone(),
            params,
            self.manifest.seed,
        )
    }

    fn input_bytes(&self) -> Vec<u8> {
        let mut out =
            Vec::with_capacity(self.len() * self.channels * self.grid.len() * 8);
        for sample in &self.inputs {
            for field in sample {
                for v in field.values() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    fn solution_bytes(&self) -> Option<Vec<u8>> {
        self.solutions.as_ref().map(|sols| {
            let mut out = Vec::with_capacity(sols.len() * self.grid.len() * 8);
            for field in sols {
                for v in field.values() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            out
        })
    }

    fn compute_checksum(&self) -> String {
        checksum_of(&self.input_bytes(), self.solution_bytes().as_deref())
    }
}

fn checksum_of(inputs: &[u8], solutions: Option<&[u8]>) -> String {
    let mut hasher = Sha256::new();
    hasher.update(inputs);
    if let Some(s) = solutions {
        hasher.update(s);
    }
    hex::encode(hasher.finalize())
}

pub fn save_sampleset(set: &SampleSet, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, bytes: &[u8]| {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(path, e))
    };
    write(INPUTS_FILE, &set.input_bytes())?;
    match set.solution_bytes() {
        Some(bytes) => write(SOLUTIONS_FILE, &bytes)?,
        None => {
            let stale = dir.join(SOLUTIONS_FILE);
            if stale.exists() {
                fs::remove_file(&stale).map_err(|e| Error::io(stale, e))?;
            }
        }
    }
    let mut text = serde_json::to_string_pretty(&set.manifest)?;
    text.push('\n');
    write(MANIFEST_FILE, text.as_bytes())
}

pub fn load_sampleset(dir: impl AsRef<Path>) -> Result<SampleSet> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.exists() {
        return Err(Error::MissingDataset(dir.to_path_buf()));
    }
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Malformed {
        what: manifest_path.display().to_string(),
        detail: e.to_string(),
    })?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Version(manifest.format_version));
    }
    let grid = Grid::new(manifest.grid_n)?;
    if manifest.channels_per_input == 0 {
        return Err(Error::Shape("manifest declares zero channels".into()));
    }
    let per_field = grid.len() * 8;
    let read = |name: &str, expected: usize| -> Result<Vec<u8>> {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if bytes.len() != expected {
            return Err(Error::SizeMismatch {
                file: name.to_string(),
                expected: expected as u64,
                found: bytes.len() as u64,
            });
        }
        Ok(bytes)
    };
    let input_bytes = read(
        INPUTS_FILE,
        manifest.sample_count * manifest.channels_per_input * per_field,
    )?;
    let solution_bytes = if manifest.has_solutions {
        Some(read(SOLUTIONS_FILE, manifest.sample_count * per_field)?)
    } else {
        None
    };
    let found = checksum_of(&input_bytes, solution_bytes.as_deref());
    if found != manifest.checksum {
        return Err(Error::ChecksumMismatch {
            expected: manifest.checksum.clone(),
            found,
        });
    }

    let decode = |bytes: &[u8]| -> Result<Vec<ScalarField2D>> {
        bytes
            .chunks_exact(per_field)
            .map(|chunk| {
                let values = chunk
                    .chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
                    .collect();
                ScalarField2D::from_values(grid, values)
            })
            .collect()
    };
    let flat = decode(&input_bytes)?;
    let inputs: Vec<Vec<ScalarField2D>> = flat
        .chunks(manifest.channels_per_input)
        .map(<[ScalarField2D]>::to_vec)
        .collect();
    let solutions = solution_bytes.as_deref().map(decode).transpose()?;
    Ok(SampleSet {
        grid,
        channels: manifest.channels_per_input,
        inputs,
        solutions,
        manifest,
    })
}
