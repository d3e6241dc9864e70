use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const META_FILE: &str = "meta.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Digest256 {
    pub name: String,
    pub sha256: String,
}

/// Written last, after every output of the stage is on disk.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub format_version: u32,
    pub stage: String,
    pub config_hash: String,
    pub stage_inputs: Vec<Digest256>,
    pub outputs: Vec<Digest256>,
}

impl ArtifactMeta {
    /// One digest standing for all outputs, used as a downstream input.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for o in &self.outputs {
            h.update(o.name.as_bytes());
            h.update(b"=");
            h.update(o.sha256.as_bytes());
            h.update(b"\n");
        }
        format!("{:x}", h.finalize())
    }
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_bytes(&bytes))
}

/// Writes through a temporary file so readers never see half a file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Per-stage output directories under the work dir.
#[derive(Clone, Debug)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Store { root: root.into() }
    }

    pub fn dir(&self, stage: &str) -> PathBuf {
        self.root.join(stage)
    }

    pub fn path(&self, stage: &str, file: &str) -> PathBuf {
        self.dir(stage).join(file)
    }

    pub fn meta(&self, stage: &str) -> Result<Option<ArtifactMeta>> {
        let path = self.path(stage, META_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Some(serde_json::from_slice(&bytes)?))
    }

    /// The stage's metadata, which must exist and match `config_hash`.
    pub fn require(&self, stage: &str, config_hash: &str) -> Result<ArtifactMeta> {
        let path = self.path(stage, META_FILE);
        let meta = self.meta(stage)?.ok_or_else(|| Error::MissingDependency {
            stage: stage.to_string(),
            artifact: path.display().to_string(),
        })?;
        if meta.format_version != FORMAT_VERSION || meta.config_hash != config_hash {
            return Err(Error::StaleArtifact {
                stage: stage.to_string(),
                artifact: path.display().to_string(),
                found: format!("{} (format {})", meta.config_hash, meta.format_version),
                expected: format!("{config_hash} (format {FORMAT_VERSION})"),
            });
        }
        Ok(meta)
    }

    /// True when the recorded run used the same config and inputs and its
    /// outputs are still intact.
    pub fn is_fresh(&self, stage: &str, config_hash: &str, inputs: &[Digest256]) -> Result<bool> {
        let Some(meta) = self.meta(stage)? else {
            return Ok(false);
        };
        if meta.format_version != FORMAT_VERSION || meta.config_hash != config_hash || meta.stage_inputs != inputs {
            return Ok(false);
        }
        for o in &meta.outputs {
            let p = self.output_path(stage, &o.name);
            if !p.exists() || sha256_file(&p)? != o.sha256 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Outputs are named relative to the stage directory unless absolute.
    pub fn output_path(&self, stage: &str, name: &str) -> PathBuf {
        let p = Path::new(name);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.path(stage, name)
        }
    }

    pub fn commit(&self, stage: &str, config_hash: &str, inputs: Vec<Digest256>, outputs: &[PathBuf]) -> Result<ArtifactMeta> {
        let dir = self.dir(stage);
        let outputs = outputs
            .iter()
            .map(|p| {
                let name = p.strip_prefix(&dir).map_or_else(|_| p.display().to_string(), |r| r.display().to_string());
                Ok(Digest256 { name, sha256: sha256_file(p)? })
            })
            .collect::<Result<Vec<_>>>()?;
        let meta = ArtifactMeta {
            format_version: FORMAT_VERSION,
            stage: stage.to_string(),
            config_hash: config_hash.to_string(),
            stage_inputs: inputs,
            outputs,
        };
        write_atomic(&self.path(stage, META_FILE), &serde_json::to_vec_pretty(&meta)?)?;
        Ok(meta)
    }

    pub fn invalidate(&self, stage: &str) -> Result<()> {
        let p = self.path(stage, META_FILE);
        if p.exists() {
            fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &serde_json::to_vec_pretty(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub fn write_bin<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &bincode::serialize(value)?)
}

pub fn read_bin<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(bincode::deserialize(&bytes)?)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.push(b'\n');
    }
    write_atomic(path, &out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Record {
                line: i + 1,
                reason: format!("{}: {e}", path.display()),
            })
        })
        .collect()
}
