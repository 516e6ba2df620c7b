use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Artifact locations under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
    pub tracks_dir: PathBuf,
}

impl Layout {
    pub fn new(out_dir: &Path, tracks_dir: Option<&Path>) -> Self {
        Self {
            root: out_dir.to_path_buf(),
            tracks_dir: tracks_dir.map_or_else(|| out_dir.join("tracks"), Path::to_path_buf),
        }
    }

    pub fn scenes(&self) -> PathBuf {
        self.root.join("scenes.jsonl")
    }

    pub fn sequences(&self) -> PathBuf {
        self.root.join("sequences.csv")
    }

    pub fn fields(&self) -> PathBuf {
        self.root.join("fields.json")
    }

    pub fn encoder(&self) -> PathBuf {
        self.root.join("encoder.json")
    }

    pub fn codec_loss(&self) -> PathBuf {
        self.root.join("codec_loss.csv")
    }

    pub fn features(&self) -> PathBuf {
        self.root.join("features.csv")
    }

    pub fn labels(&self) -> PathBuf {
        self.root.join("labels.csv")
    }

    pub fn chain_summary(&self) -> PathBuf {
        self.root.join("chain_summary.json")
    }

    pub fn analysis(&self, name: &str) -> PathBuf {
        self.root.join("analysis").join(name)
    }

    pub fn manifest(&self, stage: &str) -> PathBuf {
        self.root.join("manifests").join(format!("{stage}.json"))
    }
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::PathNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes through `body` and flushes.
pub(crate) fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = create(path)?;
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        open(path)?.read_to_end(&mut bytes)?;
        Ok(Self {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        })
    }
}

/// Provenance of one stage run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub version: String,
    pub seed: u64,
    pub stage_seed: u64,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}
