//! Binary container for fitted models: `CLID`, a little-endian u16 format
//! version, a u8 artifact kind, then a bincode payload.

use std::io::{Read, Write};
use std::path::Path;

use super::{FeaturePipeline, TrainedPipeline};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CLID";
pub const FORMAT_VERSION: u16 = 1;

const KIND_UNSUP: u8 = 1;
const KIND_CLASSIFIER: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    /// Fitted unsupervised feature pipeline (clusters, VAE or LDA).
    Unsup(FeaturePipeline),
    Classifier(TrainedPipeline),
}

fn bad(path: &Path, reason: impl Into<String>) -> Error {
    Error::ModelFile { path: path.to_path_buf(), reason: reason.into() }
}

pub fn write_artifact<W: Write>(mut w: W, artifact: &Artifact) -> Result<()> {
    let (kind, payload) = match artifact {
        Artifact::Unsup(p) => (KIND_UNSUP, bincode::serialize(p)),
        Artifact::Classifier(t) => (KIND_CLASSIFIER, bincode::serialize(t)),
    };
    let payload = payload.map_err(|e| Error::data(format!("serialising model: {e}")))?;
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&[kind])?;
    w.write_all(&payload)?;
    w.flush()?;
    Ok(())
}

/// Reads an artifact; `path` only labels errors.
pub fn read_artifact<R: Read>(mut r: R, path: &Path) -> Result<Artifact> {
    let mut head = [0u8; 7];
    r.read_exact(&mut head).map_err(|_| bad(path, "file too short"))?;
    if &head[..4] != MAGIC {
        return Err(bad(path, "not a model file (bad magic)"));
    }
    let version = u16::from_le_bytes([head[4], head[5]]);
    if version != FORMAT_VERSION {
        return Err(bad(path, format!("format version {version}, expected {FORMAT_VERSION}")));
    }
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    let corrupt = |e: bincode::Error| bad(path, format!("corrupt payload: {e}"));
    let mut artifact = match head[6] {
        KIND_UNSUP => Artifact::Unsup(bincode::deserialize(&payload).map_err(corrupt)?),
        KIND_CLASSIFIER => Artifact::Classifier(bincode::deserialize(&payload).map_err(corrupt)?),
        k => return Err(bad(path, format!("unknown artifact kind {k}"))),
    };
    match &mut artifact {
        Artifact::Unsup(p) => p.prepare()?,
        Artifact::Classifier(t) => t.pipeline.prepare()?,
    }
    Ok(artifact)
}

pub fn save_artifact(path: &Path, artifact: &Artifact) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_artifact(std::io::BufWriter::new(f), artifact)
}

pub fn load_artifact(path: &Path) -> Result<Artifact> {
    let f = std::fs::File::open(path)?;
    read_artifact(std::io::BufReader::new(f), path)
}
