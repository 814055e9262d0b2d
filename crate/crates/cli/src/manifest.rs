//! Dataset manifest shared by every pipeline command.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use occgen::geometry::Status;
use occgen::metrics::ShapeMetrics;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    #[default]
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub id: String,
    pub mesh: PathBuf,
    pub qa_status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qa_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_status: Option<Status>,
    #[serde(default)]
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mlp: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<ShapeMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_error: Option<String>,
}

impl Entry {
    pub fn new(id: impl Into<String>, mesh: impl Into<PathBuf>, qa_status: Status) -> Self {
        Self {
            id: id.into(),
            mesh: mesh.into(),
            qa_status,
            qa_reason: None,
            human_status: None,
            split: Split::None,
            mlp: None,
            metrics: None,
            fit_error: None,
        }
    }

    /// A human label overrides the suggestion.
    pub fn status(&self) -> Status {
        self.human_status.unwrap_or(self.qa_status)
    }
}

/// Paths inside a manifest are relative to the manifest's directory
/// unless absolute.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<Entry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::data(format!("cannot read manifest {}: {e}", path.display())))?;
        let m: Manifest = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::data(format!("manifest {} is not valid: {e}", path.display())))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.id.as_str()) {
                return Err(CliError::data(format!("duplicate manifest id {:?}", e.id)));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        write_atomic(path, &serde_json::to_vec_pretty(self)?)
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &Entry> {
        self.entries.iter().filter(move |e| e.split == split)
    }
}

pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// `p` relative to `base` when it lies underneath it.
pub fn relativize(base: &Path, p: &Path) -> PathBuf {
    match (base.canonicalize(), p.canonicalize()) {
        (Ok(b), Ok(q)) => q.strip_prefix(&b).map(Path::to_path_buf).unwrap_or(q),
        _ => p.to_path_buf(),
    }
}

pub fn manifest_dir(path: &Path) -> &Path {
    path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
