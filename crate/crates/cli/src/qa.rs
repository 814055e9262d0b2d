//! `occgen qa`: quality report over a directory of meshes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use occgen::geometry::{load_mesh, qa_report, QaReport, Status};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::manifest::{relativize, write_atomic, Entry, Manifest};

const MESH_EXTENSIONS: [&str; 2] = ["obj", "stl"];

#[derive(Debug, Clone, Serialize)]
pub struct QaFileReport {
    pub id: String,
    pub mesh: PathBuf,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<QaReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct QaSummary {
    pub total: usize,
    /// Every category, including the human-only ones, keyed by label.
    pub distribution: BTreeMap<String, usize>,
    pub files: Vec<QaFileReport>,
}

impl QaSummary {
    /// Text table with one row per category.
    pub fn table(&self) -> String {
        let mut out = format!("{:<18} {:>6} {:>8}\n", "Status", "Count", "Share");
        for s in Status::ALL {
            let n = self.distribution[s.label()];
            let pct = if self.total == 0 { 0.0 } else { 100.0 * n as f64 / self.total as f64 };
            out.push_str(&format!("{:<18} {:>6} {:>7.2}%\n", s.label(), n, pct));
        }
        out.push_str(&format!("{:<18} {:>6}\n", "Total", self.total));
        out
    }
}

fn mesh_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let read = std::fs::read_dir(dir)
        .map_err(|e| CliError::data(format!("cannot read input directory {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = read
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| MESH_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Runs the report on every mesh under `input`. Unreadable meshes become
/// `NotUsable` entries carrying the error.
pub fn run_qa(input: &Path, manifest_path: &Path) -> Result<(Manifest, QaSummary)> {
    let files = mesh_files(input)?;
    if files.is_empty() {
        log::warn!("no .obj or .stl files in {}", input.display());
    }
    let base = crate::manifest::manifest_dir(manifest_path);
    std::fs::create_dir_all(base)?;
    let mut manifest = Manifest::default();
    let mut reports = Vec::with_capacity(files.len());
    for path in files {
        let stem = path.file_stem().unwrap_or_default().to_string_lossy().to_string();
        let id = if manifest.entries.iter().any(|e| e.id == stem) {
            path.file_name().unwrap_or_default().to_string_lossy().to_string()
        } else {
            stem
        };
        let (status, report, reason) = match load_mesh(&path) {
            Ok(mesh) => {
                let r = qa_report(&mesh);
                (r.suggested_status, Some(r), None)
            }
            Err(e) => {
                log::warn!("{}: {e}", path.display());
                (Status::NotUsable, None, Some(e.to_string()))
            }
        };
        let mut entry = Entry::new(&id, relativize(base, &path), status);
        entry.qa_reason = reason.clone();
        manifest.entries.push(entry);
        reports.push(QaFileReport {
            id,
            mesh: path,
            status,
            report,
            reason,
        });
    }
    let mut distribution: BTreeMap<String, usize> = Status::ALL.iter().map(|s| (s.label().to_string(), 0)).collect();
    for r in &reports {
        *distribution.get_mut(r.status.label()).unwrap() += 1;
    }
    let summary = QaSummary {
        total: reports.len(),
        distribution,
        files: reports,
    };
    manifest.save(manifest_path)?;
    write_atomic(&base.join("qa_report.json"), &serde_json::to_vec_pretty(&summary)?)?;
    Ok((manifest, summary))
}
