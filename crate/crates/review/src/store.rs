//! Append-only label log and the aggregation fold over it.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survey::{GroundTruth, Survey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Choice {
    Real,
    Fake,
    NotSure,
}

impl Choice {
    pub const ALL: [Choice; 3] = [Choice::Real, Choice::Fake, Choice::NotSure];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub item: String,
    pub reviewer: String,
    pub choice: Choice,
    /// Milliseconds since the Unix epoch, UTC.
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveySummary {
    pub total: usize,
    pub counts: BTreeMap<Choice, usize>,
    /// Ground truth against choice; only filled on an authorized reveal.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<BTreeMap<GroundTruth, BTreeMap<Choice, usize>>>,
}

/// Keeps the latest record per `(reviewer, item)` in log order and counts
/// the choices. With a survey, also builds the confusion table.
pub fn aggregate(records: &[LabelRecord], survey: Option<&Survey>) -> SurveySummary {
    let mut latest: HashMap<(&str, &str), Choice> = HashMap::new();
    for r in records {
        latest.insert((&r.reviewer, &r.item), r.choice);
    }
    let mut counts: BTreeMap<Choice, usize> = Choice::ALL.iter().map(|&c| (c, 0)).collect();
    let mut confusion = survey.map(|_| {
        [GroundTruth::Real, GroundTruth::Synthetic]
            .into_iter()
            .map(|g| (g, Choice::ALL.iter().map(|&c| (c, 0)).collect::<BTreeMap<_, _>>()))
            .collect::<BTreeMap<_, _>>()
    });
    for (&(_, item), &choice) in &latest {
        *counts.get_mut(&choice).unwrap() += 1;
        if let (Some(table), Some(it)) = (confusion.as_mut(), survey.and_then(|s| s.get(item))) {
            *table.get_mut(&it.ground_truth).unwrap().get_mut(&choice).unwrap() += 1;
        }
    }
    SurveySummary {
        total: latest.len(),
        counts,
        confusion,
    }
}

/// JSON-lines record log. Each append is flushed to disk before it returns.
#[derive(Debug)]
pub struct LabelStore {
    path: Option<PathBuf>,
    file: Option<File>,
    records: Vec<LabelRecord>,
}

impl LabelStore {
    /// A store that lives only in memory.
    pub fn in_memory() -> Self {
        Self {
            path: None,
            file: None,
            records: Vec::new(),
        }
    }

    /// Opens (or creates) a log and replays it. A torn final line from a
    /// crash mid-write is dropped; corruption anywhere else is an error.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut records = Vec::new();
        let mut valid_len = 0u64;
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    valid_len += line.len() as u64 + 1;
                    continue;
                }
                match serde_json::from_str::<LabelRecord>(line) {
                    Ok(r) => {
                        records.push(r);
                        valid_len += line.len() as u64 + 1;
                    }
                    Err(_) if i + 1 == lines.len() => {
                        log::warn!("{}: dropping torn final record", path.display());
                    }
                    Err(e) => {
                        return Err(Error::Store {
                            path: path.display().to_string(),
                            line: i + 1,
                            message: e.to_string(),
                        })
                    }
                }
            }
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&path)?;
        let len = file.metadata()?.len();
        if len > valid_len {
            file.set_len(valid_len)?;
        } else if len + 1 == valid_len {
            // last record lacks its newline; keep the next append separate
            file.write_all(b"\n")?;
        }
        Ok(Self {
            path: Some(path),
            file: Some(file),
            records,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn records(&self) -> &[LabelRecord] {
        &self.records
    }

    pub fn append(&mut self, record: LabelRecord) -> Result<()> {
        if let Some(f) = self.file.as_mut() {
            let mut line = serde_json::to_vec(&record)?;
            line.push(b'\n');
            f.write_all(&line)?;
            f.sync_data()?;
        }
        self.records.push(record);
        Ok(())
    }
}
