//! Survey manifests and the blinded item list.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroundTruth {
    Real,
    Synthetic,
}

/// On-disk survey description. Relative mesh paths resolve against the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyManifest {
    pub seed: u64,
    pub items: Vec<SurveyEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyEntry {
    pub id: String,
    pub mesh: PathBuf,
    pub ground_truth: GroundTruth,
}

impl SurveyManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut m: SurveyManifest = serde_json::from_slice(&std::fs::read(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for e in &mut m.items {
            if e.mesh.is_relative() {
                e.mesh = base.join(&e.mesh);
            }
        }
        Ok(m)
    }
}

/// Deliberately not `Serialize`: nothing built from it can leak the label
/// by accident.
#[derive(Debug, Clone, PartialEq)]
pub struct ReviewItem {
    pub id: String,
    pub mesh: PathBuf,
    pub ground_truth: GroundTruth,
    pub display_order: usize,
}

/// Items in display order with an id index.
#[derive(Debug, Clone)]
pub struct Survey {
    items: Vec<ReviewItem>,
    by_id: HashMap<String, usize>,
}

impl Survey {
    /// Orders items by a shuffle seeded from the manifest, so every
    /// reviewer sees the same sequence.
    pub fn new(manifest: SurveyManifest) -> Result<Self> {
        let mut entries = manifest.items;
        let mut seen = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            if e.id.is_empty() {
                return Err(Error::Manifest(format!("item {i} has an empty id")));
            }
            if seen.insert(e.id.clone(), i).is_some() {
                return Err(Error::Manifest(format!("duplicate id {:?}", e.id)));
            }
        }
        entries.shuffle(&mut occgen::rng::seeded(manifest.seed));
        let items: Vec<ReviewItem> = entries
            .into_iter()
            .enumerate()
            .map(|(display_order, e)| ReviewItem {
                id: e.id,
                mesh: e.mesh,
                ground_truth: e.ground_truth,
                display_order,
            })
            .collect();
        let by_id = items.iter().map(|it| (it.id.clone(), it.display_order)).collect();
        Ok(Self { items, by_id })
    }

    pub fn items(&self) -> &[ReviewItem] {
        &self.items
    }

    pub fn get(&self, id: &str) -> Option<&ReviewItem> {
        self.by_id.get(id).map(|&i| &self.items[i])
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(n: usize, seed: u64) -> SurveyManifest {
        SurveyManifest {
            seed,
            items: (0..n)
                .map(|i| SurveyEntry {
                    id: format!("s{i}"),
                    mesh: PathBuf::from(format!("s{i}.obj")),
                    ground_truth: if i % 2 == 0 { GroundTruth::Real } else { GroundTruth::Synthetic },
                })
                .collect(),
        }
    }

    #[test]
    fn order_is_a_seeded_permutation() {
        let a = Survey::new(manifest(50, 1)).unwrap();
        let b = Survey::new(manifest(50, 1)).unwrap();
        let c = Survey::new(manifest(50, 2)).unwrap();
        let ids = |s: &Survey| s.items().iter().map(|i| i.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&a), ids(&b));
        assert_ne!(ids(&a), ids(&c));
        let mut sorted = ids(&a);
        sorted.sort();
        let mut expected: Vec<String> = (0..50).map(|i| format!("s{i}")).collect();
        expected.sort();
        assert_eq!(sorted, expected);
        assert_eq!(a.get("s7").unwrap().id, "s7");
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let mut m = manifest(3, 0);
        m.items[2].id = "s0".into();
        assert!(Survey::new(m).is_err());
    }
}
