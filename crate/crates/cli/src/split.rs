//! `occgen split`: seeded 80/5/15 partition of the usable entries.

use occgen::geometry::Status;
use rand::seq::SliceRandom;

use crate::error::{CliError, Result};
use crate::manifest::{Manifest, Split};

pub const MIN_USABLE: usize = 20;

/// Sizes of (train, val, test) for `n` usable entries: floor for train and
/// validation, the remainder to test.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = n * 80 / 100;
    let val = n * 5 / 100;
    (train, val, n - train - val)
}

/// Reassigns every split. Non-usable entries get `Split::None`.
pub fn assign_splits(manifest: &mut Manifest, seed: u64) -> Result<(usize, usize, usize)> {
    let mut usable: Vec<usize> = (0..manifest.entries.len())
        .filter(|&i| manifest.entries[i].status() == Status::Usable)
        .collect();
    if usable.len() < MIN_USABLE {
        return Err(CliError::data(format!(
            "split needs at least {MIN_USABLE} Usable entries, found {}",
            usable.len()
        )));
    }
    usable.shuffle(&mut occgen::rng::seeded(seed));
    let (train, val, test) = split_sizes(usable.len());
    for e in &mut manifest.entries {
        e.split = Split::None;
    }
    for (k, &i) in usable.iter().enumerate() {
        manifest.entries[i].split = if k < train {
            Split::Train
        } else if k < train + val {
            Split::Val
        } else {
            Split::Test
        };
    }
    Ok((train, val, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::Entry;

    fn manifest(usable: usize, other: usize) -> Manifest {
        let mut entries: Vec<Entry> = (0..usable).map(|i| Entry::new(format!("u{i}"), "x.obj", Status::Usable)).collect();
        entries.extend((0..other).map(|i| Entry::new(format!("o{i}"), "x.obj", Status::NotUsable)));
        Manifest { entries }
    }

    #[test]
    fn rounding_rule() {
        assert_eq!(split_sizes(452), (361, 22, 69));
        assert_eq!(split_sizes(20), (16, 1, 3));
    }

    #[test]
    fn assignment_is_seeded_and_skips_unusable() {
        let mut a = manifest(30, 5);
        let mut b = manifest(30, 5);
        assert_eq!(assign_splits(&mut a, 9).unwrap(), (24, 1, 5));
        assign_splits(&mut b, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.entries[30..].iter().all(|e| e.split == Split::None));
        let mut c = manifest(30, 5);
        assign_splits(&mut c, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn too_few_entries() {
        let err = assign_splits(&mut manifest(19, 3), 0).unwrap_err();
        assert!(err.to_string().contains("at least 20"));
    }
}
