use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::journal::{EntryStatus, JournalStore};
use crate::{Error, Result, Warning};

/// Corpus counts. A "day" (also reported as a session) is a day directory
/// holding at least one readable entry.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub entry_count: usize,
    pub day_count: usize,
    pub abandoned_count: usize,
    /// Bytes of every file below the day directories, videos included.
    pub total_bytes: u64,
    pub per_tag: BTreeMap<String, usize>,
}

fn tree_size(path: &Path) -> Result<u64> {
    let meta = fs::symlink_metadata(path).map_err(|e| Error::persistence(path, e))?;
    if !meta.is_dir() {
        return Ok(meta.len());
    }
    let mut total = 0;
    for item in fs::read_dir(path).map_err(|e| Error::persistence(path, e))? {
        let item = item.map_err(|e| Error::persistence(path, e))?;
        total += tree_size(&item.path())?;
    }
    Ok(total)
}

pub fn stats(store: &JournalStore) -> Result<(Stats, Vec<Warning>)> {
    let scan = store.scan()?;
    let mut stats = Stats {
        entry_count: scan.entries.len(),
        ..Stats::default()
    };
    let mut days: Vec<_> = scan.entries.iter().map(|e| e.date).collect();
    days.dedup();
    stats.day_count = days.len();
    for entry in &scan.entries {
        if entry.status == EntryStatus::Abandoned {
            stats.abandoned_count += 1;
        }
        for tag in &entry.tags {
            *stats.per_tag.entry(tag.clone()).or_default() += 1;
        }
    }
    let (day_dirs, _) = store.list_days()?;
    for (_, path) in day_dirs {
        stats.total_bytes += tree_size(&path)?;
    }
    Ok((stats, scan.warnings))
}
