//! Corpus consistency checks backing `rda validate`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::store::{read_entry_file, JournalStore, ENTRY_FILE};
use super::tags::TagRegistry;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub path: PathBuf,
    pub message: String,
}

#[derive(Debug, Default, Serialize)]
pub struct LintReport {
    pub entries_checked: usize,
    pub issues: Vec<Issue>,
}

impl LintReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }

    fn push(&mut self, path: &Path, message: impl Into<String>) {
        self.issues.push(Issue {
            path: path.to_path_buf(),
            message: message.into(),
        });
    }
}

pub fn lint(store: &JournalStore) -> Result<LintReport> {
    let mut report = LintReport::default();

    let registry = match store.load_tags() {
        Ok(registry) => {
            for dup in registry.duplicates() {
                report.push(&store.tags_path(), format!("duplicate tag {dup:?} (case-insensitive)"));
            }
            Some(registry)
        }
        Err(e) => {
            report.push(&store.tags_path(), e.to_string());
            None
        }
    };

    let (days, warnings) = store.list_days()?;
    for w in warnings {
        report.push(w.path.as_deref().unwrap_or(store.root()), w.message);
    }
    for (date, day_path) in days {
        let (runs, warnings) = store.list_runs(&day_path)?;
        for w in warnings {
            report.push(w.path.as_deref().unwrap_or(&day_path), w.message);
        }
        for (run, run_path) in runs {
            lint_run(&mut report, &run_path, date, run, registry.as_ref())?;
        }
    }
    Ok(report)
}

fn lint_run(
    report: &mut LintReport,
    run_path: &Path,
    date: chrono::NaiveDate,
    run: u32,
    registry: Option<&TagRegistry>,
) -> Result<()> {
    let mut others = Vec::new();
    for item in fs::read_dir(run_path).map_err(|e| crate::Error::persistence(run_path, e))? {
        let item = item.map_err(|e| crate::Error::persistence(run_path, e))?;
        let name = item.file_name().to_string_lossy().into_owned();
        if name != ENTRY_FILE && !name.starts_with('.') {
            others.push(name);
        }
    }

    let entry_path = run_path.join(ENTRY_FILE);
    if !entry_path.exists() {
        report.push(run_path, "run directory has no entry.json");
        for name in others {
            report.push(&run_path.join(name), "orphan file: no entry references it");
        }
        return Ok(());
    }
    report.entries_checked += 1;
    let entry = match read_entry_file(&entry_path) {
        Ok(entry) => entry,
        Err(e) => {
            report.push(&entry_path, e.to_string());
            return Ok(());
        }
    };
    if entry.date != date || entry.run != run {
        report.push(
            &entry_path,
            format!("entry claims {} run {} but lives in {date} run {run}", entry.date, entry.run),
        );
    }
    for problem in entry.problems(registry) {
        report.push(&entry_path, problem);
    }
    match &entry.video_file {
        Some(video) if !others.contains(video) => {
            report.push(&entry_path, format!("referenced video {video:?} is missing"));
        }
        _ => {}
    }
    for name in others {
        if entry.video_file.as_deref() != Some(name.as_str()) {
            report.push(&run_path.join(name), "orphan file: not referenced by entry.json");
        }
    }
    Ok(())
}
