use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Serialize;

use super::entry::JournalEntry;
use super::tags::{TagRegistry, TAGS_FILE};
use crate::error::{Error, Result, Warning};

pub const ENTRY_FILE: &str = "entry.json";
const RUN_PREFIX: &str = "run_";

/// Keyed directories plus warnings about whatever else was found.
pub type Listing<K> = (Vec<(K, PathBuf)>, Vec<Warning>);

/// On-disk corpus: `<root>/<YYYY-MM-DD>/run_<N>/entry.json` plus at most one
/// video file per run directory.
#[derive(Debug, Clone)]
pub struct JournalStore {
    root: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DayListing {
    pub date: NaiveDate,
    pub runs: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunDir {
    pub date: NaiveDate,
    pub run: u32,
    pub path: PathBuf,
}

#[derive(Debug)]
pub struct Allocation {
    pub run_dir: RunDir,
    pub warnings: Vec<Warning>,
}

#[derive(Debug)]
pub struct Persisted {
    pub entry_path: PathBuf,
    pub video_path: Option<PathBuf>,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Default)]
pub struct Scan {
    pub entries: Vec<JournalEntry>,
    pub warnings: Vec<Warning>,
}

pub fn day_dir_name(date: NaiveDate) -> String {
    date.format("%Y-%m-%d").to_string()
}

pub fn parse_day_dir_name(name: &str) -> Option<NaiveDate> {
    let date = NaiveDate::parse_from_str(name, "%Y-%m-%d").ok()?;
    (day_dir_name(date) == name).then_some(date)
}

pub fn run_dir_name(run: u32) -> String {
    format!("{RUN_PREFIX}{run}")
}

/// `run_<N>` with N >= 1 and no leading zeros.
pub fn parse_run_dir_name(name: &str) -> Option<u32> {
    let digits = name.strip_prefix(RUN_PREFIX)?;
    if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok().filter(|&n| n >= 1)
}

/// Write-temp-then-rename in the destination directory.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{file_name}.tmp-{}", std::process::id()));
    let write = || -> io::Result<()> {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::persistence(path, e)
    })
}

fn is_dir(path: &Path) -> bool {
    fs::metadata(path).map(|m| m.is_dir()).unwrap_or(false)
}

impl JournalStore {
    /// Opens an existing store root.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        if !is_dir(&root) {
            return Err(Error::Input(format!(
                "journal root {} does not exist or is not a directory",
                root.display()
            )));
        }
        Ok(JournalStore { root })
    }

    /// Creates the root (and an empty tag registry) if needed.
    pub fn init(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::persistence(&root, e))?;
        let store = JournalStore { root };
        let tags = store.tags_path();
        if !tags.exists() {
            TagRegistry::default().save(&tags)?;
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn tags_path(&self) -> PathBuf {
        self.root.join(TAGS_FILE)
    }

    pub fn load_tags(&self) -> Result<TagRegistry> {
        TagRegistry::load(&self.tags_path())
    }

    pub fn save_tags(&self, registry: &TagRegistry) -> Result<()> {
        registry.save(&self.tags_path())
    }

    pub fn day_dir(&self, date: NaiveDate) -> PathBuf {
        self.root.join(day_dir_name(date))
    }

    pub fn run_dir(&self, date: NaiveDate, run: u32) -> PathBuf {
        self.day_dir(date).join(run_dir_name(run))
    }

    pub fn entry_path(&self, date: NaiveDate, run: u32) -> PathBuf {
        self.run_dir(date, run).join(ENTRY_FILE)
    }

    /// Day directories in chronological order. Anything else at the root
    /// (other than the tag registry and dot-files) is reported.
    pub fn list_days(&self) -> Result<Listing<NaiveDate>> {
        let mut days = Vec::new();
        let mut warnings = Vec::new();
        let read = fs::read_dir(&self.root).map_err(|e| Error::persistence(&self.root, e))?;
        for item in read {
            let item = item.map_err(|e| Error::persistence(&self.root, e))?;
            let name = item.file_name().to_string_lossy().into_owned();
            let path = item.path();
            if name.starts_with('.') || name == TAGS_FILE {
                continue;
            }
            match parse_day_dir_name(&name) {
                Some(date) if is_dir(&path) => days.push((date, path)),
                _ => warnings.push(Warning::new(&path, "not a YYYY-MM-DD day directory; ignored")),
            }
        }
        days.sort();
        Ok((days, warnings))
    }

    /// Run directories of one day in numeric order.
    pub fn list_runs(&self, day_dir: &Path) -> Result<Listing<u32>> {
        let mut runs = Vec::new();
        let mut warnings = Vec::new();
        let read = fs::read_dir(day_dir).map_err(|e| Error::persistence(day_dir, e))?;
        for item in read {
            let item = item.map_err(|e| Error::persistence(day_dir, e))?;
            let path = item.path();
            if !is_dir(&path) {
                continue;
            }
            let name = item.file_name().to_string_lossy().into_owned();
            match parse_run_dir_name(&name) {
                Some(run) => runs.push((run, path)),
                None => warnings.push(Warning::new(&path, "malformed run directory name; ignored")),
            }
        }
        runs.sort();
        Ok((runs, warnings))
    }

    pub fn days(&self) -> Result<Vec<DayListing>> {
        let (days, _) = self.list_days()?;
        days.into_iter()
            .map(|(date, path)| {
                let (runs, _) = self.list_runs(&path)?;
                Ok(DayListing {
                    date,
                    runs: runs.into_iter().map(|(run, _)| run).collect(),
                })
            })
            .collect()
    }

    /// Creates `<root>/<date>/run_<max+1>/`. Gaps are never refilled.
    pub fn allocate_run_dir(&self, date: NaiveDate) -> Result<Allocation> {
        let day = self.day_dir(date);
        fs::create_dir_all(&day).map_err(|e| Error::persistence(&day, e))?;
        loop {
            let (runs, warnings) = self.list_runs(&day)?;
            let run = runs.last().map_or(1, |(n, _)| n + 1);
            let path = day.join(run_dir_name(run));
            match fs::create_dir(&path) {
                Ok(()) => {
                    return Ok(Allocation {
                        run_dir: RunDir { date, run, path },
                        warnings,
                    })
                }
                // Lost a race with another allocator; rescan.
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(Error::persistence(&path, e)),
            }
        }
    }

    /// Writes `entry.json` into its (already allocated) run directory and
    /// moves the recording next to it. A missing or unmovable video is a
    /// warning: the reflection is persisted regardless.
    pub fn persist_entry(&self, entry: &mut JournalEntry, video: Option<&Path>) -> Result<Persisted> {
        let problems = entry.problems(None);
        if !problems.is_empty() {
            return Err(Error::Validation(problems.join("; ")));
        }
        let run_dir = self.run_dir(entry.date, entry.run);
        if !is_dir(&run_dir) {
            return Err(Error::Input(format!(
                "run directory {} has not been allocated",
                run_dir.display()
            )));
        }
        let entry_path = run_dir.join(ENTRY_FILE);
        if entry_path.exists() {
            return Err(Error::persistence(
                &entry_path,
                io::Error::new(io::ErrorKind::AlreadyExists, "entry.json already exists"),
            ));
        }

        let mut warnings = Vec::new();
        entry.video_file = None;
        let mut video_path = None;
        if let Some(source) = video {
            match place_video(source, &run_dir) {
                Ok(dest) => {
                    entry.video_file = dest.file_name().map(|n| n.to_string_lossy().into_owned());
                    video_path = Some(dest);
                }
                Err(message) => warnings.push(Warning::new(source, message)),
            }
        }

        let json = serde_json::to_vec_pretty(entry).expect("entry serializes");
        write_atomic(&entry_path, &json)?;
        Ok(Persisted {
            entry_path,
            video_path,
            warnings,
        })
    }

    /// Allocates the next run for the entry's date and persists into it.
    pub fn record(&self, entry: &mut JournalEntry, video: Option<&Path>) -> Result<Persisted> {
        let allocation = self.allocate_run_dir(entry.date)?;
        entry.run = allocation.run_dir.run;
        let mut persisted = self.persist_entry(entry, video)?;
        persisted.warnings.splice(0..0, allocation.warnings);
        Ok(persisted)
    }

    pub fn read_entry(&self, date: NaiveDate, run: u32) -> Result<JournalEntry> {
        read_entry_file(&self.entry_path(date, run))
    }

    /// All readable entries ordered by (date, run). Unreadable or
    /// inconsistent entries are skipped and reported.
    pub fn scan(&self) -> Result<Scan> {
        if !is_dir(&self.root) {
            return Err(Error::Input(format!(
                "journal root {} does not exist",
                self.root.display()
            )));
        }
        let mut scan = Scan::default();
        let (days, warnings) = self.list_days()?;
        scan.warnings.extend(warnings);
        for (date, day_path) in days {
            let (runs, warnings) = self.list_runs(&day_path)?;
            scan.warnings.extend(warnings);
            for (run, run_path) in runs {
                match load_checked(&run_path, date, run) {
                    Ok(entry) => scan.entries.push(entry),
                    Err(warning) => scan.warnings.push(warning),
                }
            }
        }
        Ok(scan)
    }

    /// Most recent readable entry by (date, run).
    pub fn latest_entry(&self) -> Result<Option<JournalEntry>> {
        let (days, _) = self.list_days()?;
        for (date, day_path) in days.into_iter().rev() {
            let (runs, _) = self.list_runs(&day_path)?;
            for (run, run_path) in runs.into_iter().rev() {
                if let Ok(entry) = load_checked(&run_path, date, run) {
                    return Ok(Some(entry));
                }
            }
        }
        Ok(None)
    }
}

pub fn read_entry_file(path: &Path) -> Result<JournalEntry> {
    let bytes = fs::read(path).map_err(|e| Error::persistence(path, e))?;
    serde_json::from_slice(&bytes).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn load_checked(run_path: &Path, date: NaiveDate, run: u32) -> Result<JournalEntry, Warning> {
    let path = run_path.join(ENTRY_FILE);
    if !path.exists() {
        return Err(Warning::new(run_path, "run directory has no entry.json"));
    }
    let entry = read_entry_file(&path).map_err(|e| Warning::new(&path, e.to_string()))?;
    if entry.date != date || entry.run != run {
        return Err(Warning::new(
            &path,
            format!(
                "entry claims {} run {} but lives in {} run {}",
                entry.date, entry.run, date, run
            ),
        ));
    }
    Ok(entry)
}

fn place_video(source: &Path, run_dir: &Path) -> Result<PathBuf, String> {
    if !source.is_file() {
        return Err("recording not found; entry saved without video".into());
    }
    let name = source
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .filter(|n| n != ENTRY_FILE)
        .unwrap_or_else(|| {
            let ext = source.extension().and_then(|e| e.to_str()).unwrap_or("mkv");
            format!("video.{ext}")
        });
    let dest = run_dir.join(name);
    if fs::rename(source, &dest).is_ok() {
        return Ok(dest);
    }
    // Cross-device moves fall back to a copy; the source is left in place if
    // it cannot be removed.
    match fs::copy(source, &dest) {
        Ok(_) => {
            let _ = fs::remove_file(source);
            Ok(dest)
        }
        Err(e) => {
            let _ = fs::remove_file(&dest);
            Err(format!("could not move recording into run directory: {e}"))
        }
    }
}
