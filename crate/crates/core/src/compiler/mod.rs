//! Turns the journal corpus into reading and viewing material: per-day and
//! tag-filtered reports and videos, the tag co-occurrence heatmap and
//! corpus statistics. The corpus itself is only ever read.

pub mod matrix;
pub mod media;
pub mod pdf;
pub mod report;
pub mod select;
mod stats;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};

use chrono::NaiveDate;
use rayon::prelude::*;

pub use matrix::TagMatrix;
pub use media::{Corner, MediaError, Transcoder};
pub use report::ReportFormat;
pub use select::{TagMode, TagQuery};
pub use stats::{stats, Stats};

use crate::journal::{day_dir_name, run_dir_name, JournalEntry, JournalStore};
use crate::{Error, Result, Warning};

pub const CHRONOLOGICAL_DIR: &str = "chronological";
pub const TAGS_DIR: &str = "tags";
pub const PREPROCESSED_DIR: &str = "preprocessed";

#[derive(Debug, Clone)]
pub struct CompileOptions {
    pub output_dir: PathBuf,
    pub format: ReportFormat,
    /// `None` compiles reports only.
    pub transcoder: Option<Transcoder>,
}

/// What one compilation wrote.
#[derive(Debug, Default)]
pub struct Compilation {
    pub report: Option<PathBuf>,
    pub video: Option<PathBuf>,
    /// Selected entries in output order.
    pub entries: Vec<(NaiveDate, u32)>,
    /// Entries whose clips made it into the video.
    pub video_entries: Vec<(NaiveDate, u32)>,
    pub warnings: Vec<Warning>,
}

#[derive(Debug)]
pub struct Heatmap {
    pub matrix: TagMatrix,
    pub svg: PathBuf,
    pub csv: PathBuf,
}

pub struct Compiler {
    store: JournalStore,
    options: CompileOptions,
    annotated: Mutex<HashMap<(NaiveDate, u32), Option<PathBuf>>>,
    tools_checked: OnceLock<std::result::Result<(), String>>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::persistence(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::persistence(path, e))
}

impl Compiler {
    pub fn new(store: JournalStore, options: CompileOptions) -> Self {
        Compiler {
            store,
            options,
            annotated: Mutex::new(HashMap::new()),
            tools_checked: OnceLock::new(),
        }
    }

    pub fn output_dir(&self) -> &Path {
        &self.options.output_dir
    }

    fn report_path(&self, dir: &str, stem: &str) -> PathBuf {
        self.options
            .output_dir
            .join(dir)
            .join(format!("{stem}.{}", self.options.format.extension()))
    }

    fn preprocessed_stem(&self, entry: &JournalEntry) -> PathBuf {
        self.options
            .output_dir
            .join(PREPROCESSED_DIR)
            .join(day_dir_name(entry.date))
            .join(run_dir_name(entry.run))
    }

    fn check_tools(&self, transcoder: &Transcoder) -> Result<()> {
        self.tools_checked
            .get_or_init(|| transcoder.check().map_err(|e| e.to_string()))
            .clone()
            .map_err(Error::Media)
    }

    /// Writes the single-entry report and, when the entry has a readable
    /// video and a transcoder is configured, the annotated MP4. Returns the
    /// MP4 path if one was produced.
    pub fn preprocess(&self, entry: &JournalEntry) -> Result<(Option<PathBuf>, Vec<Warning>)> {
        let stem = self.preprocessed_stem(entry);
        let report = stem.with_extension(self.options.format.extension());
        write_file(&report, &report::render(&entry.label(), &[entry], self.options.format))?;
        let mut warnings = Vec::new();
        let video = self.annotated_video(entry, &mut warnings)?;
        Ok((video, warnings))
    }

    fn annotated_video(&self, entry: &JournalEntry, warnings: &mut Vec<Warning>) -> Result<Option<PathBuf>> {
        let (Some(transcoder), Some(name)) = (&self.options.transcoder, &entry.video_file) else {
            return Ok(None);
        };
        let key = (entry.date, entry.run);
        if let Some(done) = self.annotated.lock().unwrap().get(&key) {
            return Ok(done.clone());
        }
        let source = self.store.run_dir(entry.date, entry.run).join(name);
        let result = if !source.is_file() {
            warnings.push(Warning::new(&source, format!("{}: video file is missing", entry.label())));
            None
        } else {
            self.check_tools(transcoder)?;
            let output = self.preprocessed_stem(entry).with_extension("mp4");
            if let Some(parent) = output.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::persistence(parent, e))?;
            }
            match transcoder.annotate(&source, &output, &entry.label()) {
                Ok(()) => Some(output),
                Err(e) if e.is_fatal() => return Err(e.into()),
                Err(e) => {
                    warnings.push(Warning::new(&source, format!("{}: video skipped: {e}", entry.label())));
                    None
                }
            }
        };
        self.annotated.lock().unwrap().insert(key, result.clone());
        Ok(result)
    }

    /// Report plus concatenated video for `entries`, in the given order.
    fn compile_set(&self, entries: &[&JournalEntry], dir: &str, stem: &str, title: &str) -> Result<Compilation> {
        let mut out = Compilation {
            entries: entries.iter().map(|e| (e.date, e.run)).collect(),
            ..Compilation::default()
        };
        if entries.is_empty() {
            out.warnings.push(Warning::general(format!("{title}: no entries selected; nothing written")));
            return Ok(out);
        }
        let processed = entries
            .par_iter()
            .map(|e| self.preprocess(e))
            .collect::<Result<Vec<_>>>()?;

        let report = self.report_path(dir, stem);
        write_file(&report, &report::render(title, entries, self.options.format))?;
        out.report = Some(report);

        let mut clips = Vec::new();
        for (entry, (video, warnings)) in entries.iter().zip(processed) {
            out.warnings.extend(warnings);
            if let Some(video) = video {
                clips.push(video);
                out.video_entries.push((entry.date, entry.run));
            }
        }
        if let (Some(transcoder), false) = (&self.options.transcoder, clips.is_empty()) {
            let video = self.options.output_dir.join(dir).join(format!("{stem}.mp4"));
            match transcoder.concat(&clips, &video) {
                Ok(()) => out.video = Some(video),
                Err(e) if e.is_fatal() => return Err(e.into()),
                Err(e) => {
                    out.video_entries.clear();
                    out.warnings.push(Warning::new(&video, format!("{title}: video not compiled: {e}")));
                }
            }
        }
        Ok(out)
    }

    /// One compilation per day, or only `date` when given.
    pub fn compile_by_day(&self, date: Option<NaiveDate>) -> Result<Vec<Compilation>> {
        if let Some(date) = date {
            if !self.store.day_dir(date).is_dir() {
                return Err(Error::Input(format!("no journal directory for {date}")));
            }
        }
        let scan = self.store.scan()?;
        let mut by_day: Vec<(NaiveDate, Vec<&JournalEntry>)> = Vec::new();
        if let Some(date) = date {
            by_day.push((date, Vec::new()));
        } else {
            let (days, _) = self.store.list_days()?;
            by_day.extend(days.into_iter().map(|(d, _)| (d, Vec::new())));
        }
        for entry in &scan.entries {
            if let Some((_, list)) = by_day.iter_mut().find(|(d, _)| *d == entry.date) {
                list.push(entry);
            }
        }
        let mut out = Vec::new();
        for (i, (day, mut entries)) in by_day.into_iter().enumerate() {
            entries.sort_by_key(|e| e.run);
            let name = day_dir_name(day);
            let mut compilation = self.compile_set(&entries, CHRONOLOGICAL_DIR, &name, &name)?;
            if i == 0 {
                compilation.warnings.splice(0..0, scan.warnings.iter().cloned());
            }
            out.push(compilation);
        }
        Ok(out)
    }

    pub fn compile_day(&self, date: NaiveDate) -> Result<Compilation> {
        Ok(self.compile_by_day(Some(date))?.pop().unwrap_or_default())
    }

    /// Entries matching `query` across all days, chronologically. Query tags
    /// must be registered.
    pub fn compile_tags(&self, query: TagQuery) -> Result<Compilation> {
        let query = query.resolve(&self.store.load_tags()?)?;
        let scan = self.store.scan()?;
        let selected = query.select(&scan.entries);
        let title = format!("Tags ({}): {}", query.mode().to_string().to_uppercase(), query.tags().join(", "));
        let mut compilation = self.compile_set(&selected, TAGS_DIR, &query.slug(), &title)?;
        compilation.warnings.splice(0..0, scan.warnings);
        Ok(compilation)
    }

    pub fn heatmap(&self) -> Result<(Heatmap, Vec<Warning>)> {
        let scan = self.store.scan()?;
        let order = self.store.load_tags()?.names();
        let matrix = TagMatrix::from_entries(&scan.entries, &order);
        let svg = self.options.output_dir.join("heatmap.svg");
        let csv = self.options.output_dir.join("heatmap.csv");
        write_file(&svg, matrix.to_svg().as_bytes())?;
        write_file(&csv, matrix.to_csv().as_bytes())?;
        Ok((Heatmap { matrix, svg, csv }, scan.warnings))
    }
}
