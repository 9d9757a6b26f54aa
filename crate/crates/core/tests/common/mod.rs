#![allow(dead_code)]

pub mod oracle;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Duration as ChronoDuration, FixedOffset, NaiveDate, TimeZone};
use rand::Rng;
use rda_core::journal::{EntryStatus, JournalEntry, JournalStore, SCHEMA_VERSION};
use rda_core::obs::mock::{MockObsConfig, MockObsServer};
use rda_core::obs::{ObsOptions, ObsRecorder};
use rda_core::session::{Clock, Phase, SessionEngine, SessionEvent, SessionHandle};

pub fn tz() -> FixedOffset {
    FixedOffset::east_opt(2 * 3600).unwrap()
}

/// Starts at `start` and advances one second per reading.
pub fn ticking_clock(start: DateTime<FixedOffset>) -> Clock {
    let base = start.timestamp();
    let offset = *start.offset();
    let tick = Arc::new(AtomicI64::new(0));
    Arc::new(move || {
        let n = tick.fetch_add(1, Ordering::Relaxed);
        offset.timestamp_opt(base + n, 0).unwrap()
    })
}

pub fn day_start(date: NaiveDate) -> DateTime<FixedOffset> {
    tz().from_local_datetime(&date.and_hms_opt(9, 0, 0).unwrap()).unwrap()
}

/// Every file below `root` (relative path → bytes), skipping `exclude`.
pub fn file_tree(root: &Path, exclude: Option<&Path>) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(dir: &Path, root: &Path, exclude: Option<&Path>, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        let Ok(read) = std::fs::read_dir(dir) else { return };
        for item in read.flatten() {
            let path = item.path();
            if Some(path.as_path()) == exclude {
                continue;
            }
            if path.is_dir() {
                out.insert(path.strip_prefix(root).unwrap().join(""), Vec::new());
                walk(&path, root, exclude, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, exclude, &mut out);
    out
}

pub fn files_named(root: &Path, pred: impl Fn(&str) -> bool) -> Vec<PathBuf> {
    file_tree(root, None)
        .into_keys()
        .filter(|p| p.file_name().map(|n| pred(&n.to_string_lossy())).unwrap_or(false))
        .filter(|p| !p.to_string_lossy().ends_with('/'))
        .collect()
}

pub struct Rig {
    pub dir: tempfile::TempDir,
    pub store: JournalStore,
    pub obs: MockObsServer,
    pub session: SessionHandle,
}

impl Rig {
    pub fn journal_root(&self) -> PathBuf {
        self.store.root().to_path_buf()
    }
}

/// Mock OBS + session engine over a fresh store with tags A, B, C.
pub async fn rig(clock_start: DateTime<FixedOffset>) -> Rig {
    rig_with(clock_start, |_| {}).await
}

pub async fn rig_with(clock_start: DateTime<FixedOffset>, configure: impl FnOnce(&mut MockObsConfig)) -> Rig {
    let dir = tempfile::tempdir().unwrap();
    let store = JournalStore::init(dir.path().join("journal")).unwrap();
    let mut tags = store.load_tags().unwrap();
    for t in ["A", "B", "C"] {
        tags.register(t, clock_start).unwrap();
    }
    store.save_tags(&tags).unwrap();
    let mut cfg = MockObsConfig::new(dir.path().join("obs-output"));
    configure(&mut cfg);
    let obs = MockObsServer::start(cfg).await.unwrap();
    let recorder = ObsRecorder::new(
        ObsOptions {
            url: obs.url(),
            password: None,
            timeout: Duration::from_secs(2),
        },
        None,
    );
    let (session, _task) = SessionEngine::spawn(store.clone(), recorder, ticking_clock(clock_start)).unwrap();
    Rig { dir, store, obs, session }
}

pub fn submit_pre(comment: &str, tags: &[&str]) -> SessionEvent {
    SessionEvent::SubmitPreTest {
        pre_comment: comment.to_string(),
        tags: tags.iter().map(|t| t.to_string()).collect(),
    }
}

pub fn submit_post(comment: &str, tags: &[&str]) -> SessionEvent {
    SessionEvent::SubmitPostTest {
        post_comment: comment.to_string(),
        tags: tags.iter().map(|t| t.to_string()).collect(),
    }
}

/// A random event that is legal in `phase`.
pub fn legal_event(rng: &mut impl Rng, phase: Phase) -> SessionEvent {
    let tags = ["A", "B", "C"];
    let pick_tags = |rng: &mut dyn rand::RngCore| -> Vec<String> {
        tags.iter().filter(|_| rng.gen_bool(0.5)).map(|t| t.to_string()).collect()
    };
    match phase {
        Phase::Idle => match rng.gen_range(0..3) {
            0 => SessionEvent::LoadPrevious,
            1 => SessionEvent::ClientDisconnected,
            _ => SessionEvent::BeginPreTest,
        },
        Phase::PreTest => match rng.gen_range(0..5) {
            0 => SessionEvent::Skip,
            1 => SessionEvent::LoadPrevious,
            _ => SessionEvent::SubmitPreTest {
                pre_comment: format!("expectation {}", rng.gen::<u16>()),
                tags: pick_tags(rng),
            },
        },
        Phase::Recording => match rng.gen_range(0..4) {
            0 => SessionEvent::ClientDisconnected,
            _ => SessionEvent::EndTest,
        },
        Phase::PostTest => match rng.gen_range(0..4) {
            0 => SessionEvent::ClientDisconnected,
            _ => SessionEvent::SubmitPostTest {
                post_comment: format!("observation {}", rng.gen::<u16>()),
                tags: pick_tags(rng),
            },
        },
    }
}

pub const TAG_POOL: [&str; 8] = [
    "Feature Test",
    "Feel Test",
    "Sandbox",
    "Bugfix",
    "Level Design",
    "Audio",
    "UI",
    "Performance",
];

/// Writes a synthetic corpus straight through the store: `days` day
/// directories, `total` entries spread as evenly as possible, random tags
/// drawn from `TAG_POOL`, every `video_every`-th entry with a small video.
pub fn generate_corpus(
    store: &JournalStore,
    rng: &mut impl Rng,
    days: usize,
    total: usize,
    abandoned: usize,
    video_every: Option<usize>,
) -> Vec<JournalEntry> {
    let mut registry = store.load_tags().unwrap();
    let first_day = NaiveDate::from_ymd_opt(2025, 4, 30).unwrap();
    for t in TAG_POOL {
        registry.register(t, day_start(first_day)).unwrap();
    }
    store.save_tags(&registry).unwrap();

    let staging = store.root().parent().unwrap().join("staging");
    std::fs::create_dir_all(&staging).unwrap();
    let mut written = Vec::new();
    for i in 0..total {
        let day = i * days / total;
        let date = first_day + ChronoDuration::days(day as i64 * 2);
        let pre = day_start(date) + ChronoDuration::seconds(i as i64 * 30);
        let tags: Vec<String> = TAG_POOL
            .iter()
            .filter(|_| rng.gen_bool(0.3))
            .map(|t| t.to_string())
            .collect();
        let status = if i < abandoned { EntryStatus::Abandoned } else { EntryStatus::Complete };
        let mut entry = JournalEntry {
            schema_version: SCHEMA_VERSION,
            date,
            run: 0,
            timestamp_pre: pre,
            timestamp_post: (status == EntryStatus::Complete).then(|| pre + ChronoDuration::seconds(90)),
            tags,
            pre_comment: format!("Entry {i}: trying the new movement (expect 'slippery')"),
            post_comment: if status == EntryStatus::Complete { format!("Entry {i}: felt fine") } else { String::new() },
            video_file: None,
            status,
            extra: Default::default(),
        };
        let video = video_every.filter(|n| i % n == 0).map(|_| {
            let path = staging.join(format!("{i}.mkv"));
            std::fs::write(&path, format!("video {i}")).unwrap();
            path
        });
        store.record(&mut entry, video.as_deref()).unwrap();
        written.push(entry);
    }
    written
}

/// Brute-force tag selection used as the compiler oracle.
pub fn brute_force_select(entries: &[JournalEntry], tags: &[&str], all: bool) -> Vec<(NaiveDate, u32)> {
    let mut out = Vec::new();
    for e in entries {
        let mut hits = 0;
        for t in tags {
            for et in &e.tags {
                if et == t {
                    hits += 1;
                    break;
                }
            }
        }
        let keep = if all { hits == tags.len() } else { hits > 0 };
        if keep {
            out.push((e.date, e.run));
        }
    }
    out.sort();
    out
}

/// Independent co-occurrence recount: for each ordered tag pair, count
/// entries by direct enumeration.
pub fn brute_force_counts(entries: &[JournalEntry], tags: &[String]) -> Vec<Vec<u64>> {
    tags.iter()
        .map(|a| {
            tags.iter()
                .map(|b| entries.iter().filter(|e| e.tags.contains(a) && e.tags.contains(b)).count() as u64)
                .collect()
        })
        .collect()
}

/// Shell scripts that stand in for ffmpeg/ffprobe: each call appends its
/// argv to `calls.log`; the transcoder touches its output (last argument)
/// and fails on any input path containing `corrupt`.
pub struct FakeTranscoder {
    pub transcoder: PathBuf,
    pub probe: PathBuf,
    pub log: PathBuf,
}

pub fn fake_transcoder(dir: &Path) -> FakeTranscoder {
    use std::os::unix::fs::PermissionsExt;
    std::fs::create_dir_all(dir).unwrap();
    let log = dir.join("calls.log");
    let transcoder = dir.join("fake-ffmpeg");
    let probe = dir.join("fake-ffprobe");
    std::fs::write(
        &transcoder,
        format!(
            "#!/bin/sh\necho \"ffmpeg $*\" >> '{}'\ncase \"$*\" in *corrupt*) echo 'invalid data' >&2; exit 1;; esac\nfor last; do :; done\necho fake-mp4 > \"$last\"\n",
            log.display()
        ),
    )
    .unwrap();
    std::fs::write(
        &probe,
        format!(
            "#!/bin/sh\necho \"ffprobe $*\" >> '{}'\necho '{{\"streams\":[{{\"codec_type\":\"video\",\"width\":1280,\"height\":720}},{{\"codec_type\":\"audio\"}}],\"format\":{{\"duration\":\"2.0\"}}}}'\n",
            log.display()
        ),
    )
    .unwrap();
    for p in [&transcoder, &probe] {
        std::fs::set_permissions(p, std::fs::Permissions::from_mode(0o755)).unwrap();
    }
    FakeTranscoder { transcoder, probe, log }
}

/// Lines of the fake transcoder log that are transcoder calls (not probes
/// or version checks).
pub fn transcoder_calls(log: &Path) -> Vec<String> {
    std::fs::read_to_string(log)
        .unwrap_or_default()
        .lines()
        .filter(|l| l.starts_with("ffmpeg ") && !l.ends_with("-version"))
        .map(str::to_string)
        .collect()
}

/// Stores one hand-written entry on `date`; `video` is (file name, bytes).
pub fn write_entry(
    store: &JournalStore,
    date: NaiveDate,
    tags: &[&str],
    pre: &str,
    post: &str,
    video: Option<(&str, &[u8])>,
) -> JournalEntry {
    let staging = store.root().parent().unwrap().join("staging");
    std::fs::create_dir_all(&staging).unwrap();
    let pre_at = day_start(date);
    let mut entry = JournalEntry {
        schema_version: SCHEMA_VERSION,
        date,
        run: 0,
        timestamp_pre: pre_at,
        timestamp_post: Some(pre_at + ChronoDuration::seconds(120)),
        tags: tags.iter().map(|t| t.to_string()).collect(),
        pre_comment: pre.to_string(),
        post_comment: post.to_string(),
        video_file: None,
        status: EntryStatus::Complete,
        extra: Default::default(),
    };
    let video = video.map(|(name, bytes)| {
        let path = staging.join(name);
        std::fs::write(&path, bytes).unwrap();
        path
    });
    store.record(&mut entry, video.as_deref()).unwrap();
    entry
}

/// Registers `tags` in the store's tag registry.
pub fn register_tags(store: &JournalStore, tags: &[&str]) {
    let mut registry = store.load_tags().unwrap();
    for t in tags {
        registry.register(t, day_start(NaiveDate::from_ymd_opt(2025, 1, 1).unwrap())).unwrap();
    }
    store.save_tags(&registry).unwrap();
}

fn pdf_literal(bytes: &[u8]) -> (String, usize) {
    let mut out = String::new();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => {
                i += 1;
                out.push(bytes[i] as char);
            }
            b')' => return (out, i + 1),
            b => out.push(b as char),
        }
        i += 1;
    }
    panic!("unterminated PDF string");
}

/// Every string shown with `Tj`, in content order. Bytes are read as
/// Latin-1, which agrees with WinAnsi outside 0x80..0x9f.
pub fn pdf_text(pdf: &[u8]) -> Vec<String> {
    let mut out = Vec::new();
    let mut i = 0;
    while let Some(pos) = find(&pdf[i..], b"Td (") {
        let start = i + pos + 4;
        let (text, len) = pdf_literal(&pdf[start..]);
        assert!(pdf[start + len..].starts_with(b" Tj"));
        out.push(text);
        i = start + len;
    }
    out
}

/// Bookmark titles, in order.
pub fn pdf_outline(pdf: &[u8]) -> Vec<String> {
    let mut out = Vec::new();
    let mut i = 0;
    while let Some(pos) = find(&pdf[i..], b"/Title (") {
        let start = i + pos + 8;
        let (text, len) = pdf_literal(&pdf[start..]);
        if pdf[start + len..].starts_with(b" /Parent") {
            out.push(text);
        }
        i = start + len;
    }
    out
}

pub fn pdf_page_count(pdf: &[u8]) -> usize {
    let mut n = 0;
    let mut i = 0;
    while let Some(pos) = find(&pdf[i..], b"/Type /Page ") {
        n += 1;
        i += pos + 1;
    }
    n
}

fn find(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}
