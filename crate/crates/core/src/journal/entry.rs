use chrono::{DateTime, FixedOffset, NaiveDate};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::tags::TagRegistry;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryStatus {
    Complete,
    Abandoned,
}

impl EntryStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            EntryStatus::Complete => "complete",
            EntryStatus::Abandoned => "abandoned",
        }
    }
}

/// One pre/post reflection pair for a single recorded playtest run.
///
/// Serialized as `entry.json` inside `<root>/<date>/run_<N>/`. Fields this
/// version does not know about are kept in `extra` and written back unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub schema_version: u32,
    pub date: NaiveDate,
    pub run: u32,
    pub timestamp_pre: DateTime<FixedOffset>,
    #[serde(default)]
    pub timestamp_post: Option<DateTime<FixedOffset>>,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub pre_comment: String,
    #[serde(default)]
    pub post_comment: String,
    #[serde(default)]
    pub video_file: Option<String>,
    pub status: EntryStatus,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl JournalEntry {
    /// Checks the structural invariants. Tag membership is only checked when
    /// a registry is supplied.
    pub fn problems(&self, registry: Option<&TagRegistry>) -> Vec<String> {
        let mut problems = Vec::new();
        if self.run == 0 {
            problems.push("run must be >= 1".to_string());
        }
        if self.timestamp_pre.date_naive() != self.date {
            problems.push(format!(
                "timestamp_pre {} does not fall on entry date {}",
                self.timestamp_pre, self.date
            ));
        }
        if let Some(post) = self.timestamp_post {
            if post < self.timestamp_pre {
                problems.push(format!(
                    "timestamp_post {post} precedes timestamp_pre {}",
                    self.timestamp_pre
                ));
            }
        }
        if self.status == EntryStatus::Complete && self.timestamp_post.is_none() {
            problems.push("complete entry is missing timestamp_post".to_string());
        }
        if let Some(registry) = registry {
            for tag in &self.tags {
                if !registry.contains_exact(tag) {
                    problems.push(format!("tag {tag:?} is not in the tag registry"));
                }
            }
        }
        if let Some(video) = &self.video_file {
            if video.is_empty() || video.contains(['/', '\\']) || video == "." || video == ".." {
                problems.push(format!("video_file {video:?} is not a plain file name"));
            }
        }
        problems
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.iter().any(|t| t == tag)
    }

    pub fn label(&self) -> String {
        format!("{}  run {}", self.date, self.run)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn at(h: u32, m: u32) -> DateTime<FixedOffset> {
        FixedOffset::east_opt(2 * 3600)
            .unwrap()
            .with_ymd_and_hms(2025, 4, 30, h, m, 0)
            .unwrap()
    }

    fn entry() -> JournalEntry {
        JournalEntry {
            schema_version: SCHEMA_VERSION,
            date: NaiveDate::from_ymd_opt(2025, 4, 30).unwrap(),
            run: 1,
            timestamp_pre: at(10, 0),
            timestamp_post: Some(at(10, 5)),
            tags: vec!["Feel Test".into()],
            pre_comment: "pre".into(),
            post_comment: "post".into(),
            video_file: Some("clip.mkv".into()),
            status: EntryStatus::Complete,
            extra: Map::new(),
        }
    }

    #[test]
    fn valid_entry_has_no_problems() {
        assert!(entry().problems(None).is_empty());
    }

    #[test]
    fn post_before_pre_is_reported() {
        let mut e = entry();
        e.timestamp_post = Some(at(9, 0));
        assert_eq!(e.problems(None).len(), 1);
    }

    #[test]
    fn complete_requires_post_timestamp() {
        let mut e = entry();
        e.timestamp_post = None;
        assert!(e.problems(None)[0].contains("timestamp_post"));
        e.status = EntryStatus::Abandoned;
        assert!(e.problems(None).is_empty());
    }

    #[test]
    fn date_mismatch_and_zero_run() {
        let mut e = entry();
        e.run = 0;
        e.date = NaiveDate::from_ymd_opt(2025, 5, 1).unwrap();
        assert_eq!(e.problems(None).len(), 2);
    }

    #[test]
    fn unknown_tag_flagged_against_registry() {
        let registry = TagRegistry::default();
        assert_eq!(entry().problems(Some(&registry)).len(), 1);
    }

    #[test]
    fn unknown_fields_survive_round_trip() {
        let mut value = serde_json::to_value(entry()).unwrap();
        value["engine"] = Value::String("godot".into());
        let parsed: JournalEntry = serde_json::from_value(value.clone()).unwrap();
        assert_eq!(parsed.extra["engine"], "godot");
        assert_eq!(serde_json::to_value(&parsed).unwrap(), value);
    }

    #[test]
    fn field_names_are_fixed() {
        let value = serde_json::to_value(entry()).unwrap();
        let mut keys: Vec<_> = value.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "date",
                "post_comment",
                "pre_comment",
                "run",
                "schema_version",
                "status",
                "tags",
                "timestamp_post",
                "timestamp_pre",
                "video_file"
            ]
        );
        assert_eq!(value["timestamp_pre"], "2025-04-30T10:00:00+02:00");
    }
}
