use std::fmt;
use std::str::FromStr;

use crate::journal::{JournalEntry, TagRegistry};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TagMode {
    /// Every query tag must be present.
    And,
    /// At least one query tag must be present.
    Or,
}

impl fmt::Display for TagMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TagMode::And => "and",
            TagMode::Or => "or",
        })
    }
}

impl FromStr for TagMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "and" | "all" => Ok(TagMode::And),
            "or" | "any" => Ok(TagMode::Or),
            other => Err(Error::Input(format!("unknown tag mode `{other}` (expected and or or)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagQuery {
    tags: Vec<String>,
    mode: TagMode,
}

impl TagQuery {
    pub fn new(tags: Vec<String>, mode: TagMode) -> Result<Self> {
        if tags.is_empty() {
            return Err(Error::Validation("a tag query needs at least one tag".into()));
        }
        Ok(TagQuery { tags, mode })
    }

    /// Replaces the query tags with their registered spelling. Unknown tags
    /// are a validation error that lists the known ones.
    pub fn resolve(self, registry: &TagRegistry) -> Result<Self> {
        let tags = registry.resolve(&self.tags)?;
        TagQuery::new(tags, self.mode)
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn mode(&self) -> TagMode {
        self.mode
    }

    pub fn matches(&self, entry: &JournalEntry) -> bool {
        match self.mode {
            TagMode::And => self.tags.iter().all(|t| entry.has_tag(t)),
            TagMode::Or => self.tags.iter().any(|t| entry.has_tag(t)),
        }
    }

    /// Matching entries in chronological order.
    pub fn select<'a>(&self, entries: &'a [JournalEntry]) -> Vec<&'a JournalEntry> {
        let mut out: Vec<_> = entries.iter().filter(|e| self.matches(e)).collect();
        out.sort_by_key(|e| (e.date, e.run));
        out
    }

    /// File stem for this query's outputs, e.g. `and_feel-test_sandbox`.
    pub fn slug(&self) -> String {
        let mut parts = vec![self.mode.to_string()];
        parts.extend(self.tags.iter().map(|t| slugify(t)));
        parts.join("_")
    }
}

pub fn slugify(text: &str) -> String {
    let mut out = String::new();
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            out.push(c);
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    let trimmed = out.trim_matches('-');
    if trimmed.is_empty() {
        "tag".to_string()
    } else {
        trimmed.to_string()
    }
}
