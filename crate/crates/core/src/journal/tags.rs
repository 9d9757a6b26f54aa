use std::fs;
use std::path::Path;

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TAGS_FILE: &str = "tags.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tag {
    pub name: String,
    pub created_at: DateTime<FixedOffset>,
}

/// Designer-created tags in creation order. Names are unique ignoring case;
/// the first spelling registered is the canonical one.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TagRegistry {
    tags: Vec<Tag>,
}

fn fold(name: &str) -> String {
    name.to_lowercase()
}

impl TagRegistry {
    pub fn load(path: &Path) -> Result<Self> {
        match fs::read(path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|source| Error::Json {
                path: path.to_path_buf(),
                source,
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(Error::persistence(path, e)),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec_pretty(self).expect("tag registry serializes");
        super::store::write_atomic(path, &json)
    }

    /// Adds `name` unless a tag with the same case-folded name exists.
    /// Returns the canonical name and whether a new tag was created.
    pub fn register(&mut self, name: &str, now: DateTime<FixedOffset>) -> Result<(String, bool)> {
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::Validation("tag name must not be empty".into()));
        }
        if let Some(existing) = self.canonical(name) {
            return Ok((existing.to_string(), false));
        }
        self.tags.push(Tag {
            name: name.to_string(),
            created_at: now,
        });
        Ok((name.to_string(), true))
    }

    pub fn canonical(&self, name: &str) -> Option<&str> {
        let folded = fold(name.trim());
        self.tags
            .iter()
            .find(|t| fold(&t.name) == folded)
            .map(|t| t.name.as_str())
    }

    pub fn contains_exact(&self, name: &str) -> bool {
        self.tags.iter().any(|t| t.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.tags.iter().map(|t| t.name.clone()).collect()
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    /// Names that collide case-insensitively with an earlier tag.
    pub fn duplicates(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        self.tags
            .iter()
            .filter(|t| !seen.insert(fold(&t.name)))
            .map(|t| t.name.clone())
            .collect()
    }

    /// Maps each requested name onto its canonical spelling, or reports
    /// every unknown one together with the known tags.
    pub fn resolve(&self, names: &[String]) -> Result<Vec<String>> {
        let mut resolved = Vec::with_capacity(names.len());
        let mut unknown = Vec::new();
        for name in names {
            match self.canonical(name) {
                Some(c) => {
                    if !resolved.iter().any(|r| r == c) {
                        resolved.push(c.to_string());
                    }
                }
                None => unknown.push(name.clone()),
            }
        }
        if unknown.is_empty() {
            Ok(resolved)
        } else {
            Err(Error::Validation(format!(
                "unknown tag(s) {}; known tags: [{}]",
                unknown
                    .iter()
                    .map(|u| format!("{u:?}"))
                    .collect::<Vec<_>>()
                    .join(", "),
                self.names().join(", ")
            )))
        }
    }
}
