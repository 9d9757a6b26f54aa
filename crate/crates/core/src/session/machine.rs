//! The capture loop as a pure transition function.
//!
//! ```text
//! Idle --BeginPreTest--> PreTest --SubmitPreTest/StartRecord--> Recording
//!   ^                      |                                       |
//!   +--------Skip----------+                          EndTest/StopRecord
//!   |                                                              v
//!   +---------------SubmitPostTest/FinalizeEntry---------------- PostTest
//! ```
//!
//! `ClientDisconnected` in Recording or PostTest finalizes the draft as
//! abandoned (stopping the recording first if needed).

use chrono::{DateTime, FixedOffset, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::journal::{EntryStatus, JournalEntry, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    PreTest,
    Recording,
    PostTest,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Idle => "idle",
            Phase::PreTest => "pre_test",
            Phase::Recording => "recording",
            Phase::PostTest => "post_test",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Draft {
    pub pre_comment: String,
    pub tags: Vec<String>,
    pub timestamp_pre: Option<DateTime<FixedOffset>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub phase: Phase,
    pub draft: Option<Draft>,
    pub recording_started_at: Option<DateTime<FixedOffset>>,
}

impl Default for SessionState {
    fn default() -> Self {
        Self::idle()
    }
}

impl SessionState {
    pub fn idle() -> Self {
        SessionState {
            phase: Phase::Idle,
            draft: None,
            recording_started_at: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionEvent {
    BeginPreTest,
    SubmitPreTest { pre_comment: String, tags: Vec<String> },
    Skip,
    LoadPrevious,
    EndTest,
    /// `tags` replaces the pre-test tag set.
    SubmitPostTest { post_comment: String, tags: Vec<String> },
    ClientDisconnected,
}

impl SessionEvent {
    pub fn name(&self) -> &'static str {
        match self {
            SessionEvent::BeginPreTest => "BeginPreTest",
            SessionEvent::SubmitPreTest { .. } => "SubmitPreTest",
            SessionEvent::Skip => "Skip",
            SessionEvent::LoadPrevious => "LoadPrevious",
            SessionEvent::EndTest => "EndTest",
            SessionEvent::SubmitPostTest { .. } => "SubmitPostTest",
            SessionEvent::ClientDisconnected => "ClientDisconnected",
        }
    }
}

/// Everything needed to write an entry except its run number and video,
/// which are assigned at persistence time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingEntry {
    pub timestamp_pre: DateTime<FixedOffset>,
    pub timestamp_post: Option<DateTime<FixedOffset>>,
    pub tags: Vec<String>,
    pub pre_comment: String,
    pub post_comment: String,
    pub status: EntryStatus,
}

impl PendingEntry {
    pub fn date(&self) -> NaiveDate {
        self.timestamp_pre.date_naive()
    }

    pub fn into_entry(self) -> JournalEntry {
        JournalEntry {
            schema_version: SCHEMA_VERSION,
            date: self.date(),
            run: 0,
            timestamp_pre: self.timestamp_pre,
            timestamp_post: self.timestamp_post,
            tags: self.tags,
            pre_comment: self.pre_comment,
            post_comment: self.post_comment,
            video_file: None,
            status: self.status,
            extra: Default::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Effect {
    StartRecord,
    StopRecord,
    LoadPrevious,
    FinalizeEntry(PendingEntry),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub state: SessionState,
    pub effects: Vec<Effect>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("{event} is not allowed in phase {phase}")]
pub struct IllegalTransition {
    pub phase: Phase,
    pub event: &'static str,
}

fn submitted_draft(state: &SessionState, now: DateTime<FixedOffset>) -> (Draft, DateTime<FixedOffset>) {
    let draft = state.draft.clone().unwrap_or_default();
    let pre = draft.timestamp_pre.unwrap_or(now);
    (draft, pre)
}

/// Deterministic in `(state, event, now)`; `now` stamps submissions.
pub fn transition(
    state: &SessionState,
    event: &SessionEvent,
    now: DateTime<FixedOffset>,
) -> Result<Transition, IllegalTransition> {
    use Phase::*;
    use SessionEvent as E;

    let stay = |effects| Transition {
        state: state.clone(),
        effects,
    };
    let idle = |effects| Transition {
        state: SessionState::idle(),
        effects,
    };

    let next = match (state.phase, event) {
        (Idle, E::BeginPreTest) => Transition {
            state: SessionState {
                phase: PreTest,
                draft: Some(Draft::default()),
                recording_started_at: None,
            },
            effects: vec![],
        },
        (Idle | PreTest, E::LoadPrevious) => stay(vec![Effect::LoadPrevious]),
        (PreTest, E::SubmitPreTest { pre_comment, tags }) => Transition {
            state: SessionState {
                phase: Recording,
                draft: Some(Draft {
                    pre_comment: pre_comment.clone(),
                    tags: tags.clone(),
                    timestamp_pre: Some(now),
                }),
                recording_started_at: Some(now),
            },
            effects: vec![Effect::StartRecord],
        },
        (PreTest, E::Skip) => idle(vec![]),
        (Recording, E::EndTest) => Transition {
            state: SessionState {
                phase: PostTest,
                ..state.clone()
            },
            effects: vec![Effect::StopRecord],
        },
        (PostTest, E::SubmitPostTest { post_comment, tags }) => {
            let (draft, pre) = submitted_draft(state, now);
            idle(vec![Effect::FinalizeEntry(PendingEntry {
                timestamp_pre: pre,
                timestamp_post: Some(now.max(pre)),
                tags: tags.clone(),
                pre_comment: draft.pre_comment,
                post_comment: post_comment.clone(),
                status: EntryStatus::Complete,
            })])
        }
        (Recording | PostTest, E::ClientDisconnected) => {
            let (draft, pre) = submitted_draft(state, now);
            let abandoned = Effect::FinalizeEntry(PendingEntry {
                timestamp_pre: pre,
                timestamp_post: None,
                tags: draft.tags,
                pre_comment: draft.pre_comment,
                post_comment: String::new(),
                status: EntryStatus::Abandoned,
            });
            if state.phase == Recording {
                idle(vec![Effect::StopRecord, abandoned])
            } else {
                idle(vec![abandoned])
            }
        }
        (Idle | PreTest, E::ClientDisconnected) => stay(vec![]),
        (phase, event) => {
            return Err(IllegalTransition {
                phase,
                event: event.name(),
            })
        }
    };
    Ok(next)
}

/// The abandoned entry written when a recorder failure aborts a loop whose
/// pre-test reflection has already been submitted.
pub fn abandon(state: &SessionState, now: DateTime<FixedOffset>) -> Option<PendingEntry> {
    let draft = state.draft.as_ref()?;
    Some(PendingEntry {
        timestamp_pre: draft.timestamp_pre.unwrap_or(now),
        timestamp_post: None,
        tags: draft.tags.clone(),
        pre_comment: draft.pre_comment.clone(),
        post_comment: String::new(),
        status: EntryStatus::Abandoned,
    })
}
