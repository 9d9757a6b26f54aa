use std::future::Future;
use std::path::PathBuf;
use std::sync::Arc;

use chrono::{DateTime, FixedOffset, Local, Timelike};
use serde::Serialize;
use tokio::sync::{broadcast, mpsc, oneshot, watch};
use tokio::task::JoinHandle;

use super::machine::{abandon, transition, Effect, IllegalTransition, PendingEntry, SessionEvent, SessionState};
use crate::error::Error;
use crate::journal::{JournalEntry, JournalStore, TagRegistry};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct RecorderError(pub String);

/// Whatever starts and stops the screen recording. `stop_record` yields the
/// recorded file, if the recorder reported one.
pub trait Recorder: Send + Sync + 'static {
    fn start_record(&self) -> impl Future<Output = Result<(), RecorderError>> + Send;
    fn stop_record(&self) -> impl Future<Output = Result<Option<PathBuf>, RecorderError>> + Send;
}

pub type Clock = Arc<dyn Fn() -> DateTime<FixedOffset> + Send + Sync>;

/// Local wall-clock time with its UTC offset, truncated to whole seconds.
pub fn local_clock() -> Clock {
    Arc::new(|| {
        let now = Local::now().fixed_offset();
        now.with_nanosecond(0).unwrap_or(now)
    })
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Illegal(#[from] IllegalTransition),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("recorder failed: {0}")]
    Recorder(String),
    #[error(transparent)]
    Store(#[from] Error),
    #[error("session engine has stopped")]
    Stopped,
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::Illegal(_) => "illegal_transition",
            SessionError::Validation(_) => "validation",
            SessionError::Recorder(_) => "recorder",
            SessionError::Store(_) => "persistence",
            SessionError::Stopped => "stopped",
        }
    }
}

/// Who asked for a change; lets the bridge route acknowledgements.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Origin {
    pub client: Option<u64>,
    pub seq: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PreviousEntry {
    pub date: chrono::NaiveDate,
    pub run: u32,
    pub pre_comment: String,
    pub tags: Vec<String>,
}

impl From<JournalEntry> for PreviousEntry {
    fn from(e: JournalEntry) -> Self {
        PreviousEntry {
            date: e.date,
            run: e.run,
            pre_comment: e.pre_comment,
            tags: e.tags,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub state: SessionState,
    pub previous: Option<PreviousEntry>,
    pub persisted: Option<PathBuf>,
}

/// Published in engine order after every applied change.
#[derive(Debug, Clone)]
pub enum Notice {
    State {
        state: SessionState,
        origin: Origin,
        cause: &'static str,
    },
    Tags {
        tags: Vec<String>,
        origin: Origin,
    },
}

enum Command {
    Event {
        event: SessionEvent,
        origin: Origin,
        reply: oneshot::Sender<Result<Outcome, SessionError>>,
    },
    CreateTag {
        name: String,
        origin: Origin,
        reply: oneshot::Sender<Result<String, SessionError>>,
    },
    Tags {
        reply: oneshot::Sender<Vec<String>>,
    },
}

/// Cheap, cloneable front door to the engine's command queue.
#[derive(Clone)]
pub struct SessionHandle {
    commands: mpsc::Sender<Command>,
    notices: broadcast::Sender<Notice>,
    snapshot: watch::Receiver<SessionState>,
}

impl SessionHandle {
    pub async fn send(&self, event: SessionEvent, origin: Origin) -> Result<Outcome, SessionError> {
        let (reply, rx) = oneshot::channel();
        self.commands
            .send(Command::Event { event, origin, reply })
            .await
            .map_err(|_| SessionError::Stopped)?;
        rx.await.map_err(|_| SessionError::Stopped)?
    }

    pub async fn create_tag(&self, name: &str, origin: Origin) -> Result<String, SessionError> {
        let (reply, rx) = oneshot::channel();
        self.commands
            .send(Command::CreateTag {
                name: name.to_string(),
                origin,
                reply,
            })
            .await
            .map_err(|_| SessionError::Stopped)?;
        rx.await.map_err(|_| SessionError::Stopped)?
    }

    pub async fn tags(&self) -> Result<Vec<String>, SessionError> {
        let (reply, rx) = oneshot::channel();
        self.commands
            .send(Command::Tags { reply })
            .await
            .map_err(|_| SessionError::Stopped)?;
        rx.await.map_err(|_| SessionError::Stopped)
    }

    pub fn state(&self) -> SessionState {
        self.snapshot.borrow().clone()
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Notice> {
        self.notices.subscribe()
    }
}

/// Owns the session state, the tag registry and the recorder. Commands are
/// applied one at a time; every effect of an event completes before the
/// next command is read.
pub struct SessionEngine<R> {
    state: SessionState,
    store: JournalStore,
    tags: TagRegistry,
    recorder: R,
    clock: Clock,
    pending_video: Option<PathBuf>,
    notices: broadcast::Sender<Notice>,
    snapshot: watch::Sender<SessionState>,
}

impl<R: Recorder> SessionEngine<R> {
    pub fn spawn(store: JournalStore, recorder: R, clock: Clock) -> Result<(SessionHandle, JoinHandle<()>), Error> {
        let tags = store.load_tags()?;
        let (commands, mut rx) = mpsc::channel(64);
        let (notices, _) = broadcast::channel(256);
        let (snapshot, snapshot_rx) = watch::channel(SessionState::idle());
        let mut engine = SessionEngine {
            state: SessionState::idle(),
            store,
            tags,
            recorder,
            clock,
            pending_video: None,
            notices: notices.clone(),
            snapshot,
        };
        let task = tokio::spawn(async move {
            while let Some(command) = rx.recv().await {
                engine.apply(command).await;
            }
        });
        Ok((
            SessionHandle {
                commands,
                notices,
                snapshot: snapshot_rx,
            },
            task,
        ))
    }

    async fn apply(&mut self, command: Command) {
        match command {
            Command::Event { event, origin, reply } => {
                let result = self.handle_event(event, origin).await;
                let _ = reply.send(result);
            }
            Command::CreateTag { name, origin, reply } => {
                let _ = reply.send(self.create_tag(&name, origin));
            }
            Command::Tags { reply } => {
                let _ = reply.send(self.tags.names());
            }
        }
    }

    fn create_tag(&mut self, name: &str, origin: Origin) -> Result<String, SessionError> {
        let mut updated = self.tags.clone();
        let (canonical, added) = updated
            .register(name, (self.clock)())
            .map_err(|e| SessionError::Validation(e.to_string()))?;
        if added {
            self.store.save_tags(&updated)?;
            self.tags = updated;
        }
        let _ = self.notices.send(Notice::Tags {
            tags: self.tags.names(),
            origin,
        });
        Ok(canonical)
    }

    fn canonical_tags(&self, tags: &[String]) -> Result<Vec<String>, SessionError> {
        self.tags
            .resolve(tags)
            .map_err(|e| SessionError::Validation(e.to_string()))
    }

    fn commit(&mut self, state: SessionState, origin: Origin, cause: &'static str) {
        self.state = state.clone();
        self.snapshot.send_replace(state.clone());
        let _ = self.notices.send(Notice::State { state, origin, cause });
    }

    fn finalize(&mut self, pending: PendingEntry) -> Result<PathBuf, Error> {
        let mut entry = pending.into_entry();
        let video = self.pending_video.take();
        match self.store.record(&mut entry, video.as_deref()) {
            Ok(persisted) => {
                tracing::info!(
                    "saved {} run {} ({})",
                    entry.date,
                    entry.run,
                    entry.status.as_str()
                );
                Ok(persisted.entry_path)
            }
            Err(e) => {
                self.pending_video = video;
                Err(e)
            }
        }
    }

    /// Recorder failure while a draft is live: keep the reflection as an
    /// abandoned entry and return to Idle.
    fn fall_back(&mut self, draft_state: &SessionState, origin: Origin, cause: &'static str, error: RecorderError) -> SessionError {
        tracing::error!("{cause}: recorder failed: {error}");
        if let Some(pending) = abandon(draft_state, (self.clock)()) {
            if let Err(e) = self.finalize(pending) {
                tracing::error!("could not save abandoned draft: {e}");
            }
        }
        self.pending_video = None;
        self.commit(SessionState::idle(), origin, cause);
        SessionError::Recorder(format!("{error}; the draft was saved as abandoned"))
    }

    async fn handle_event(&mut self, mut event: SessionEvent, origin: Origin) -> Result<Outcome, SessionError> {
        match &mut event {
            SessionEvent::SubmitPreTest { tags, .. } | SessionEvent::SubmitPostTest { tags, .. } => {
                *tags = self.canonical_tags(tags)?;
            }
            _ => {}
        }
        let cause = event.name();
        let now = (self.clock)();
        let next = transition(&self.state, &event, now)?;
        let recovering = matches!(event, SessionEvent::ClientDisconnected);
        let mut outcome = Outcome::default();

        for effect in next.effects {
            match effect {
                Effect::StartRecord => {
                    if let Err(e) = self.recorder.start_record().await {
                        return Err(self.fall_back(&next.state, origin, cause, e));
                    }
                }
                Effect::StopRecord => match self.recorder.stop_record().await {
                    Ok(path) => {
                        if path.is_none() {
                            tracing::warn!("recorder did not report an output file");
                        }
                        self.pending_video = path;
                    }
                    Err(e) if recovering => {
                        tracing::warn!("could not stop recording during recovery: {e}; stop OBS manually");
                    }
                    Err(e) => {
                        let draft_state = self.state.clone();
                        return Err(self.fall_back(&draft_state, origin, cause, e));
                    }
                },
                Effect::LoadPrevious => {
                    outcome.previous = self.store.latest_entry()?.map(PreviousEntry::from);
                }
                Effect::FinalizeEntry(pending) => match self.finalize(pending) {
                    Ok(path) => outcome.persisted = Some(path),
                    Err(e) if recovering => {
                        tracing::error!("could not save abandoned entry: {e}");
                        self.pending_video = None;
                        self.commit(next.state, origin, cause);
                        return Err(e.into());
                    }
                    // The post-test draft stays open so the client can retry.
                    Err(e) => return Err(e.into()),
                },
            }
        }

        if !matches!(event, SessionEvent::LoadPrevious) {
            self.commit(next.state, origin, cause);
        }
        outcome.state = self.state.clone();
        Ok(outcome)
    }
}
