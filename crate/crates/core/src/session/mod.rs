//! The reflection loop: a pure state machine plus the engine task that
//! executes its effects against the recorder and the journal store.

mod engine;
mod machine;

pub use engine::{
    local_clock, Clock, Notice, Origin, Outcome, PreviousEntry, Recorder, RecorderError, SessionEngine,
    SessionError, SessionHandle,
};
pub use machine::{
    abandon, transition, Draft, Effect, IllegalTransition, PendingEntry, Phase, SessionEvent, SessionState,
    Transition,
};
