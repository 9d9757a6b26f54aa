//! Bridge wire format: one JSON object per line inside WebSocket text
//! frames, `{"type": ..., "seq": ..., "payload": {...}}`.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::session::{PreviousEntry, SessionError, SessionEvent, SessionState};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageType {
    Hello,
    State,
    BeginPreTest,
    SubmitPreTest,
    Skip,
    LoadPrevious,
    PreviousEntry,
    EndTest,
    SubmitPostTest,
    CreateTag,
    TagList,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeMessage {
    #[serde(rename = "type")]
    pub kind: MessageType,
    #[serde(default)]
    pub seq: Option<u64>,
    #[serde(default)]
    pub payload: Value,
}

#[derive(Debug, Default, Deserialize)]
struct SubmitPrePayload {
    #[serde(default)]
    pre_comment: String,
    #[serde(default)]
    tags: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
struct SubmitPostPayload {
    #[serde(default)]
    post_comment: String,
    #[serde(default)]
    tags: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
struct CreateTagPayload {
    name: String,
}

/// What a client message asks the daemon to do.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Event(SessionEvent),
    /// `submit_post_test` without a `tags` field keeps the pre-test tags.
    SubmitPostKeepingTags { post_comment: String },
    CreateTag(String),
    ListTags,
    Hello,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct ProtocolError {
    pub code: &'static str,
    pub message: String,
}

impl ProtocolError {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        ProtocolError {
            code,
            message: message.into(),
        }
    }
}

fn payload<T: for<'de> Deserialize<'de> + Default>(msg: &BridgeMessage) -> Result<T, ProtocolError> {
    if msg.payload.is_null() {
        return Ok(T::default());
    }
    T::deserialize(&msg.payload).map_err(|e| ProtocolError::new("bad_payload", e.to_string()))
}

pub fn parse(line: &str) -> Result<BridgeMessage, ProtocolError> {
    serde_json::from_str(line).map_err(|e| ProtocolError::new("malformed", e.to_string()))
}

/// Maps a client message onto a session action.
pub fn dispatch(msg: &BridgeMessage) -> Result<Action, ProtocolError> {
    use MessageType as T;
    Ok(match msg.kind {
        T::Hello | T::State => Action::Hello,
        T::BeginPreTest => Action::Event(SessionEvent::BeginPreTest),
        T::SubmitPreTest => {
            let p: SubmitPrePayload = payload(msg)?;
            Action::Event(SessionEvent::SubmitPreTest {
                pre_comment: p.pre_comment,
                tags: p.tags,
            })
        }
        T::Skip => Action::Event(SessionEvent::Skip),
        T::LoadPrevious => Action::Event(SessionEvent::LoadPrevious),
        T::EndTest => Action::Event(SessionEvent::EndTest),
        T::SubmitPostTest => {
            let p: SubmitPostPayload = payload(msg)?;
            match p.tags {
                Some(tags) => Action::Event(SessionEvent::SubmitPostTest {
                    post_comment: p.post_comment,
                    tags,
                }),
                None => Action::SubmitPostKeepingTags {
                    post_comment: p.post_comment,
                },
            }
        }
        T::CreateTag => {
            let p: CreateTagPayload = serde_json::from_value(msg.payload.clone())
                .map_err(|e| ProtocolError::new("bad_payload", e.to_string()))?;
            Action::CreateTag(p.name)
        }
        T::TagList => Action::ListTags,
        T::PreviousEntry | T::Error => {
            return Err(ProtocolError::new(
                "unsupported",
                format!("{:?} is a server-to-client message", msg.kind),
            ))
        }
    })
}

fn message(kind: MessageType, seq: Option<u64>, payload: Value) -> BridgeMessage {
    BridgeMessage { kind, seq, payload }
}

pub fn hello() -> BridgeMessage {
    message(
        MessageType::Hello,
        None,
        json!({
            "protocol_version": PROTOCOL_VERSION,
            "server": "rda",
            "version": env!("CARGO_PKG_VERSION"),
        }),
    )
}

pub fn state(state: &SessionState, seq: Option<u64>, cause: Option<&str>) -> BridgeMessage {
    message(
        MessageType::State,
        seq,
        json!({
            "phase": state.phase,
            "draft": state.draft,
            "recording_started_at": state.recording_started_at,
            "cause": cause,
        }),
    )
}

pub fn previous_entry(previous: Option<&PreviousEntry>, seq: Option<u64>) -> BridgeMessage {
    message(MessageType::PreviousEntry, seq, json!({ "entry": previous }))
}

pub fn tag_list(tags: &[String], seq: Option<u64>) -> BridgeMessage {
    message(MessageType::TagList, seq, json!({ "tags": tags }))
}

pub fn error(seq: Option<u64>, code: &str, text: &str) -> BridgeMessage {
    message(MessageType::Error, seq, json!({ "code": code, "message": text }))
}

pub fn session_error(seq: Option<u64>, e: &SessionError) -> BridgeMessage {
    error(seq, e.code(), &e.to_string())
}

impl BridgeMessage {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("bridge message serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(v: Value) -> BridgeMessage {
        serde_json::from_value(v).unwrap()
    }

    #[test]
    fn submit_pre_test_carries_comment_and_tags() {
        let m = msg(json!({"type": "submit_pre_test", "seq": 3,
            "payload": {"pre_comment": "feel", "tags": ["Feel Test"]}}));
        assert_eq!(m.seq, Some(3));
        assert_eq!(
            dispatch(&m).unwrap(),
            Action::Event(SessionEvent::SubmitPreTest {
                pre_comment: "feel".into(),
                tags: vec!["Feel Test".into()]
            })
        );
    }

    #[test]
    fn submit_post_test_with_and_without_tags() {
        let m = msg(json!({"type": "submit_post_test", "payload": {"post_comment": "ok", "tags": []}}));
        assert!(matches!(dispatch(&m).unwrap(), Action::Event(SessionEvent::SubmitPostTest { ref tags, .. }) if tags.is_empty()));
        let m = msg(json!({"type": "submit_post_test", "payload": {"post_comment": "ok"}}));
        assert_eq!(
            dispatch(&m).unwrap(),
            Action::SubmitPostKeepingTags { post_comment: "ok".into() }
        );
    }

    #[test]
    fn bare_messages_need_no_payload() {
        for (t, e) in [
            ("skip", SessionEvent::Skip),
            ("end_test", SessionEvent::EndTest),
            ("begin_pre_test", SessionEvent::BeginPreTest),
            ("load_previous", SessionEvent::LoadPrevious),
        ] {
            assert_eq!(dispatch(&msg(json!({"type": t}))).unwrap(), Action::Event(e));
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(parse("{nope").unwrap_err().code, "malformed");
        assert_eq!(parse(r#"{"type": "launch_rocket"}"#).unwrap_err().code, "malformed");
        assert_eq!(dispatch(&msg(json!({"type": "create_tag"}))).unwrap_err().code, "bad_payload");
        assert_eq!(dispatch(&msg(json!({"type": "error"}))).unwrap_err().code, "unsupported");
        assert_eq!(
            dispatch(&msg(json!({"type": "submit_pre_test", "payload": {"tags": "A"}}))).unwrap_err().code,
            "bad_payload"
        );
    }

    #[test]
    fn server_messages_shape() {
        let h = serde_json::to_value(hello()).unwrap();
        assert_eq!(h["type"], "hello");
        assert_eq!(h["payload"]["protocol_version"], 1);
        let s = serde_json::to_value(state(&SessionState::idle(), Some(9), Some("Skip"))).unwrap();
        assert_eq!(s["seq"], 9);
        assert_eq!(s["payload"]["phase"], "idle");
        let e = serde_json::to_value(error(Some(1), "illegal_transition", "no")).unwrap();
        assert_eq!(e["payload"]["code"], "illegal_transition");
    }
}
