use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use futures_util::{SinkExt, Stream, StreamExt};
use serde_json::Value;
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::task::JoinHandle;
use tokio::time::timeout;
use tokio_tungstenite::tungstenite::protocol::frame::coding::CloseCode;
use tokio_tungstenite::tungstenite::Message;

use super::auth::compute_auth;
use super::protocol::{
    close_code, op, Event, Frame, Hello, Identified, Identify, Request, RequestResponse,
    EVENT_SUBSCRIPTION_OUTPUTS, RPC_VERSION,
};
use super::ObsError;

pub const DEFAULT_URL: &str = "ws://127.0.0.1:4455";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Clone)]
pub struct ObsOptions {
    pub url: String,
    pub password: Option<String>,
    pub timeout: Duration,
}

impl Default for ObsOptions {
    fn default() -> Self {
        ObsOptions {
            url: DEFAULT_URL.to_string(),
            password: None,
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnectionState {
    Disconnected,
    AwaitingHello,
    Identifying,
    Identified,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecordHandle {
    pub active: bool,
    /// Only set after a successful stop.
    pub output_path: Option<PathBuf>,
}

type Pending = Mutex<HashMap<String, oneshot::Sender<RequestResponse>>>;

struct Shared {
    state: Mutex<ConnectionState>,
    pending: Pending,
}

impl Shared {
    fn set_state(&self, state: ConnectionState) {
        *self.state.lock().unwrap() = state;
    }
}

/// An identified obs-websocket v5 session.
///
/// One task owns the socket reader and resolves pending requests by
/// `requestId`; another drains the outgoing queue. Requests may be issued
/// concurrently from any task.
pub struct ObsClient {
    shared: Arc<Shared>,
    outgoing: mpsc::UnboundedSender<Message>,
    events: broadcast::Sender<Event>,
    next_id: AtomicU64,
    record: Mutex<RecordHandle>,
    timeout: Duration,
    reader: JoinHandle<()>,
    writer: JoinHandle<()>,
}

impl std::fmt::Debug for ObsClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ObsClient")
            .field("state", &self.state())
            .field("record", &self.record_handle())
            .finish()
    }
}

fn close_error(code: u16, reason: &str) -> ObsError {
    match code {
        close_code::AUTHENTICATION_FAILED => {
            ObsError::Credential(format!("OBS rejected the password ({reason})"))
        }
        close_code::UNSUPPORTED_RPC_VERSION => {
            ObsError::Protocol(format!("OBS does not support rpc version {RPC_VERSION} ({reason})"))
        }
        _ => ObsError::Connectivity(format!("OBS closed the connection with code {code} ({reason})")),
    }
}

async fn next_frame<S, E>(stream: &mut S) -> Result<Frame, ObsError>
where
    S: Stream<Item = Result<Message, E>> + Unpin,
    E: std::fmt::Display,
{
    loop {
        let message = match stream.next().await {
            Some(Ok(message)) => message,
            Some(Err(e)) => return Err(ObsError::Connectivity(e.to_string())),
            None => return Err(ObsError::Connectivity("connection closed".into())),
        };
        let text = match message {
            Message::Text(text) => text,
            Message::Binary(bytes) => String::from_utf8_lossy(&bytes).into_owned(),
            Message::Close(Some(frame)) => {
                return Err(close_error(u16::from(frame.code), &frame.reason));
            }
            Message::Close(None) => return Err(ObsError::Connectivity("connection closed".into())),
            _ => continue,
        };
        return serde_json::from_str(&text)
            .map_err(|e| ObsError::Protocol(format!("malformed frame: {e}")));
    }
}

impl ObsClient {
    /// Hello → Identify → Identified. Each step is bounded by `options.timeout`.
    pub async fn connect(options: &ObsOptions) -> Result<Self, ObsError> {
        let limit = options.timeout;
        let (socket, _) = timeout(limit, tokio_tungstenite::connect_async_with_config(options.url.as_str(), None, true))
            .await
            .map_err(|_| ObsError::Connectivity(format!("timed out connecting to {}", options.url)))?
            .map_err(|e| ObsError::Connectivity(format!("{}: {e}", options.url)))?;
        let (mut sink, mut stream) = socket.split();

        let shared = Arc::new(Shared {
            state: Mutex::new(ConnectionState::AwaitingHello),
            pending: Mutex::new(HashMap::new()),
        });

        let frame = timeout(limit, next_frame(&mut stream))
            .await
            .map_err(|_| ObsError::Connectivity("timed out waiting for Hello".into()))??;
        if frame.op != op::HELLO {
            return Err(ObsError::Protocol(format!("expected Hello, got op {}", frame.op)));
        }
        let hello: Hello = frame
            .parse()
            .map_err(|e| ObsError::Protocol(format!("malformed Hello: {e}")))?;
        if hello.rpc_version < RPC_VERSION {
            return Err(ObsError::Protocol(format!(
                "OBS offers rpc version {}, need {RPC_VERSION}",
                hello.rpc_version
            )));
        }
        let authentication = match (&hello.authentication, &options.password) {
            (Some(challenge), Some(password)) => {
                Some(compute_auth(password, &challenge.salt, &challenge.challenge))
            }
            (Some(_), None) => {
                return Err(ObsError::Credential(
                    "OBS requires a password but none is configured".into(),
                ))
            }
            (None, _) => None,
        };

        shared.set_state(ConnectionState::Identifying);
        let identify = Frame::new(
            op::IDENTIFY,
            &Identify {
                rpc_version: RPC_VERSION,
                authentication,
                event_subscriptions: Some(EVENT_SUBSCRIPTION_OUTPUTS),
            },
        );
        sink.send(Message::Text(identify.to_text()))
            .await
            .map_err(|e| ObsError::Connectivity(e.to_string()))?;

        let frame = timeout(limit, next_frame(&mut stream))
            .await
            .map_err(|_| ObsError::Connectivity("timed out waiting for Identified".into()))??;
        if frame.op != op::IDENTIFIED {
            return Err(ObsError::Protocol(format!("expected Identified, got op {}", frame.op)));
        }
        let identified: Identified = frame
            .parse()
            .map_err(|e| ObsError::Protocol(format!("malformed Identified: {e}")))?;
        if identified.negotiated_rpc_version != RPC_VERSION {
            return Err(ObsError::Protocol(format!(
                "negotiated rpc version {} is not {RPC_VERSION}",
                identified.negotiated_rpc_version
            )));
        }
        shared.set_state(ConnectionState::Identified);

        let (outgoing, mut outgoing_rx) = mpsc::unbounded_channel::<Message>();
        let writer = tokio::spawn(async move {
            while let Some(message) = outgoing_rx.recv().await {
                if sink.send(message).await.is_err() {
                    break;
                }
            }
            let _ = sink.close().await;
        });

        let (events, _) = broadcast::channel(64);
        let reader = {
            let shared = shared.clone();
            let events = events.clone();
            tokio::spawn(async move {
                loop {
                    let frame = match next_frame(&mut stream).await {
                        Ok(frame) => frame,
                        Err(e) => {
                            tracing::debug!("OBS reader stopped: {e}");
                            break;
                        }
                    };
                    match frame.op {
                        op::REQUEST_RESPONSE => match frame.parse::<RequestResponse>() {
                            Ok(response) => {
                                let waiter = shared.pending.lock().unwrap().remove(&response.request_id);
                                match waiter {
                                    Some(tx) => {
                                        let _ = tx.send(response);
                                    }
                                    None => tracing::warn!(
                                        "OBS response for unknown request id {}",
                                        response.request_id
                                    ),
                                }
                            }
                            Err(e) => tracing::warn!("malformed OBS response: {e}"),
                        },
                        op::EVENT => {
                            if let Ok(event) = frame.parse::<Event>() {
                                let _ = events.send(event);
                            }
                        }
                        other => tracing::debug!("ignoring OBS frame op {other}"),
                    }
                }
                shared.set_state(ConnectionState::Disconnected);
                // Dropping the senders fails every in-flight request.
                shared.pending.lock().unwrap().clear();
            })
        };

        Ok(ObsClient {
            shared,
            outgoing,
            events,
            next_id: AtomicU64::new(1),
            record: Mutex::new(RecordHandle::default()),
            timeout: limit,
            reader,
            writer,
        })
    }

    pub fn state(&self) -> ConnectionState {
        *self.shared.state.lock().unwrap()
    }

    pub fn record_handle(&self) -> RecordHandle {
        self.record.lock().unwrap().clone()
    }

    pub fn subscribe_events(&self) -> broadcast::Receiver<Event> {
        self.events.subscribe()
    }

    /// Sends one request and waits for the response with the same id.
    /// Returns `responseData` (or `null`).
    pub async fn request(&self, request_type: &str, data: Option<Value>) -> Result<Value, ObsError> {
        if self.state() != ConnectionState::Identified {
            return Err(ObsError::Connectivity(format!(
                "cannot send {request_type}: connection is {:?}",
                self.state()
            )));
        }
        let request_id = self.next_id.fetch_add(1, Ordering::Relaxed).to_string();
        let (tx, rx) = oneshot::channel();
        self.shared
            .pending
            .lock()
            .unwrap()
            .insert(request_id.clone(), tx);

        let frame = Frame::new(
            op::REQUEST,
            &Request {
                request_type: request_type.to_string(),
                request_id: request_id.clone(),
                request_data: data,
            },
        );
        if self.outgoing.send(Message::Text(frame.to_text())).is_err() {
            self.shared.pending.lock().unwrap().remove(&request_id);
            return Err(ObsError::Connectivity("connection writer has stopped".into()));
        }

        let response = match timeout(self.timeout, rx).await {
            Ok(Ok(response)) => response,
            Ok(Err(_)) => {
                return Err(ObsError::Connectivity(format!(
                    "connection lost while waiting for {request_type}"
                )))
            }
            Err(_) => {
                self.shared.pending.lock().unwrap().remove(&request_id);
                return Err(ObsError::Connectivity(format!(
                    "timed out waiting for {request_type}"
                )));
            }
        };
        let status = response.request_status;
        if !status.result {
            return Err(ObsError::Protocol(format!(
                "{request_type} failed with code {}: {}",
                status.code,
                status.comment.unwrap_or_default()
            )));
        }
        Ok(response.response_data.unwrap_or(Value::Null))
    }

    pub async fn start_record(&self) -> Result<RecordHandle, ObsError> {
        if self.record_handle().active {
            return Err(ObsError::Protocol("a recording is already active".into()));
        }
        self.request("StartRecord", None).await?;
        let mut handle = self.record.lock().unwrap();
        *handle = RecordHandle {
            active: true,
            output_path: None,
        };
        Ok(handle.clone())
    }

    /// Stops the active recording and reports where OBS wrote it.
    pub async fn stop_record(&self) -> Result<RecordHandle, ObsError> {
        if !self.record_handle().active {
            return Err(ObsError::Protocol("no recording is active".into()));
        }
        let data = match self.request("StopRecord", None).await {
            Ok(data) => data,
            Err(e @ ObsError::Protocol(_)) => {
                // OBS is authoritative: a refused stop means it is not recording.
                self.record.lock().unwrap().active = false;
                return Err(e);
            }
            Err(e) => return Err(e),
        };
        let output_path = data
            .get("outputPath")
            .and_then(Value::as_str)
            .filter(|p| !p.is_empty())
            .map(PathBuf::from);
        if output_path.is_none() {
            tracing::warn!("StopRecord response carried no outputPath");
        }
        let mut handle = self.record.lock().unwrap();
        *handle = RecordHandle {
            active: false,
            output_path,
        };
        Ok(handle.clone())
    }

    /// Re-reads OBS's recording state into the local handle.
    pub async fn sync_record_state(&self) -> Result<RecordHandle, ObsError> {
        let data = self.request("GetRecordStatus", None).await?;
        let active = data.get("outputActive").and_then(Value::as_bool).unwrap_or(false);
        let mut handle = self.record.lock().unwrap();
        handle.active = active;
        if active {
            handle.output_path = None;
        }
        Ok(handle.clone())
    }

    pub fn close(&self) {
        let _ = self.outgoing.send(Message::Close(Some(
            tokio_tungstenite::tungstenite::protocol::CloseFrame {
                code: CloseCode::Normal,
                reason: "".into(),
            },
        )));
    }
}

impl Drop for ObsClient {
    fn drop(&mut self) {
        self.reader.abort();
        self.writer.abort();
    }
}
