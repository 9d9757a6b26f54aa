//! An in-process stand-in for OBS Studio speaking the same obs-websocket v5
//! subset as [`ObsClient`](super::ObsClient). Used by the test suites and
//! handy for exercising the daemon without OBS installed.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use futures_util::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::broadcast;
use tokio::task::JoinHandle;
use tokio_tungstenite::tungstenite::protocol::frame::coding::CloseCode;
use tokio_tungstenite::tungstenite::protocol::CloseFrame;
use tokio_tungstenite::tungstenite::Message;

use super::auth::compute_auth;
use super::protocol::{
    close_code, op, status, AuthChallenge, Event, Frame, Hello, Identified, Identify, Request,
    RequestResponse, RequestStatus,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplyOrder {
    InOrder,
    Reversed,
    /// Deterministic shuffle of each batch.
    Shuffled(u64),
}

#[derive(Debug, Clone)]
pub struct MockObsConfig {
    pub password: Option<String>,
    pub salt: String,
    pub challenge: String,
    pub rpc_version: u32,
    /// Responses are held until this many requests are pending, then sent
    /// in `reply_order`.
    pub reply_batch: usize,
    pub reply_order: ReplyOrder,
    pub omit_output_path: bool,
    /// Never answer requests.
    pub silent: bool,
    pub recordings_dir: PathBuf,
}

impl MockObsConfig {
    pub fn new(recordings_dir: impl Into<PathBuf>) -> Self {
        MockObsConfig {
            password: None,
            salt: "lM1GncleQOaCu9lT1yeUZhFYnqhsLLP1G5lAGo3ixaI=".into(),
            challenge: "+IxH4CnCiqpX1rM9scsNynZzbOe4KhDeYcTNS3PDaeY=".into(),
            rpc_version: 1,
            reply_batch: 1,
            reply_order: ReplyOrder::InOrder,
            omit_output_path: false,
            silent: false,
            recordings_dir: recordings_dir.into(),
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct MockLog {
    /// `requestType` of every request, in arrival order.
    pub requests: Vec<String>,
    pub identified_sessions: usize,
    pub auth_failures: usize,
    pub recording: bool,
    pub recordings: Vec<PathBuf>,
}

pub struct MockObsServer {
    addr: SocketAddr,
    log: Arc<Mutex<MockLog>>,
    kick: broadcast::Sender<()>,
    task: JoinHandle<()>,
}

impl MockObsServer {
    pub async fn start(config: MockObsConfig) -> std::io::Result<Self> {
        std::fs::create_dir_all(&config.recordings_dir)?;
        let listener = TcpListener::bind("127.0.0.1:0").await?;
        let addr = listener.local_addr()?;
        let log = Arc::new(Mutex::new(MockLog::default()));
        let (kick, _) = broadcast::channel(4);
        let config = Arc::new(config);
        let task = {
            let log = log.clone();
            let kick = kick.clone();
            tokio::spawn(async move {
                while let Ok((tcp, _)) = listener.accept().await {
                    let _ = tcp.set_nodelay(true);
                    let session = Session {
                        config: config.clone(),
                        log: log.clone(),
                    };
                    let kicked = kick.subscribe();
                    tokio::spawn(async move {
                        if let Err(e) = session.run(tcp, kicked).await {
                            tracing::debug!("mock OBS session ended: {e}");
                        }
                    });
                }
            })
        };
        Ok(MockObsServer {
            addr,
            log,
            kick,
            task,
        })
    }

    pub fn url(&self) -> String {
        format!("ws://{}", self.addr)
    }

    pub fn log(&self) -> MockLog {
        self.log.lock().unwrap().clone()
    }

    pub fn requests(&self) -> Vec<String> {
        self.log.lock().unwrap().requests.clone()
    }

    pub fn is_recording(&self) -> bool {
        self.log.lock().unwrap().recording
    }

    /// Drops every open client connection without stopping the server.
    pub fn kick_clients(&self) {
        let _ = self.kick.send(());
    }

    pub fn shutdown(self) {
        self.kick_clients();
        self.task.abort();
    }
}

impl Drop for MockObsServer {
    fn drop(&mut self) {
        self.task.abort();
    }
}

struct Session {
    config: Arc<MockObsConfig>,
    log: Arc<Mutex<MockLog>>,
}

type Socket = tokio_tungstenite::WebSocketStream<TcpStream>;

async fn send(socket: &mut Socket, frame: Frame) -> Result<(), String> {
    socket
        .send(Message::Text(frame.to_text()))
        .await
        .map_err(|e| e.to_string())
}

async fn close(socket: &mut Socket, code: u16, reason: &str) {
    let _ = socket
        .send(Message::Close(Some(CloseFrame {
            code: CloseCode::from(code),
            reason: reason.to_string().into(),
        })))
        .await;
}

fn permute<T>(items: &mut [T], order: ReplyOrder) {
    match order {
        ReplyOrder::InOrder => {}
        ReplyOrder::Reversed => items.reverse(),
        ReplyOrder::Shuffled(seed) => {
            let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            for i in (1..items.len()).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = ((state >> 33) as usize) % (i + 1);
                items.swap(i, j);
            }
        }
    }
}

impl Session {
    async fn run(self, tcp: TcpStream, mut kicked: broadcast::Receiver<()>) -> Result<(), String> {
        let mut socket = tokio_tungstenite::accept_async(tcp)
            .await
            .map_err(|e| e.to_string())?;
        let cfg = &self.config;
        let hello = Hello {
            obs_web_socket_version: Some("5.5.0-mock".into()),
            rpc_version: cfg.rpc_version,
            authentication: cfg.password.as_ref().map(|_| AuthChallenge {
                challenge: cfg.challenge.clone(),
                salt: cfg.salt.clone(),
            }),
        };
        send(&mut socket, Frame::new(op::HELLO, &hello)).await?;

        let identify: Identify = loop {
            match socket.next().await {
                Some(Ok(Message::Text(text))) => {
                    let frame: Frame = serde_json::from_str(&text).map_err(|e| e.to_string())?;
                    if frame.op != op::IDENTIFY {
                        close(&mut socket, close_code::NOT_IDENTIFIED, "not identified").await;
                        return Err("request before Identify".into());
                    }
                    break frame.parse().map_err(|e| e.to_string())?;
                }
                Some(Ok(_)) => continue,
                _ => return Err("client left before Identify".into()),
            }
        };
        if identify.rpc_version > cfg.rpc_version {
            close(&mut socket, close_code::UNSUPPORTED_RPC_VERSION, "unsupported rpc version").await;
            return Err("rpc version".into());
        }
        if let Some(password) = &cfg.password {
            let expected = compute_auth(password, &cfg.salt, &cfg.challenge);
            if identify.authentication.as_deref() != Some(expected.as_str()) {
                self.log.lock().unwrap().auth_failures += 1;
                close(&mut socket, close_code::AUTHENTICATION_FAILED, "Authentication failed.").await;
                return Err("authentication failed".into());
            }
        }
        self.log.lock().unwrap().identified_sessions += 1;
        send(
            &mut socket,
            Frame::new(
                op::IDENTIFIED,
                &Identified {
                    negotiated_rpc_version: identify.rpc_version,
                },
            ),
        )
        .await?;

        let mut held: Vec<RequestResponse> = Vec::new();
        let mut events: Vec<Event> = Vec::new();
        loop {
            let message = tokio::select! {
                message = socket.next() => message,
                _ = kicked.recv() => {
                    close(&mut socket, 1001, "going away").await;
                    return Ok(());
                }
            };
            let text = match message {
                Some(Ok(Message::Text(text))) => text,
                Some(Ok(Message::Close(_))) | None => return Ok(()),
                Some(Ok(_)) => continue,
                Some(Err(e)) => return Err(e.to_string()),
            };
            let frame: Frame = serde_json::from_str(&text).map_err(|e| e.to_string())?;
            if frame.op != op::REQUEST {
                continue;
            }
            let request: Request = frame.parse().map_err(|e| e.to_string())?;
            let (response, event) = self.answer(&request);
            if cfg.silent {
                continue;
            }
            held.push(response);
            events.extend(event);
            if held.len() >= cfg.reply_batch.max(1) {
                permute(&mut held, cfg.reply_order);
                for response in held.drain(..) {
                    send(&mut socket, Frame::new(op::REQUEST_RESPONSE, &response)).await?;
                }
                for event in events.drain(..) {
                    send(&mut socket, Frame::new(op::EVENT, &event)).await?;
                }
            }
        }
    }

    fn answer(&self, request: &Request) -> (RequestResponse, Option<Event>) {
        let mut log = self.log.lock().unwrap();
        log.requests.push(request.request_type.clone());
        let ok = |data: Option<Value>| (true, status::SUCCESS, None, data);
        let fail = |code: u16, comment: &str| (false, code, Some(comment.to_string()), None);
        let mut event = None;
        let (result, code, comment, data) = match request.request_type.as_str() {
            "StartRecord" if log.recording => fail(status::OUTPUT_RUNNING, "Recording is already active."),
            "StartRecord" => {
                log.recording = true;
                event = Some(record_event(true, "OBS_WEBSOCKET_OUTPUT_STARTED", None));
                ok(None)
            }
            "StopRecord" if !log.recording => fail(status::OUTPUT_NOT_RUNNING, "Recording is not active."),
            "StopRecord" => {
                log.recording = false;
                let path = self
                    .config
                    .recordings_dir
                    .join(format!("mock-recording-{}.mkv", log.recordings.len() + 1));
                let _ = std::fs::write(&path, b"\x1a\x45\xdf\xa3 mock matroska");
                log.recordings.push(path.clone());
                let path = path.to_string_lossy().into_owned();
                event = Some(record_event(false, "OBS_WEBSOCKET_OUTPUT_STOPPED", Some(&path)));
                if self.config.omit_output_path {
                    ok(Some(json!({})))
                } else {
                    ok(Some(json!({ "outputPath": path })))
                }
            }
            "GetRecordStatus" => ok(Some(json!({
                "outputActive": log.recording,
                "outputPaused": false,
                "outputTimecode": "00:00:00.000",
                "outputDuration": 0,
                "outputBytes": 0
            }))),
            "GetVersion" => ok(Some(json!({
                "obsVersion": "mock",
                "obsWebSocketVersion": "5.5.0-mock",
                "rpcVersion": self.config.rpc_version,
            }))),
            "Echo" => ok(request.request_data.clone()),
            _ => fail(status::UNKNOWN_REQUEST_TYPE, "Unknown request type."),
        };
        let response = RequestResponse {
            request_type: request.request_type.clone(),
            request_id: request.request_id.clone(),
            request_status: RequestStatus {
                result,
                code,
                comment,
            },
            response_data: data,
        };
        (response, event)
    }
}

fn record_event(active: bool, state: &str, path: Option<&str>) -> Event {
    Event {
        event_type: "RecordStateChanged".into(),
        event_intent: 1 << 6,
        event_data: Some(json!({
            "outputActive": active,
            "outputState": state,
            "outputPath": path,
        })),
    }
}
