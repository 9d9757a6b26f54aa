use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Body;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use tokio::sync::{broadcast, mpsc};
use tokio::task::JoinHandle;

use super::protocol::{self, Action, BridgeMessage};
use crate::journal::JournalStore;
use crate::session::{Notice, Origin, Phase, SessionEvent, SessionHandle};

pub const DEFAULT_BIND: &str = "127.0.0.1:7341";
pub const DEFAULT_GRACE: Duration = Duration::from_secs(10);

#[derive(Debug, Clone)]
pub struct BridgeOptions {
    pub bind: SocketAddr,
    /// How long the last client may be gone before an in-flight loop is
    /// recovered as abandoned.
    pub disconnect_grace: Duration,
}

impl Default for BridgeOptions {
    fn default() -> Self {
        BridgeOptions {
            bind: DEFAULT_BIND.parse().unwrap(),
            disconnect_grace: DEFAULT_GRACE,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BridgeError {
    #[error("cannot bind bridge server to {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Default)]
struct Presence {
    connected: usize,
    generation: u64,
}

struct App {
    session: SessionHandle,
    store: JournalStore,
    presence: Mutex<Presence>,
    next_client: AtomicU64,
    grace: Duration,
    recoveries: AtomicU64,
}

pub struct BridgeServer {
    local_addr: SocketAddr,
    app: Arc<App>,
    task: JoinHandle<()>,
}

impl BridgeServer {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn ws_url(&self) -> String {
        format!("ws://{}/ws", self.local_addr)
    }

    pub fn connected_clients(&self) -> usize {
        self.app.presence.lock().unwrap().connected
    }

    /// Number of `ClientDisconnected` events fired by the grace timer.
    pub fn recoveries(&self) -> u64 {
        self.app.recoveries.load(Ordering::SeqCst)
    }

    pub fn shutdown(self) {
        self.task.abort();
    }
}

impl Drop for BridgeServer {
    fn drop(&mut self) {
        self.task.abort();
    }
}

pub async fn serve(
    options: BridgeOptions,
    session: SessionHandle,
    store: JournalStore,
) -> Result<BridgeServer, BridgeError> {
    let listener = tokio::net::TcpListener::bind(options.bind)
        .await
        .map_err(|source| BridgeError::Bind {
            addr: options.bind,
            source,
        })?;
    let local_addr = listener.local_addr().map_err(|source| BridgeError::Bind {
        addr: options.bind,
        source,
    })?;
    let app = Arc::new(App {
        session,
        store,
        presence: Mutex::new(Presence::default()),
        next_client: AtomicU64::new(1),
        grace: options.disconnect_grace,
        recoveries: AtomicU64::new(0),
    });
    let router = Router::new()
        .route("/", get(upgrade))
        .route("/ws", get(upgrade))
        .route("/days", get(days))
        .route("/entry/:date/:run", get(entry))
        .route("/media/:date/:run", get(media))
        .with_state(app.clone());
    let task = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, router).tcp_nodelay(true).await {
            tracing::error!("bridge server stopped: {e}");
        }
    });
    tracing::info!("bridge listening on {local_addr}");
    Ok(BridgeServer {
        local_addr,
        app,
        task,
    })
}

async fn upgrade(ws: WebSocketUpgrade, State(app): State<Arc<App>>) -> Response {
    ws.on_upgrade(move |socket| client_session(socket, app))
}

fn render_notice(notice: Notice, client: u64) -> BridgeMessage {
    let seq_for = |origin: Origin| {
        if origin.client == Some(client) {
            origin.seq
        } else {
            None
        }
    };
    match notice {
        Notice::State { state, origin, cause } => protocol::state(&state, seq_for(origin), Some(cause)),
        Notice::Tags { tags, origin } => protocol::tag_list(&tags, seq_for(origin)),
    }
}

async fn client_session(socket: WebSocket, app: Arc<App>) {
    let client = app.next_client.fetch_add(1, Ordering::Relaxed);
    {
        let mut presence = app.presence.lock().unwrap();
        presence.connected += 1;
        presence.generation += 1;
    }
    let (mut sink, mut stream) = socket.split();
    let mut notices = app.session.subscribe();
    let (direct, mut direct_rx) = mpsc::unbounded_channel::<BridgeMessage>();

    let _ = direct.send(protocol::hello());
    let _ = direct.send(protocol::state(&app.session.state(), None, None));
    if let Ok(tags) = app.session.tags().await {
        let _ = direct.send(protocol::tag_list(&tags, None));
    }

    let writer = {
        let session = app.session.clone();
        tokio::spawn(async move {
            loop {
                let outgoing = tokio::select! {
                    biased;
                    direct = direct_rx.recv() => match direct {
                        Some(message) => message,
                        None => break,
                    },
                    notice = notices.recv() => match notice {
                        Ok(notice) => render_notice(notice, client),
                        Err(broadcast::error::RecvError::Lagged(_)) => protocol::state(&session.state(), None, None),
                        Err(broadcast::error::RecvError::Closed) => break,
                    },
                };
                if sink.send(Message::Text(outgoing.to_line())).await.is_err() {
                    break;
                }
            }
        })
    };

    while let Some(Ok(message)) = stream.next().await {
        let text = match message {
            Message::Text(text) => text,
            Message::Binary(bytes) => String::from_utf8_lossy(&bytes).into_owned(),
            Message::Close(_) => break,
            _ => continue,
        };
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            handle_line(&app, client, line, &direct).await;
        }
    }

    writer.abort();
    client_left(&app);
}

async fn handle_line(app: &App, client: u64, line: &str, direct: &mpsc::UnboundedSender<BridgeMessage>) {
    let msg = match protocol::parse(line) {
        Ok(msg) => msg,
        Err(e) => {
            let _ = direct.send(protocol::error(None, e.code, &e.message));
            return;
        }
    };
    let seq = msg.seq;
    let origin = Origin {
        client: Some(client),
        seq,
    };
    let action = match protocol::dispatch(&msg) {
        Ok(action) => action,
        Err(e) => {
            let _ = direct.send(protocol::error(seq, e.code, &e.message));
            return;
        }
    };
    let event = match action {
        Action::Hello => {
            let _ = direct.send(protocol::state(&app.session.state(), seq, None));
            return;
        }
        Action::ListTags => {
            match app.session.tags().await {
                Ok(tags) => direct.send(protocol::tag_list(&tags, seq)),
                Err(e) => direct.send(protocol::session_error(seq, &e)),
            }
            .ok();
            return;
        }
        Action::CreateTag(name) => {
            // Success is announced through the tag_list broadcast.
            if let Err(e) = app.session.create_tag(&name, origin).await {
                let _ = direct.send(protocol::session_error(seq, &e));
            }
            return;
        }
        Action::SubmitPostKeepingTags { post_comment } => {
            let tags = app
                .session
                .state()
                .draft
                .map(|d| d.tags)
                .unwrap_or_default();
            SessionEvent::SubmitPostTest { post_comment, tags }
        }
        Action::Event(event) => event,
    };
    let load_previous = matches!(event, SessionEvent::LoadPrevious);
    match app.session.send(event, origin).await {
        Ok(outcome) if load_previous => {
            let _ = direct.send(protocol::previous_entry(outcome.previous.as_ref(), seq));
        }
        Ok(_) => {}
        Err(e) => {
            let _ = direct.send(protocol::session_error(seq, &e));
        }
    }
}

fn client_left(app: &Arc<App>) {
    let generation = {
        let mut presence = app.presence.lock().unwrap();
        presence.connected -= 1;
        if presence.connected > 0 {
            return;
        }
        presence.generation
    };
    let app = app.clone();
    tokio::spawn(async move {
        tokio::time::sleep(app.grace).await;
        {
            let presence = app.presence.lock().unwrap();
            if presence.connected > 0 || presence.generation != generation {
                return;
            }
        }
        if matches!(app.session.state().phase, Phase::Recording | Phase::PostTest) {
            tracing::warn!("no client reconnected within {:?}; recovering the open test", app.grace);
            app.recoveries.fetch_add(1, Ordering::SeqCst);
            if let Err(e) = app.session.send(SessionEvent::ClientDisconnected, Origin::default()).await {
                tracing::error!("recovery failed: {e}");
            }
        }
    });
}

async fn days(State(app): State<Arc<App>>) -> Response {
    match app.store.days() {
        Ok(days) => Json(days).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

fn locate(date: &str, run: &str) -> Option<(chrono::NaiveDate, u32)> {
    let date = crate::journal::parse_day_dir_name(date)?;
    let run = crate::journal::parse_run_dir_name(&format!("run_{run}"))?;
    Some((date, run))
}

async fn entry(State(app): State<Arc<App>>, Path((date, run)): Path<(String, String)>) -> Response {
    let Some((date, run)) = locate(&date, &run) else {
        return StatusCode::NOT_FOUND.into_response();
    };
    match app.store.read_entry(date, run) {
        Ok(entry) => Json(entry).into_response(),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

async fn media(State(app): State<Arc<App>>, Path((date, run)): Path<(String, String)>) -> Response {
    let Some((date, run)) = locate(&date, &run) else {
        return StatusCode::NOT_FOUND.into_response();
    };
    let Some(name) = app.store.read_entry(date, run).ok().and_then(|e| e.video_file) else {
        return StatusCode::NOT_FOUND.into_response();
    };
    let path = app.store.run_dir(date, run).join(&name);
    let Ok(file) = tokio::fs::File::open(&path).await else {
        return StatusCode::NOT_FOUND.into_response();
    };
    let content_type = match path.extension().and_then(|e| e.to_str()) {
        Some("mp4") => "video/mp4",
        Some("mkv") => "video/x-matroska",
        _ => "application/octet-stream",
    };
    let body = Body::from_stream(tokio_util::io::ReaderStream::new(file));
    ([(header::CONTENT_TYPE, content_type)], body).into_response()
}
