mod common;

use std::time::Duration;

use chrono::NaiveDate;
use common::*;
use futures_util::{SinkExt, StreamExt};
use rda_core::bridge::{serve, BridgeOptions, BridgeServer};
use rda_core::journal::EntryStatus;
use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio_tungstenite::tungstenite::Message;

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

fn date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2025, 4, 30).unwrap()
}

async fn start(grace: Duration) -> (Rig, BridgeServer) {
    let rig = rig(day_start(date())).await;
    let server = serve(
        BridgeOptions {
            bind: "127.0.0.1:0".parse().unwrap(),
            disconnect_grace: grace,
        },
        rig.session.clone(),
        rig.store.clone(),
    )
    .await
    .unwrap();
    (rig, server)
}

async fn connect(server: &BridgeServer) -> Ws {
    let (ws, _) = tokio_tungstenite::connect_async(server.ws_url()).await.unwrap();
    ws
}

async fn recv(ws: &mut Ws) -> Value {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(5), ws.next())
            .await
            .expect("bridge reply")
            .unwrap()
            .unwrap();
        if let Message::Text(text) = msg {
            return serde_json::from_str(&text).unwrap();
        }
    }
}

/// Reads until a message of type `kind` arrives.
async fn recv_kind(ws: &mut Ws, kind: &str) -> Value {
    loop {
        let v = recv(ws).await;
        if v["type"] == kind {
            return v;
        }
    }
}

async fn send(ws: &mut Ws, v: Value) {
    ws.send(Message::Text(v.to_string())).await.unwrap();
}

/// Connects and consumes the greeting (hello, state, tag_list).
async fn greeted(server: &BridgeServer) -> Ws {
    let mut ws = connect(server).await;
    assert_eq!(recv(&mut ws).await["type"], "hello");
    assert_eq!(recv(&mut ws).await["type"], "state");
    assert_eq!(recv(&mut ws).await["type"], "tag_list");
    ws
}

async fn http_get(server: &BridgeServer, path: &str) -> (u16, Vec<u8>) {
    let mut stream = tokio::net::TcpStream::connect(server.local_addr()).await.unwrap();
    let request = format!("GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n");
    stream.write_all(request.as_bytes()).await.unwrap();
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw).await.unwrap();
    let split = raw.windows(4).position(|w| w == b"\r\n\r\n").unwrap();
    let head = String::from_utf8_lossy(&raw[..split]).to_string();
    let status = head.split_whitespace().nth(1).unwrap().parse().unwrap();
    let mut body = raw[split + 4..].to_vec();
    if head.to_ascii_lowercase().contains("transfer-encoding: chunked") {
        body = dechunk(&body);
    }
    (status, body)
}

fn dechunk(mut raw: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    loop {
        let line_end = raw.windows(2).position(|w| w == b"\r\n").unwrap();
        let size = usize::from_str_radix(std::str::from_utf8(&raw[..line_end]).unwrap().trim(), 16).unwrap();
        if size == 0 {
            return out;
        }
        out.extend_from_slice(&raw[line_end + 2..line_end + 2 + size]);
        raw = &raw[line_end + 4 + size..];
    }
}

#[tokio::test]
async fn greeting_announces_protocol_state_and_tags() {
    let (_rig, server) = start(Duration::from_secs(10)).await;
    let mut ws = connect(&server).await;
    let hello = recv(&mut ws).await;
    assert_eq!(hello["type"], "hello");
    assert_eq!(hello["payload"]["protocol_version"], 1);
    let state = recv(&mut ws).await;
    assert_eq!(state["payload"]["phase"], "idle");
    let tags = recv(&mut ws).await;
    assert_eq!(tags["payload"]["tags"], json!(["A", "B", "C"]));
}

#[tokio::test]
async fn state_changes_reach_every_client() {
    let (rig, server) = start(Duration::from_secs(10)).await;
    let mut ui = greeted(&server).await;
    let mut engine = greeted(&server).await;

    send(&mut ui, json!({"type": "begin_pre_test", "seq": 1})).await;
    let own = recv_kind(&mut ui, "state").await;
    assert_eq!(own["seq"], 1);
    assert_eq!(own["payload"]["phase"], "pre_test");
    let other = recv_kind(&mut engine, "state").await;
    assert_eq!(other["payload"]["phase"], "pre_test");
    assert!(other["seq"].is_null());

    send(
        &mut ui,
        json!({"type": "submit_pre_test", "seq": 2, "payload": {"pre_comment": "jump feel", "tags": ["a"]}}),
    )
    .await;
    assert_eq!(recv_kind(&mut ui, "state").await["payload"]["phase"], "recording");
    let other = recv_kind(&mut engine, "state").await;
    assert_eq!(other["payload"]["phase"], "recording");
    assert_eq!(other["payload"]["draft"]["tags"], json!(["A"]));

    // The engine client ends the test, the UI submits the reflection.
    send(&mut engine, json!({"type": "end_test", "seq": 7})).await;
    assert_eq!(recv_kind(&mut engine, "state").await["seq"], 7);
    assert_eq!(recv_kind(&mut ui, "state").await["payload"]["phase"], "post_test");
    send(&mut ui, json!({"type": "submit_post_test", "seq": 3, "payload": {"post_comment": "floaty"}})).await;
    assert_eq!(recv_kind(&mut ui, "state").await["payload"]["phase"], "idle");
    assert_eq!(recv_kind(&mut engine, "state").await["payload"]["phase"], "idle");

    let entry = rig.store.read_entry(date(), 1).unwrap();
    assert_eq!(entry.status, EntryStatus::Complete);
    assert_eq!(entry.tags, ["A"], "tags carried over from the pre-test");
    assert_eq!(entry.post_comment, "floaty");
}

#[tokio::test]
async fn bad_messages_get_errors_and_keep_the_connection() {
    let (_rig, server) = start(Duration::from_secs(10)).await;
    let mut ws = greeted(&server).await;

    ws.send(Message::Text("{not json".into())).await.unwrap();
    let err = recv(&mut ws).await;
    assert_eq!(err["type"], "error");
    assert_eq!(err["payload"]["code"], "malformed");

    send(&mut ws, json!({"type": "end_test", "seq": 4})).await;
    let err = recv(&mut ws).await;
    assert_eq!(err["type"], "error");
    assert_eq!(err["seq"], 4);
    assert_eq!(err["payload"]["code"], "illegal_transition");

    send(&mut ws, json!({"type": "begin_pre_test", "seq": 5})).await;
    send(&mut ws, json!({"type": "submit_pre_test", "seq": 6, "payload": {"tags": ["Nope"]}})).await;
    let err = recv_kind(&mut ws, "error").await;
    assert_eq!(err["seq"], 6);
    assert_eq!(err["payload"]["code"], "validation");

    send(&mut ws, json!({"type": "skip", "seq": 8})).await;
    assert_eq!(recv_kind(&mut ws, "state").await["payload"]["phase"], "idle");
}

#[tokio::test]
async fn several_messages_in_one_frame() {
    let (_rig, server) = start(Duration::from_secs(10)).await;
    let mut ws = greeted(&server).await;
    let frame = format!(
        "{}\n{}\n",
        json!({"type": "begin_pre_test", "seq": 1}),
        json!({"type": "skip", "seq": 2})
    );
    ws.send(Message::Text(frame)).await.unwrap();
    assert_eq!(recv_kind(&mut ws, "state").await["seq"], 1);
    let second = recv_kind(&mut ws, "state").await;
    assert_eq!(second["seq"], 2);
    assert_eq!(second["payload"]["phase"], "idle");
}

#[tokio::test]
async fn created_tags_are_broadcast() {
    let (rig, server) = start(Duration::from_secs(10)).await;
    let mut a = greeted(&server).await;
    let mut b = greeted(&server).await;
    send(&mut a, json!({"type": "create_tag", "seq": 1, "payload": {"name": "Bugfix"}})).await;
    let own = recv_kind(&mut a, "tag_list").await;
    assert_eq!(own["seq"], 1);
    assert_eq!(own["payload"]["tags"], json!(["A", "B", "C", "Bugfix"]));
    assert_eq!(recv_kind(&mut b, "tag_list").await["payload"]["tags"], own["payload"]["tags"]);
    assert_eq!(rig.store.load_tags().unwrap().names(), ["A", "B", "C", "Bugfix"]);

    send(&mut b, json!({"type": "create_tag", "seq": 2, "payload": {"name": " "}})).await;
    assert_eq!(recv_kind(&mut b, "error").await["payload"]["code"], "validation");
}

#[tokio::test]
async fn load_previous_replies_to_the_asker() {
    let (_rig, server) = start(Duration::from_secs(10)).await;
    let mut ws = greeted(&server).await;
    send(&mut ws, json!({"type": "load_previous", "seq": 1})).await;
    let reply = recv(&mut ws).await;
    assert_eq!(reply["type"], "previous_entry");
    assert!(reply["payload"]["entry"].is_null());

    for (seq, kind, payload) in [
        (2, "begin_pre_test", json!(null)),
        (3, "submit_pre_test", json!({"pre_comment": "first", "tags": ["B"]})),
        (4, "end_test", json!(null)),
        (5, "submit_post_test", json!({"post_comment": "done", "tags": ["B", "C"]})),
        (6, "begin_pre_test", json!(null)),
    ] {
        send(&mut ws, json!({"type": kind, "seq": seq, "payload": payload})).await;
        assert_eq!(recv_kind(&mut ws, "state").await["seq"], seq);
    }
    send(&mut ws, json!({"type": "load_previous", "seq": 7})).await;
    let reply = recv(&mut ws).await;
    assert_eq!(reply["type"], "previous_entry");
    assert_eq!(reply["seq"], 7);
    assert_eq!(reply["payload"]["entry"]["pre_comment"], "first");
    assert_eq!(reply["payload"]["entry"]["tags"], json!(["B", "C"]));
}

#[tokio::test]
async fn lost_client_past_grace_saves_one_abandoned_entry() {
    let (rig, server) = start(Duration::from_millis(200)).await;
    let mut ws = greeted(&server).await;
    send(&mut ws, json!({"type": "begin_pre_test"})).await;
    send(&mut ws, json!({"type": "submit_pre_test", "payload": {"pre_comment": "crash me", "tags": []}})).await;
    loop {
        if recv_kind(&mut ws, "state").await["payload"]["phase"] == "recording" {
            break;
        }
    }
    drop(ws);
    tokio::time::sleep(Duration::from_millis(800)).await;
    assert_eq!(server.recoveries(), 1);
    assert!(!rig.obs.is_recording());
    let entries = rig.store.scan().unwrap().entries;
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0].status, EntryStatus::Abandoned);
    assert!(entries[0].video_file.is_some());
}

#[tokio::test]
async fn reconnect_within_grace_keeps_the_test_open() {
    let (rig, server) = start(Duration::from_millis(400)).await;
    let mut ws = greeted(&server).await;
    send(&mut ws, json!({"type": "begin_pre_test"})).await;
    send(&mut ws, json!({"type": "submit_pre_test", "payload": {"pre_comment": "x", "tags": []}})).await;
    while recv_kind(&mut ws, "state").await["payload"]["phase"] != "recording" {}
    drop(ws);
    tokio::time::sleep(Duration::from_millis(100)).await;
    let mut again = connect(&server).await;
    recv(&mut again).await;
    assert_eq!(recv(&mut again).await["payload"]["phase"], "recording");
    tokio::time::sleep(Duration::from_millis(700)).await;
    assert_eq!(server.recoveries(), 0);
    assert!(rig.obs.is_recording());
    assert!(rig.store.scan().unwrap().entries.is_empty());
}

#[tokio::test]
async fn idle_disconnect_writes_nothing() {
    let (rig, server) = start(Duration::from_millis(100)).await;
    let before = file_tree(&rig.journal_root(), None);
    let ws = greeted(&server).await;
    drop(ws);
    tokio::time::sleep(Duration::from_millis(400)).await;
    assert_eq!(server.recoveries(), 0);
    assert_eq!(file_tree(&rig.journal_root(), None), before);
}

#[tokio::test]
async fn http_endpoints_browse_the_corpus() {
    let (rig, server) = start(Duration::from_secs(10)).await;
    let mut rng = <rand::rngs::StdRng as rand::SeedableRng>::seed_from_u64(3);
    let entries = generate_corpus(&rig.store, &mut rng, 3, 7, 1, Some(2));

    let (status, body) = http_get(&server, "/days").await;
    assert_eq!(status, 200);
    let days: Value = serde_json::from_slice(&body).unwrap();
    let days = days.as_array().unwrap();
    assert_eq!(days.len(), 3);
    let listed: usize = days.iter().map(|d| d["runs"].as_array().unwrap().len()).sum();
    assert_eq!(listed, entries.len());

    let first = &entries[0];
    let (status, body) = http_get(&server, &format!("/entry/{}/{}", first.date, first.run)).await;
    assert_eq!(status, 200);
    let served: rda_core::journal::JournalEntry = serde_json::from_slice(&body).unwrap();
    assert_eq!(&served, first);

    let (status, body) = http_get(&server, &format!("/media/{}/{}", first.date, first.run)).await;
    assert_eq!(status, 200);
    assert_eq!(body, b"video 0");

    let no_video = entries.iter().find(|e| e.video_file.is_none()).unwrap();
    assert_eq!(http_get(&server, &format!("/media/{}/{}", no_video.date, no_video.run)).await.0, 404);
    assert_eq!(http_get(&server, "/entry/2025-04-30/99").await.0, 404);
    assert_eq!(http_get(&server, "/entry/not-a-date/1").await.0, 404);
    assert_eq!(http_get(&server, "/entry/2025-04-30/01").await.0, 404);
}
