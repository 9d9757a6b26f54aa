//! Local WebSocket bridge that lets UI and engine clients drive the session,
//! plus read-only HTTP endpoints for browsing the corpus.

pub mod protocol;
mod server;

pub use protocol::{dispatch, Action, BridgeMessage, MessageType, ProtocolError, PROTOCOL_VERSION};
pub use server::{serve, BridgeError, BridgeOptions, BridgeServer, DEFAULT_BIND, DEFAULT_GRACE};
