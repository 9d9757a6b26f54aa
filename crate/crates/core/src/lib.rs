//! Reflection journaling for playtests: the capture loop, OBS recording
//! control, the local bridge server and the corpus compiler.

pub mod bridge;
pub mod compiler;
pub mod error;
pub mod journal;
pub mod obs;
pub mod session;

pub use error::{Error, Result, Warning};
