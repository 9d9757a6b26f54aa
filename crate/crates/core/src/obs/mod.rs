//! obs-websocket v5 client for starting and stopping recordings.

mod auth;
mod client;
pub mod mock;
pub mod protocol;

use std::path::PathBuf;
use std::time::Duration;

use thiserror::Error;
use tokio::sync::Mutex;

pub use auth::compute_auth;
pub use client::{ConnectionState, ObsClient, ObsOptions, RecordHandle, DEFAULT_TIMEOUT, DEFAULT_URL};

use crate::session::{Recorder, RecorderError};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ObsError {
    #[error("OBS credential error: {0}")]
    Credential(String),
    #[error("OBS connectivity error: {0}")]
    Connectivity(String),
    #[error("OBS protocol error: {0}")]
    Protocol(String),
}

impl From<ObsError> for RecorderError {
    fn from(e: ObsError) -> Self {
        RecorderError(e.to_string())
    }
}

/// Connects with a fixed number of attempts, sleeping `delay` in between.
pub async fn connect_with_retry(
    options: &ObsOptions,
    attempts: u32,
    delay: Duration,
) -> Result<ObsClient, ObsError> {
    let attempts = attempts.max(1);
    let mut last = None;
    for attempt in 1..=attempts {
        match ObsClient::connect(options).await {
            Ok(client) => return Ok(client),
            // A wrong password will not fix itself.
            Err(e @ ObsError::Credential(_)) => return Err(e),
            Err(e) => {
                tracing::warn!("OBS connection attempt {attempt}/{attempts} failed: {e}");
                last = Some(e);
                if attempt < attempts {
                    tokio::time::sleep(delay).await;
                }
            }
        }
    }
    Err(last.expect("at least one attempt"))
}

/// [`Recorder`] backed by OBS. A dropped connection is re-established once
/// per operation before the failure is reported to the session engine.
pub struct ObsRecorder {
    options: ObsOptions,
    client: Mutex<Option<ObsClient>>,
}

impl ObsRecorder {
    pub fn new(options: ObsOptions, client: Option<ObsClient>) -> Self {
        ObsRecorder {
            options,
            client: Mutex::new(client),
        }
    }

    async fn reconnect(&self, slot: &mut Option<ObsClient>) -> Result<(), ObsError> {
        *slot = None;
        let client = ObsClient::connect(&self.options).await?;
        client.sync_record_state().await?;
        *slot = Some(client);
        Ok(())
    }

    async fn ensure(&self, slot: &mut Option<ObsClient>) -> Result<(), ObsError> {
        let usable = slot
            .as_ref()
            .is_some_and(|c| c.state() == ConnectionState::Identified);
        if usable {
            Ok(())
        } else {
            self.reconnect(slot).await
        }
    }
}

impl Recorder for ObsRecorder {
    async fn start_record(&self) -> Result<(), RecorderError> {
        let mut slot = self.client.lock().await;
        self.ensure(&mut slot).await?;
        match slot.as_ref().unwrap().start_record().await {
            Ok(_) => Ok(()),
            Err(ObsError::Connectivity(e)) => {
                tracing::warn!("OBS dropped during StartRecord ({e}); reconnecting once");
                self.reconnect(&mut slot).await?;
                slot.as_ref().unwrap().start_record().await?;
                Ok(())
            }
            Err(e) => Err(e.into()),
        }
    }

    async fn stop_record(&self) -> Result<Option<PathBuf>, RecorderError> {
        let mut slot = self.client.lock().await;
        self.ensure(&mut slot).await?;
        match slot.as_ref().unwrap().stop_record().await {
            Ok(handle) => Ok(handle.output_path),
            Err(ObsError::Connectivity(e)) => {
                tracing::warn!("OBS dropped during StopRecord ({e}); reconnecting once");
                self.reconnect(&mut slot).await?;
                Ok(slot.as_ref().unwrap().stop_record().await?.output_path)
            }
            Err(e) => Err(e.into()),
        }
    }
}
