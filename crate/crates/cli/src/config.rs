use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rda_core::compiler::{media, Corner, Transcoder};
use rda_core::obs::ObsOptions;
use serde::Deserialize;

pub const DEFAULT_CONFIG_FILE: &str = "rda.toml";
pub const ENV_PASSWORD: &str = "RDA_OBS_PASSWORD";
pub const ENV_STORE_ROOT: &str = "RDA_STORE_ROOT";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid setting `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub store_root: PathBuf,
    pub obs_url: String,
    /// Prefer the environment variable over storing this on disk.
    pub obs_password: Option<String>,
    pub obs_connect_attempts: u32,
    pub obs_retry_delay_ms: u64,
    pub obs_timeout_ms: u64,
    pub bridge_bind: String,
    pub disconnect_grace_secs: u64,
    pub output_dir: PathBuf,
    pub transcoder_cmd: String,
    pub probe_cmd: String,
    pub burnin_position: String,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            store_root: PathBuf::from("journal"),
            obs_url: rda_core::obs::DEFAULT_URL.to_string(),
            obs_password: None,
            obs_connect_attempts: 5,
            obs_retry_delay_ms: 2000,
            obs_timeout_ms: 5000,
            bridge_bind: rda_core::bridge::DEFAULT_BIND.to_string(),
            disconnect_grace_secs: 10,
            output_dir: PathBuf::from("compiled"),
            transcoder_cmd: "ffmpeg".into(),
            probe_cmd: "ffprobe".into(),
            burnin_position: "bottom-left".into(),
        }
    }
}

/// Written by `rda init`.
pub fn template(store_root: &Path) -> String {
    format!(
        r#"# rda configuration. Relative paths are resolved against this file's directory.

store_root = {store_root:?}

# OBS WebSocket server (obs-websocket v5). The password is read from the
# {ENV_PASSWORD} environment variable; obs_password here also works.
obs_url = "ws://127.0.0.1:4455"
obs_connect_attempts = 5
obs_retry_delay_ms = 2000
obs_timeout_ms = 5000

# Where UI and engine clients connect.
bridge_bind = "127.0.0.1:7341"
# Seconds without any client before an open test is saved as abandoned.
disconnect_grace_secs = 10

# Compiler.
output_dir = "compiled"
transcoder_cmd = "ffmpeg"
probe_cmd = "ffprobe"
# top-left, top-right, bottom-left or bottom-right
burnin_position = "bottom-left"
"#,
        store_root = store_root.to_string_lossy()
    )
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        message: message.into(),
    }
}

impl Config {
    /// Reads `path` if given (it must exist) or `./rda.toml` if present,
    /// then applies environment overrides and validates.
    pub fn load(path: Option<&Path>) -> Result<Config, ConfigError> {
        let default_path = Path::new(DEFAULT_CONFIG_FILE);
        let path = match path {
            Some(p) => Some(p),
            None if default_path.is_file() => Some(default_path),
            None => None,
        };
        let mut config = match path {
            Some(path) => Config::from_file(path)?,
            None => Config::default(),
        };
        config.apply_env(|key| std::env::var(key).ok());
        config.validate()?;
        Ok(config)
    }

    /// Built-in defaults plus environment overrides.
    pub fn load_defaults() -> Result<Config, ConfigError> {
        let mut config = Config::default();
        config.apply_env(|key| std::env::var(key).ok());
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: Config = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.message().to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.store_root = base.join(&config.store_root);
        config.output_dir = base.join(&config.output_dir);
        Ok(config)
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) {
        if let Some(password) = var(ENV_PASSWORD) {
            self.obs_password = Some(password);
        }
        if let Some(root) = var(ENV_STORE_ROOT).filter(|r| !r.is_empty()) {
            self.store_root = PathBuf::from(root);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.obs_url.starts_with("ws://") || self.obs_url.starts_with("wss://")) {
            return Err(invalid("obs_url", format!("`{}` is not a ws:// or wss:// URL", self.obs_url)));
        }
        if self.obs_connect_attempts == 0 {
            return Err(invalid("obs_connect_attempts", "must be at least 1"));
        }
        self.bind()?;
        self.corner()?;
        if self.transcoder_cmd.trim().is_empty() {
            return Err(invalid("transcoder_cmd", "must not be empty"));
        }
        if self.probe_cmd.trim().is_empty() {
            return Err(invalid("probe_cmd", "must not be empty"));
        }
        Ok(())
    }

    pub fn bind(&self) -> Result<SocketAddr, ConfigError> {
        self.bridge_bind
            .parse()
            .map_err(|_| invalid("bridge_bind", format!("`{}` is not an address:port", self.bridge_bind)))
    }

    pub fn corner(&self) -> Result<Corner, ConfigError> {
        self.burnin_position.parse().map_err(|e: String| invalid("burnin_position", e))
    }

    pub fn obs_options(&self) -> ObsOptions {
        ObsOptions {
            url: self.obs_url.clone(),
            password: self.obs_password.clone().filter(|p| !p.is_empty()),
            timeout: Duration::from_millis(self.obs_timeout_ms),
        }
    }

    pub fn transcoder(&self) -> Transcoder {
        Transcoder {
            transcode: media::split_command(&self.transcoder_cmd),
            probe: media::split_command(&self.probe_cmd),
            corner: self.corner().unwrap_or_default(),
            ..Transcoder::default()
        }
    }
}
