mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use rda_core::compiler::{ReportFormat, TagMode};

use crate::config::{Config, ConfigError};

/// Playtest reflection journaling: capture daemon and corpus compiler.
#[derive(Debug, Parser)]
#[command(name = "rda", version)]
pub struct Cli {
    /// Config file (default: ./rda.toml when present).
    #[arg(long, global = true, value_name = "FILE", env = "RDA_CONFIG")]
    config: Option<PathBuf>,

    /// Journal root; overrides the config file and RDA_STORE_ROOT.
    #[arg(long, global = true, value_name = "DIR")]
    store: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Create the journal root and a default config file.
    Init,
    /// Run the capture daemon: OBS control plus the bridge server.
    Serve(ServeArgs),
    /// Build reports, videos and the tag heatmap from the journal.
    Compile(CompileArgs),
    /// Print corpus statistics as JSON.
    Stats,
    /// Check the journal for schema, tag and file problems.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Bridge listen address, e.g. 127.0.0.1:7341.
    #[arg(long, value_name = "ADDR")]
    bind: Option<String>,
    /// OBS WebSocket URL.
    #[arg(long, value_name = "URL")]
    obs_url: Option<String>,
    /// Connection attempts before giving up.
    #[arg(long, value_name = "N")]
    obs_attempts: Option<u32>,
    /// Seconds without clients before an open test is saved as abandoned.
    #[arg(long, value_name = "SECS")]
    grace: Option<u64>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("what").required(true).multiple(true).args(["by_day", "tags", "heatmap"])))]
pub struct CompileArgs {
    /// One report and video per day.
    #[arg(long)]
    by_day: bool,
    /// Only this day (YYYY-MM-DD).
    #[arg(long, value_name = "DATE", requires = "by_day")]
    date: Option<chrono::NaiveDate>,
    /// Entries carrying these tags (comma separated).
    #[arg(long, value_name = "TAGS", value_delimiter = ',')]
    tags: Vec<String>,
    /// Whether entries need all tags or any of them.
    #[arg(long, value_name = "MODE", default_value = "and", value_parser = parse_mode, requires = "tags")]
    mode: TagMode,
    /// Tag co-occurrence heatmap (SVG and CSV).
    #[arg(long)]
    heatmap: bool,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Report format: pdf, md or txt.
    #[arg(long, value_name = "FORMAT", default_value = "pdf", value_parser = parse_format)]
    format: ReportFormat,
    /// Skip video processing.
    #[arg(long)]
    no_video: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

fn parse_mode(s: &str) -> Result<TagMode, String> {
    s.parse().map_err(|e: rda_core::Error| e.to_string())
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse()
}

/// A failed command: exit 1 for problems with the input or corpus, 2 for
/// problems with the environment.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Environment(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Environment(_) => 2,
        }
    }
}

impl From<rda_core::Error> for Failure {
    fn from(e: rda_core::Error) -> Self {
        use rda_core::Error as E;
        match e {
            E::Validation(_) | E::Input(_) => Failure::Invalid(e.to_string()),
            E::Persistence { .. } | E::Media(_) | E::Json { .. } => Failure::Environment(e.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Environment(e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut config = match (&cli.command, &cli.config) {
        // init may be asked to create the config file it is pointed at.
        (Command::Init, Some(path)) if !path.exists() => Config::load_defaults()?,
        _ => Config::load(cli.config.as_deref())?,
    };
    if let Some(store) = cli.store {
        config.store_root = store;
    }
    match cli.command {
        Command::Init => commands::init(&config, cli.config.as_deref()),
        Command::Serve(args) => commands::serve(config, args),
        Command::Compile(args) => commands::compile(&config, args),
        Command::Stats => commands::stats(&config),
        Command::Validate(args) => commands::validate(&config, args),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("RDA_LOG").unwrap_or_else(|_| "warn,rda=info,rda_core=info".into()),
        )
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
