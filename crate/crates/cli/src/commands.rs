use std::io::Write;
use std::path::Path;
use std::time::Duration;

use rda_core::bridge::{self, BridgeOptions};
use rda_core::compiler::{self, CompileOptions, Compilation, Compiler, TagQuery};
use rda_core::journal::{lint, JournalStore};
use rda_core::obs::{connect_with_retry, ObsRecorder};
use rda_core::session::{local_clock, Origin, Phase, SessionEngine, SessionEvent};
use rda_core::Warning;

use crate::config::{self, Config};
use crate::{CompileArgs, Failure, ServeArgs, ValidateArgs};

fn open_store(config: &Config) -> Result<JournalStore, Failure> {
    JournalStore::open(&config.store_root).map_err(|e| {
        Failure::Environment(format!("{e} (run `rda init` or set store_root / RDA_STORE_ROOT)"))
    })
}

fn report_warnings(warnings: &[Warning]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

pub fn init(config: &Config, config_path: Option<&Path>) -> Result<(), Failure> {
    let store = JournalStore::init(&config.store_root)?;
    println!("journal root: {}", store.root().display());
    let path = config_path.unwrap_or(Path::new(config::DEFAULT_CONFIG_FILE));
    if path.exists() {
        println!("config: {} (kept)", path.display());
        return Ok(());
    }
    // Store the root relative to the config file when possible.
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let base = std::path::absolute(parent)
        .map_err(|e| Failure::Environment(e.to_string()))?;
    let root = std::path::absolute(store.root()).map_err(|e| Failure::Environment(e.to_string()))?;
    let stored = root.strip_prefix(&base).map(Path::to_path_buf).unwrap_or(root.clone());
    std::fs::write(path, config::template(&stored))
        .map_err(|e| Failure::Environment(format!("cannot write {}: {e}", path.display())))?;
    println!("config: {} (created)", path.display());
    Ok(())
}

pub fn serve(mut config: Config, args: ServeArgs) -> Result<(), Failure> {
    if let Some(bind) = args.bind {
        config.bridge_bind = bind;
    }
    if let Some(url) = args.obs_url {
        config.obs_url = url;
    }
    if let Some(attempts) = args.obs_attempts {
        config.obs_connect_attempts = attempts;
    }
    if let Some(grace) = args.grace {
        config.disconnect_grace_secs = grace;
    }
    config.validate()?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Environment(e.to_string()))?;
    runtime.block_on(serve_async(config))
}

async fn serve_async(config: Config) -> Result<(), Failure> {
    let store = open_store(&config)?;
    let options = config.obs_options();
    let client = connect_with_retry(
        &options,
        config.obs_connect_attempts,
        Duration::from_millis(config.obs_retry_delay_ms),
    )
    .await
    .map_err(|e| {
        Failure::Environment(format!(
            "OBS not reachable at {} after {} attempt(s): {e}",
            options.url, config.obs_connect_attempts
        ))
    })?;
    let recorder = ObsRecorder::new(options, Some(client));
    let (session, _engine) = SessionEngine::spawn(store.clone(), recorder, local_clock())?;
    let server = bridge::serve(
        BridgeOptions {
            bind: config.bind()?,
            disconnect_grace: Duration::from_secs(config.disconnect_grace_secs),
        },
        session.clone(),
        store,
    )
    .await
    .map_err(|e| Failure::Environment(e.to_string()))?;
    println!("listening on {}", server.ws_url());
    let _ = std::io::stdout().flush();

    shutdown_signal().await;
    if matches!(session.state().phase, Phase::Recording | Phase::PostTest) {
        eprintln!("shutting down mid-test; saving it as abandoned");
        if let Err(e) = session.send(SessionEvent::ClientDisconnected, Origin::default()).await {
            eprintln!("warning: could not save the open test: {e}");
        }
    }
    server.shutdown();
    println!("stopped");
    Ok(())
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let mut term = signal(SignalKind::terminate()).expect("SIGTERM handler");
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

fn print_compilation(c: &Compilation) {
    report_warnings(&c.warnings);
    for path in c.report.iter().chain(&c.video) {
        println!("{}", path.display());
    }
}

pub fn compile(config: &Config, args: CompileArgs) -> Result<(), Failure> {
    let store = open_store(config)?;
    let output_dir = args.out.unwrap_or_else(|| config.output_dir.clone());
    let compiler = Compiler::new(
        store,
        CompileOptions {
            output_dir,
            format: args.format,
            transcoder: (!args.no_video).then(|| config.transcoder()),
        },
    );
    let hint = |e: rda_core::Error| match e {
        rda_core::Error::Media(m) => Failure::Environment(format!("{m} (use --no-video to compile reports only)")),
        other => other.into(),
    };
    if args.by_day {
        for c in compiler.compile_by_day(args.date).map_err(hint)? {
            print_compilation(&c);
        }
    }
    if !args.tags.is_empty() {
        let query = TagQuery::new(args.tags, args.mode)?;
        print_compilation(&compiler.compile_tags(query).map_err(hint)?);
    }
    if args.heatmap {
        let (heatmap, warnings) = compiler.heatmap()?;
        report_warnings(&warnings);
        println!("{}", heatmap.svg.display());
        println!("{}", heatmap.csv.display());
    }
    Ok(())
}

pub fn stats(config: &Config) -> Result<(), Failure> {
    let store = open_store(config)?;
    let (stats, warnings) = compiler::stats(&store)?;
    report_warnings(&warnings);
    println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize"));
    eprintln!(
        "{} entries over {} sessions (days), {} abandoned, {} bytes",
        stats.entry_count, stats.day_count, stats.abandoned_count, stats.total_bytes
    );
    Ok(())
}

pub fn validate(config: &Config, args: ValidateArgs) -> Result<(), Failure> {
    let store = open_store(config)?;
    let report = lint::lint(&store)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        for issue in &report.issues {
            println!("{}: {}", issue.path.display(), issue.message);
        }
        println!("{} entries checked, {} issue(s)", report.entries_checked, report.issues.len());
    }
    if report.is_clean() {
        Ok(())
    } else {
        Err(Failure::Invalid(format!("{} issue(s) found", report.issues.len())))
    }
}
