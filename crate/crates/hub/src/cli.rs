//! Command-line interface. Exit codes: 0 success, 1 usage, 2 runtime failure.

use crate::report;
use crate::server::{ServeOptions, Server};
use crate::simulate::{events_jsonl, render_summary, simulate, Mode};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use homesense_core::hub::HubConfig;
use homesense_core::metrics::MetricsStore;
use homesense_core::sim::{FaultProfile, ScenarioScript};
use std::ffi::OsString;
use std::io::Write;
use std::net::IpAddr;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "homesense", version, about = "Furniture sensing hub: simulation, replay, live service and reports")]
pub struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run an end-to-end simulated session from a scenario script.
    Simulate(SimulateArgs),
    /// Rebuild daily aggregates from an event log and print them as JSON.
    Replay(ReplayArgs),
    /// Run the hub with UDP ingest and the UI API.
    Serve(ServeArgs),
    /// Print the weekly summary table for a store.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Fault profile (TOML); defaults to the config's profile.
    #[arg(long)]
    faults: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Play the session against the wall clock.
    #[arg(long, conflicts_with = "fast")]
    realtime: bool,
    /// Virtual clock (default).
    #[arg(long)]
    fast: bool,
    /// Persist events and aggregates to this store directory.
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write every hub event as JSON lines to this file.
    #[arg(long)]
    events: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long)]
    log: PathBuf,
    /// Write the aggregates here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    udp_port: Option<u16>,
    #[arg(long)]
    bind: Option<IpAddr>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    store: PathBuf,
    /// First day of the week, YYYY-MM-DD.
    #[arg(long)]
    week: NaiveDate,
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let result = match cli.command {
        Cmd::Simulate(a) => cmd_simulate(a, out),
        Cmd::Replay(a) => cmd_replay(a, out),
        Cmd::Serve(a) => cmd_serve(a, err),
        Cmd::Report(a) => cmd_report(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<HubConfig, String> {
    match path {
        Some(p) => HubConfig::load(p).map_err(|e| format!("{}: {e}", p.display())),
        None => Ok(HubConfig::default()),
    }
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_simulate(a: SimulateArgs, out: &mut dyn Write) -> Result<(), String> {
    let config = load_config(a.config.as_deref())?;
    let script = ScenarioScript::parse(&read(&a.scenario)?).map_err(|e| format!("{}: {e}", a.scenario.display()))?;
    let faults = match &a.faults {
        Some(p) => FaultProfile::from_toml(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))?,
        None => config.faults.clone(),
    };
    let mode = if a.realtime { Mode::Realtime } else { Mode::Fast };
    let (_, result) = simulate(&script, a.seed, &faults, &config, mode, a.store.as_deref())?;
    if let Some(p) = &a.events {
        std::fs::write(p, events_jsonl(&result.outcome.events)).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    write!(out, "{}", render_summary(&result, mode)).map_err(|e| e.to_string())
}

fn cmd_replay(a: ReplayArgs, out: &mut dyn Write) -> Result<(), String> {
    let config = load_config(a.config.as_deref())?;
    let store = MetricsStore::replay_file(&a.log, config.day_parts).map_err(|e| format!("{}: {e}", a.log.display()))?;
    let json = store.aggregates_json();
    match &a.out {
        Some(p) => std::fs::write(p, json).map_err(|e| format!("{}: {e}", p.display())),
        None => write!(out, "{json}").map_err(|e| e.to_string()),
    }
}

fn cmd_report(a: ReportArgs, out: &mut dyn Write) -> Result<(), String> {
    let config = load_config(a.config.as_deref())?;
    let table = report::report(&a.store, a.week, &config)?;
    write!(out, "{table}").map_err(|e| e.to_string())
}

fn cmd_serve(a: ServeArgs, err: &mut dyn Write) -> Result<(), String> {
    let config = load_config(a.config.as_deref())?;
    let bind = match a.bind {
        Some(b) => b,
        None => config.server.bind.parse().map_err(|e| format!("bind address {:?}: {e}", config.server.bind))?,
    };
    let opts = ServeOptions {
        bind,
        port: a.port.unwrap_or(config.server.port),
        udp_port: a.udp_port.unwrap_or(config.server.udp_port),
        store: a.store.unwrap_or_else(|| config.server.store.clone()),
        start_at: chrono::Local::now().naive_local(),
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let server = Server::bind(config, &opts).await.map_err(|e| e.to_string())?;
        let _ = writeln!(
            err,
            "homesense: http://{} (ws /ws, snapshot /snapshot), udp {}, store {}",
            server.http_addr(),
            server.udp_addr(),
            opts.store.display()
        );
        server
            .run(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| e.to_string())
    })
}
