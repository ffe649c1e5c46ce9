//! `parkctl`: run simulations, replay and summarise event logs, decode
//! frames, and run the hub.
//!
//! Machine-readable JSON goes to stdout; everything else goes to stderr.
//! Log verbosity comes from `PARKCTL_LOG_LEVEL`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use parklot::hub::http::{self, Clock};
use parklot::hub::{self, tcp, Hub, HubConfig, LotView, ReplayError};
use parklot::lot::LotConfig;
use parklot::report::{summarize_log, ReportSummary};
use parklot::sim::{Scenario, Simulation};
use parklot::wire;

#[derive(Debug, Parser)]
#[command(name = "parkctl", version, about = "Smart parking lot tools")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run a seeded simulation and print its summary.
    Sim(SimArgs),
    /// Rebuild the final lot view from an event log.
    Replay(ReplayArgs),
    /// Compute run statistics from an event log.
    Report(ReportArgs),
    /// Decode one hex-encoded frame.
    Decode { hex: String },
    /// Run the hub: TCP ingestion for controllers plus the HTTP API.
    Hub(HubArgs),
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long, default_value_t = 4)]
    slots: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Arrivals per second.
    #[arg(long, default_value_t = 0.05)]
    arrival_rate: f64,
    /// Mean stay in seconds.
    #[arg(long, default_value_t = 600.0)]
    mean_stay: f64,
    /// Simulated time in seconds.
    #[arg(long, default_value_t = 3600.0)]
    horizon: f64,
    /// Probability that a sensor sample is inverted.
    #[arg(long, default_value_t = 0.0)]
    flicker: f64,
    /// Scenario JSON file; overrides the traffic flags above.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Event log output (JSON Lines).
    #[arg(long)]
    log: Option<PathBuf>,
    /// Serve the hub HTTP API at this address during the run. Implies
    /// --realtime.
    #[arg(long, value_name = "ADDR")]
    serve: Option<SocketAddr>,
    /// Print a table instead of JSON.
    #[arg(long)]
    pretty: bool,
    /// Pace the simulation at wall-clock speed.
    #[arg(long)]
    realtime: bool,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    log: PathBuf,
    /// Lot to print; needed when the log holds several.
    #[arg(long)]
    lot: Option<u8>,
    /// Configured size of the lot, used when the log is empty.
    #[arg(long, default_value_t = 4)]
    slots: usize,
}

#[derive(Debug, Args)]
struct ReportArgs {
    log: PathBuf,
    #[arg(long)]
    lot: Option<u8>,
    #[arg(long)]
    pretty: bool,
}

#[derive(Debug, Args)]
struct HubArgs {
    /// HTTP API address.
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    /// TCP address controllers connect to.
    #[arg(long, default_value = "127.0.0.1:7070")]
    ingest: SocketAddr,
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = 5000)]
    heartbeat_ms: u64,
    /// Pre-register a lot as ID:SLOTS. Repeatable.
    #[arg(long = "lot", value_parser = parse_lot)]
    lots: Vec<(u8, usize)>,
}

fn parse_lot(s: &str) -> Result<(u8, usize), String> {
    let (id, n) = s.split_once(':').ok_or("expected ID:SLOTS")?;
    Ok((
        id.parse().map_err(|e| format!("lot id: {e}"))?,
        n.parse().map_err(|e| format!("slot count: {e}"))?,
    ))
}

/// Runtime failure: message for stderr, exit code 1.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string(value).expect("serialisable"));
}

fn open_log(path: &Path) -> Result<Box<dyn Write + Send>, Failure> {
    let f = File::create(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    Ok(Box::new(BufWriter::new(f)))
}

fn scenario_from(args: &SimArgs) -> Result<Scenario, Failure> {
    let scenario = match &args.scenario {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure(format!("{}: {e}", path.display())))?;
            Scenario::from_json(&text)?
        }
        None => {
            if !args.horizon.is_finite() || args.horizon <= 0.0 {
                return Err(Failure("--horizon must be positive".into()));
            }
            Scenario {
                seed: args.seed,
                arrival_rate: args.arrival_rate,
                mean_stay_s: args.mean_stay,
                horizon_ms: (args.horizon * 1000.0).round() as u64,
                flicker_p: args.flicker,
                explicit_events: None,
            }
        }
    };
    scenario.validate()?;
    Ok(scenario)
}

fn cmd_sim(args: SimArgs) -> Result<(), Failure> {
    let scenario = scenario_from(&args)?;
    let config = LotConfig::with_slots(args.slots);
    config.validate()?;
    let hub_config = Simulation::hub_for(&config);
    let hub = match &args.log {
        Some(path) => Hub::with_log(hub_config, open_log(path)?),
        None => Hub::new(hub_config),
    };
    let mut sim = Simulation::new(config.clone(), &scenario, hub.clone())?;
    let realtime = args.realtime || args.serve.is_some();
    let sim_time = Arc::new(AtomicU64::new(0));

    let runtime = match args.serve {
        Some(addr) => {
            sim.enable_control();
            let rt = tokio::runtime::Runtime::new()?;
            let listener = rt.block_on(http::bind(addr))?;
            eprintln!("serving hub API on http://{}", listener.local_addr()?);
            let t = sim_time.clone();
            let clock: Clock = Arc::new(move || t.load(Ordering::SeqCst));
            rt.spawn(async move {
                if let Err(e) = http::serve(listener, hub, clock).await {
                    log::error!("http server stopped: {e}");
                }
            });
            Some(rt)
        }
        None => None,
    };

    let period = Duration::from_millis(config.sample_period_ms);
    let started = Instant::now();
    while sim.step()?.is_some() {
        sim_time.store(sim.now_ms(), Ordering::SeqCst);
        if realtime {
            let due = started + Duration::from_millis(sim.now_ms());
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait.min(period));
            }
        }
    }
    let outcome = sim.finish()?;
    drop(runtime);

    if args.pretty {
        print!("{}", outcome.stats.to_table());
        println!(
            "final: {} available of {}, barrier {}",
            outcome.final_view.snapshot.available(),
            outcome.final_view.snapshot.slot_count(),
            outcome.final_view.snapshot.barrier()
        );
    } else {
        print_json(&json!({ "summary": outcome.stats, "final_view": outcome.final_view }));
    }
    Ok(())
}

fn replay_failure(e: ReplayError) -> Failure {
    match &e {
        ReplayError::GapDetected { .. } | ReplayError::CorruptRecord { .. } => {
            Failure(format!("{}: {e}", e.name()))
        }
        ReplayError::Io(_) => Failure(e.to_string()),
    }
}

fn cmd_replay(args: ReplayArgs) -> Result<(), Failure> {
    let file =
        File::open(&args.log).map_err(|e| Failure(format!("{}: {e}", args.log.display())))?;
    let configured: Vec<(u8, usize)> = args.lot.map(|id| (id, args.slots)).into_iter().collect();
    let views = hub::replay_jsonl(BufReader::new(file), &configured).map_err(replay_failure)?;
    let view = match args.lot {
        Some(id) => views
            .get(&id)
            .cloned()
            .ok_or_else(|| Failure(format!("lot {id} not in log")))?,
        None => match views.len() {
            0 => LotView::initial(1, args.slots),
            1 => views.into_values().next().expect("one view"),
            _ => {
                let ids: Vec<u8> = views.keys().copied().collect();
                return Err(Failure(format!(
                    "log holds lots {ids:?}; pick one with --lot"
                )));
            }
        },
    };
    print_json(&view);
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), Failure> {
    let file =
        File::open(&args.log).map_err(|e| Failure(format!("{}: {e}", args.log.display())))?;
    let records = hub::read_jsonl(BufReader::new(file)).map_err(replay_failure)?;
    let summary: ReportSummary = summarize_log(&records, args.lot)?;
    if args.pretty {
        print!("{}", summary.to_table());
    } else {
        print_json(&summary);
    }
    Ok(())
}

fn cmd_decode(text: &str) -> ExitCode {
    let cleaned: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bytes = match hex::decode(&cleaned) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("parkctl: not hex: {e}");
            return ExitCode::from(2);
        }
    };
    match wire::decode_frame_verbose(&bytes) {
        Ok(decoded) => {
            print_json(&decoded);
            ExitCode::SUCCESS
        }
        Err(e) => {
            print_json(&json!({ "error": e.name() }));
            eprintln!("parkctl: {e}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_hub(args: HubArgs) -> Result<(), Failure> {
    let config = HubConfig {
        heartbeat_ms: args.heartbeat_ms,
        ..HubConfig::default()
    };
    let hub = match &args.log {
        Some(path) => Hub::with_log(config, open_log(path)?),
        None => Hub::new(config),
    };
    let clock = http::wall_clock();
    for &(id, slots) in &args.lots {
        hub.register_lot(id, slots, clock())?;
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let api = http::bind(args.listen).await?;
        let ingest = tokio::net::TcpListener::bind(args.ingest).await?;
        eprintln!(
            "hub API on http://{}, controller ingest on {}",
            api.local_addr()?,
            ingest.local_addr()?
        );
        tokio::spawn(http::liveness_loop(hub.clone(), clock.clone()));
        tokio::select! {
            r = http::serve(api, hub.clone(), clock.clone()) => r,
            r = tcp::serve_ingest(ingest, hub, clock) => r,
        }
    })?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PARKCTL_LOG_LEVEL", "warn"))
        .target(env_logger::Target::Stderr)
        .init();

    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Sim(a) => cmd_sim(a),
        Cmd::Replay(a) => cmd_replay(a),
        Cmd::Report(a) => cmd_report(a),
        Cmd::Decode { hex } => return cmd_decode(&hex),
        Cmd::Hub(a) => cmd_hub(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(msg)) => {
            eprintln!("parkctl: {msg}");
            ExitCode::FAILURE
        }
    }
}
