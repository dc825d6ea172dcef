use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use mediasync_core::bandwidth::ReportFormat;
use mediasync_core::handler::HandlerTree;
use mediasync_core::replay::{RealClock, ReplayClock, Replayer, VirtualClock};
use mediasync_core::session::{load_log, RolePolicy, SessionLogEntry};
use mediasync_harness::fixtures;
use mediasync_harness::fuzz::fuzz_session;
use mediasync_harness::live::run_live;
use mediasync_harness::logreport::report_from_log;
use mediasync_harness::oracle::state_texts;
use mediasync_harness::runner::{run_scenario, HarnessResult, RunOptions};
use mediasync_harness::scenario::Scenario;

#[derive(Parser)]
#[command(name = "mediasync-sim", version, about = "Scripted virtual clients for the mediasync session server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a fixture name (video, pdf, image, webpage).
    Run {
        scenario: String,
        #[arg(long, default_value_t = 3)]
        clients: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Add an audience client joining at this time (ms).
        #[arg(long)]
        late_join: Option<u64>,
        /// Request a resync of every block at this time (ms).
        #[arg(long)]
        probe: Option<u64>,
        #[arg(long, default_value_t = 0)]
        faults: usize,
        #[arg(long, default_value = "presenter-only")]
        policy: RolePolicy,
        /// Write the session log here.
        #[arg(long)]
        log_out: Option<PathBuf>,
        #[arg(long, default_value = "table")]
        format: ReportFormat,
        /// Target a live server (`http://host:port`) instead of an in-process one.
        #[arg(long)]
        live: Option<String>,
        /// With --live, honour scripted times at this speed.
        #[arg(long)]
        pace: Option<f64>,
    },
    /// Run seeded random sessions.
    Fuzz {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Number of consecutive seeds starting at --seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, default_value_t = 500)]
        events: usize,
        #[arg(long, default_value_t = 4)]
        clients: usize,
        /// Directory for minimized failing scripts.
        #[arg(long, default_value = "fuzz-failures")]
        out: PathBuf,
    },
    /// Replay a session log and print the final states.
    Replay {
        log: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        pace: f64,
        /// Print the states at these times (ms) instead of playing through.
        #[arg(long)]
        seek: Vec<u64>,
        /// Wait in real time instead of jumping between entries.
        #[arg(long)]
        realtime: bool,
    },
    /// Bandwidth report rebuilt from a session log.
    Report {
        log: PathBuf,
        #[arg(long, default_value = "table")]
        format: ReportFormat,
    },
    /// Write the fixture scenarios as scenario files.
    Fixtures {
        #[arg(long, default_value = "fixtures")]
        out: PathBuf,
    },
}

fn load_scenario(arg: &str) -> anyhow::Result<Scenario> {
    if let Some(s) = fixtures::by_name(arg) {
        return Ok(s);
    }
    let text = std::fs::read_to_string(arg).with_context(|| format!("reading {arg}"))?;
    Scenario::parse(&text).with_context(|| format!("parsing {arg}"))
}

fn print_result(result: &HarnessResult, format: ReportFormat) -> bool {
    print!("{}", result.summary());
    print!("{}", result.report.emit(format));
    result.passed()
}

fn print_states(states: &std::collections::BTreeMap<String, String>) {
    for (id, text) in states {
        println!("{id} {text}");
    }
}

fn replay(path: &Path, pace: f64, seek: &[u64], realtime: bool) -> anyhow::Result<bool> {
    let entries: Vec<SessionLogEntry> = load_log(path)?;
    let tree = HandlerTree::standard();
    let mut replayer = Replayer::new(entries, &tree);
    if !seek.is_empty() {
        for t in seek {
            println!("@{t} ms");
            print_states(&state_texts(replayer.seek(*t)));
        }
        return Ok(true);
    }
    let clock: Box<dyn ReplayClock> = if realtime { Box::new(RealClock::new()) } else { Box::new(VirtualClock::new()) };
    let mut sink = |entry: &SessionLogEntry, _at: std::time::Duration| {
        println!("{:>8} ms  #{} {} {}", entry.received_at, entry.global_seq, entry.sender_id, entry.message.type_name());
        Ok(())
    };
    let run = replayer.run_timed(pace, clock.as_ref(), &mut sink)?;
    println!("replayed {} entries, max deviation {:?}", run.emitted, run.max_deviation);
    for fault in replayer.faults() {
        println!("skipped #{}: {}", fault.global_seq, fault.reason);
    }
    print_states(&state_texts(replayer.states()));
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run {
            scenario,
            clients,
            seed,
            late_join,
            probe,
            faults,
            policy,
            log_out,
            format,
            live,
            pace,
        } => {
            let scenario = load_scenario(&scenario)?;
            let options = RunOptions {
                clients,
                seed,
                policy,
                late_join_at: late_join,
                probe_at: probe,
                faults,
                log_path: log_out.clone(),
            };
            let result = match live {
                Some(base) => {
                    let runtime = tokio::runtime::Runtime::new()?;
                    let result = runtime.block_on(run_live(&base, &scenario, &options, pace))?;
                    if let Some(path) = &log_out {
                        mediasync_core::session::persist_log(path, &result.log)?;
                    }
                    result
                }
                None => run_scenario(&scenario, &options),
            };
            Ok(print_result(&result, format))
        }
        Command::Fuzz {
            seed,
            seeds,
            events,
            clients,
            out,
        } => {
            let mut ok = true;
            for s in seed..seed + seeds {
                let verdict = fuzz_session(s, events, clients, Some(&out));
                print!("seed {s}: {}", verdict.result.summary());
                if let Some(path) = &verdict.written {
                    println!("  minimized script written to {}", path.display());
                }
                ok &= verdict.passed();
            }
            Ok(ok)
        }
        Command::Replay {
            log,
            pace,
            seek,
            realtime,
        } => replay(&log, pace, &seek, realtime),
        Command::Report { log, format } => {
            let entries = load_log(&log)?;
            let id = log.file_stem().map_or("session".into(), |s| s.to_string_lossy().into_owned());
            print!("{}", report_from_log(&id, &entries).emit(format));
            Ok(true)
        }
        Command::Fixtures { out } => {
            std::fs::create_dir_all(&out)?;
            for s in fixtures::all() {
                let path = out.join(format!("{}.scn", s.name));
                std::fs::write(&path, s.to_text())?;
                println!("{}", path.display());
            }
            Ok(true)
        }
    }
}
