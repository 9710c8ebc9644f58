use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};
use voipsim::compare::{compare_dirs, Mode};
use voipsim::config::resolve_scenario;
use voipsim::output::write_atomic;
use voipsim::runner::{run_scenario, RunError, RunRequest};
use voipsim::{mos_report, MosInput, EXIT_CONFIG, EXIT_FAULT};
use voipsim_core::traffic::CodecProfile;

#[derive(Parser)]
#[command(name = "voipsim", version, about = "Discrete-event VoIP simulator over WiFi and UMTS subnets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write metrics, manifest and optional traces.
    Run {
        /// Scenario file, or one of: wifi-wifi, umts-umts, wifi-umts.
        #[arg(long)]
        scenario: String,
        /// Master seed; repetition k uses seed + k.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of repetitions; overrides the scenario file
        #[arg(long)]
        reps: Option<u32>,
        #[arg(long, env = "VOIPSIM_OUT", default_value = "out")]
        out: PathBuf,
        /// Write the event trace and per-packet path trace.
        #[arg(long)]
        trace: bool,
        /// Write SIP session transitions.
        #[arg(long)]
        session_log: bool,
        /// Write the raw per-pair jitter series.
        #[arg(long)]
        jitter_pairs: bool,
    },
    /// Merge the metrics of several run directories.
    Compare {
        #[arg(long, value_enum)]
        mode: Mode,
        /// Output file; standard output when omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Run directories, each holding metrics.csv and manifest.toml
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
    /// E-model calculator.
    #[command(group(ArgGroup::new("input").required(true).args(["r", "delay"])))]
    Mos {
        /// Transmission rating factor
        #[arg(long, allow_negative_numbers = true)]
        r: Option<f64>,
        /// Mouth-to-ear delay in ms.
        #[arg(long, requires = "loss", allow_negative_numbers = true)]
        delay: Option<f64>,
        /// Packet loss in percent.
        #[arg(long, requires = "delay")]
        loss: Option<f64>,
        #[arg(long, default_value = "g711")]
        codec: String,
    },
}

fn fail(code: i32, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, seed, reps, out, trace, session_log, jitter_pairs } => {
            let spec = match resolve_scenario(&scenario) {
                Ok(s) => s,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            if reps == Some(0) {
                return fail(EXIT_CONFIG, "--reps must be >= 1");
            }
            let req = RunRequest { seed, reps, out_dir: out, trace, session_log, jitter_pairs };
            match run_scenario(&spec, &req) {
                Ok(outputs) => {
                    for o in outputs {
                        println!("{}", o.metrics_csv.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(RunError::Fault { seed, message, outputs }) => {
                    for o in outputs.iter().filter(|o| o.fault.is_some()) {
                        eprintln!("partial output: {}", o.dir.display());
                    }
                    fail(EXIT_FAULT, format!("seed {seed}: {message}"))
                }
                Err(e @ RunError::Io { .. }) => fail(EXIT_FAULT, e),
            }
        }
        Command::Compare { mode, output, runs } => match compare_dirs(&runs, mode) {
            Ok(text) => match output {
                Some(path) => match write_atomic(&path, text.as_bytes()) {
                    Ok(()) => ExitCode::SUCCESS,
                    Err(e) => fail(EXIT_FAULT, format!("{}: {e}", path.display())),
                },
                None => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
            },
            Err(e) => fail(EXIT_CONFIG, e),
        },
        Command::Mos { r, delay, loss, codec } => {
            let codec = match CodecProfile::builtin(&codec) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            let input = match (r, delay, loss) {
                (Some(r), _, _) => MosInput::R(r),
                (None, Some(delay_ms), Some(loss_pct)) => MosInput::DelayLoss { delay_ms, loss_pct },
                _ => return fail(EXIT_CONFIG, "give --r, or --delay with --loss"),
            };
            match mos_report(input, &codec) {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(EXIT_CONFIG, e),
            }
        }
    }
}
