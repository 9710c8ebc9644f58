//! Run orchestration: repetitions, output directories and manifests.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;
use voipsim_core::sim::{SimOptions, SimOutput, Simulation};
use voipsim_core::{ScenarioSpec, SimTime};

use crate::config::{emit, ScenarioFile};
use crate::output::{self, direction_series, write_atomic, DirectionSeries};

#[derive(Debug, Clone, Default)]
pub struct RunRequest {
    /// Overrides the scenario's master seed.
    pub seed: Option<u64>,
    /// Overrides the scenario's repetition count.
    pub reps: Option<u32>,
    pub out_dir: PathBuf,
    /// Write the event trace and per-packet path trace.
    pub trace: bool,
    pub session_log: bool,
    /// Write the raw per-pair jitter series.
    pub jitter_pairs: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub seed: u64,
    pub dir: PathBuf,
    pub metrics_csv: PathBuf,
    pub manifest: PathBuf,
    /// The run stopped on a fault; outputs cover the time before it.
    pub fault: Option<String>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("run faulted (seed {seed}): {message}")]
    Fault { seed: u64, message: String, outputs: Vec<RunOutput> },
}

/// SHA-256 of the canonical scenario text.
pub fn spec_hash(spec: &ScenarioSpec) -> String {
    hex::encode(Sha256::digest(emit(spec).as_bytes()))
}

/// Run `spec` to its full length with `seed`. On a fault the partial output
/// is returned together with the message.
pub fn simulate(spec: &ScenarioSpec, seed: u64, opts: SimOptions) -> (SimOutput, Option<String>) {
    let mut sim = match Simulation::new(spec, seed, opts) {
        Ok(sim) => sim,
        Err(e) => panic!("scenario was validated before running: {e}"),
    };
    let fault = sim.run_until(SimTime::ZERO + spec.run_length).err().map(|e| e.to_string());
    (sim.finish(), fault)
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    spec_hash: String,
    seed: u64,
    repetition: u32,
    partial: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    fault: Option<&'a str>,
    outputs: Vec<String>,
    stats: Stats,
    spec: ScenarioFile,
}

#[derive(Serialize)]
struct Stats {
    events_processed: u64,
    packets_created: u64,
    packets_delivered: u64,
    packets_dropped: u64,
    packets_in_flight: u64,
    drops_collision_retry_exhausted: u64,
    drops_bler_retx_exhausted: u64,
    drops_cloud_loss: u64,
    drops_queue_overflow: u64,
    calls_attempted: u64,
    calls_blocked: u64,
    sessions_established: u64,
    setups_failed: u64,
    sessions_closed: u64,
    sessions_open_at_end: u64,
    protocol_violations: u64,
    sip_sent: u64,
    sip_delivered: u64,
    sip_dropped: u64,
    wifi_collisions: u64,
    umts_block_errors: u64,
}

fn stats(out: &SimOutput) -> Stats {
    let s = &out.summary;
    Stats {
        events_processed: out.stats.events_processed,
        packets_created: out.stats.packets_created,
        packets_delivered: out.stats.packets_delivered,
        packets_dropped: out.stats.packets_dropped,
        packets_in_flight: s.media_in_flight_at_end,
        drops_collision_retry_exhausted: s.media_drops.collision_retry_exhausted,
        drops_bler_retx_exhausted: s.media_drops.bler_retx_exhausted,
        drops_cloud_loss: s.media_drops.cloud_loss,
        drops_queue_overflow: s.media_drops.queue_overflow,
        calls_attempted: s.calls_attempted,
        calls_blocked: s.calls_blocked,
        sessions_established: s.sessions_established,
        setups_failed: s.setups_failed,
        sessions_closed: s.sessions_closed,
        sessions_open_at_end: s.sessions_open_at_end,
        protocol_violations: s.protocol_violations,
        sip_sent: s.sip_sent,
        sip_delivered: s.sip_delivered,
        sip_dropped: s.sip_dropped,
        wifi_collisions: s.wifi_collisions,
        umts_block_errors: s.umts_block_errors,
    }
}

fn write(path: &Path, contents: &str) -> Result<(), RunError> {
    write_atomic(path, contents.as_bytes()).map_err(|source| RunError::Io { path: path.to_path_buf(), source })
}

/// Everything one repetition produces, before anything touches the disk.
pub struct Repetition {
    pub seed: u64,
    pub index: u32,
    pub output: SimOutput,
    pub series: Vec<DirectionSeries>,
    pub fault: Option<String>,
}

pub fn run_repetition(spec: &ScenarioSpec, seed: u64, index: u32, req: &RunRequest) -> Repetition {
    let opts = SimOptions { trace_events: req.trace, trace_paths: req.trace, session_log: req.session_log };
    let (output, fault) = simulate(spec, seed, opts);
    let series = direction_series(spec, &output);
    Repetition { seed, index, output, series, fault }
}

fn write_repetition(spec: &ScenarioSpec, rep: &Repetition, req: &RunRequest) -> Result<RunOutput, RunError> {
    let dir = req.out_dir.join(&spec.name).join(format!("seed-{}", rep.seed));
    let mut outputs = vec![String::from("metrics.csv")];
    let metrics = dir.join("metrics.csv");
    write(&metrics, &output::metrics_csv(&spec.name, rep.seed, &rep.series))?;
    if req.trace {
        write(&dir.join("events.txt"), &output::event_trace(&rep.output.event_trace))?;
        write(&dir.join("paths.csv"), &output::path_trace_csv(&rep.output.path_traces))?;
        outputs.extend([String::from("events.txt"), String::from("paths.csv")]);
    }
    if req.session_log {
        write(&dir.join("sessions.txt"), &output::session_log(&rep.output.session_log))?;
        outputs.push(String::from("sessions.txt"));
    }
    if req.jitter_pairs {
        write(&dir.join("jitter_pairs.csv"), &output::jitter_pairs_csv(spec, &rep.output))?;
        outputs.push(String::from("jitter_pairs.csv"));
    }
    let manifest = Manifest {
        tool: "voipsim",
        version: env!("CARGO_PKG_VERSION"),
        spec_hash: spec_hash(spec),
        seed: rep.seed,
        repetition: rep.index,
        partial: rep.fault.is_some(),
        fault: rep.fault.as_deref(),
        outputs,
        stats: stats(&rep.output),
        spec: ScenarioFile::from_spec(spec),
    };
    let manifest_path = dir.join("manifest.toml");
    write(&manifest_path, &toml::to_string(&manifest).expect("manifest serializes"))?;
    Ok(RunOutput { seed: rep.seed, dir, metrics_csv: metrics, manifest: manifest_path, fault: rep.fault.clone() })
}

/// Seeds of each repetition: `master_seed + k`.
pub fn repetition_seeds(spec: &ScenarioSpec, req: &RunRequest) -> Vec<u64> {
    let base = req.seed.unwrap_or(spec.master_seed);
    let reps = req.reps.unwrap_or(spec.repetitions);
    (0..reps as u64).map(|k| base.wrapping_add(k)).collect()
}

/// Run every repetition, in parallel, and write its outputs.
pub fn run_scenario(spec: &ScenarioSpec, req: &RunRequest) -> Result<Vec<RunOutput>, RunError> {
    let seeds = repetition_seeds(spec, req);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).max(1);
    let mut outputs = Vec::with_capacity(seeds.len());
    for chunk in seeds.chunks(workers).enumerate() {
        let (c, chunk) = chunk;
        let reps: Vec<Repetition> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .enumerate()
                .map(|(i, &seed)| {
                    let index = (c * workers + i) as u32;
                    s.spawn(move || run_repetition(spec, seed, index, req))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
        });
        for rep in &reps {
            outputs.push(write_repetition(spec, rep, req)?);
        }
    }
    if let Some(o) = outputs.iter().find(|o| o.fault.is_some()) {
        return Err(RunError::Fault { seed: o.seed, message: o.fault.clone().unwrap_or_default(), outputs });
    }
    Ok(outputs)
}
