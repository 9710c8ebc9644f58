//! Data files written for each run.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use voipsim_core::engine::TraceLine;
use voipsim_core::metrics::{bucketize, jitter_pairs, BucketConfig, QoSBucket, VoicePacketRecord};
use voipsim_core::net::PathSegmentTrace;
use voipsim_core::sim::{SessionLogLine, SimOutput};
use voipsim_core::traffic::Direction;
use voipsim_core::ScenarioSpec;

pub const METRICS_HEADER: &str =
    "scenario,seed,direction,window_start_s,samples,jitter_s,e2e_s,pdv_s2,mos,delay_class,jitter_class";

/// Buckets for one direction of travel between the two subnets.
#[derive(Debug, Clone)]
pub struct DirectionSeries {
    /// `source->destination` subnet names.
    pub label: String,
    pub buckets: Vec<QoSBucket>,
}

pub fn bucket_config(spec: &ScenarioSpec) -> BucketConfig {
    BucketConfig { width: spec.bucket_width, warm_up: spec.warm_up, run_length: spec.run_length, emodel: spec.emodel }
}

/// Both directions, first subnet to second first, each with every window.
pub fn direction_series(spec: &ScenarioSpec, out: &SimOutput) -> Vec<DirectionSeries> {
    let mut by_dir = out.records_by_subnet_direction();
    let cfg = bucket_config(spec);
    [(0u8, 1u8), (1, 0)]
        .into_iter()
        .map(|(a, b)| {
            let recs = by_dir.remove(&(a, b)).unwrap_or_default();
            DirectionSeries {
                label: format!("{}->{}", spec.subnets[a as usize].name, spec.subnets[b as usize].name),
                buckets: bucketize(&recs, &spec.codec, &cfg),
            }
        })
        .collect()
}

/// Fixed nine fractional digits.
pub fn fmt9(x: f64) -> String {
    let s = format!("{x:.9}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn opt9(x: Option<f64>) -> String {
    x.map(fmt9).unwrap_or_default()
}

pub fn metrics_csv(scenario: &str, seed: u64, series: &[DirectionSeries]) -> String {
    let mut s = String::with_capacity(128 * series.iter().map(|d| d.buckets.len()).sum::<usize>());
    s.push_str(METRICS_HEADER);
    s.push('\n');
    for d in series {
        for b in &d.buckets {
            let _ = writeln!(
                s,
                "{scenario},{seed},{},{},{},{},{},{},{},{},{}",
                d.label,
                fmt9(b.window_start.as_secs_f64()),
                b.sample_count,
                opt9(b.mean_jitter_s),
                opt9(b.mean_e2e_s),
                opt9(b.pdv_s2),
                opt9(b.mos),
                b.delay_class.map(|g| g.as_str()).unwrap_or_default(),
                b.jitter_class.map(|g| g.as_str()).unwrap_or_default(),
            );
        }
    }
    s
}

/// Raw per-pair jitter of every flow: arrival spacing minus send spacing.
pub fn jitter_pairs_csv(spec: &ScenarioSpec, out: &SimOutput) -> String {
    let mut s = String::from("direction,call_id,seq,t_recv_s,jitter_s\n");
    for ((a, b), recs) in out.records_by_subnet_direction() {
        let label = format!("{}->{}", spec.subnets[a as usize].name, spec.subnets[b as usize].name);
        let mut flows: std::collections::BTreeMap<(u32, Direction), Vec<&VoicePacketRecord>> = Default::default();
        for r in &recs {
            flows.entry((r.call_id, r.direction)).or_default().push(r);
        }
        for ((call, _), flow) in flows {
            let recv: std::collections::BTreeMap<u32, f64> = flow
                .iter()
                .filter_map(|r| r.t_recv.map(|t| (r.seq, t.as_secs_f64())))
                .collect();
            for (seq, diff) in jitter_pairs(flow.iter().copied()) {
                let _ = writeln!(s, "{label},{call},{seq},{},{}", fmt9(recv[&seq]), fmt9(diff as f64 / 1e6));
            }
        }
    }
    s
}

pub fn event_trace(lines: &[TraceLine]) -> String {
    let mut s = String::with_capacity(lines.len() * 32);
    for l in lines {
        let _ = writeln!(s, "{} {} {} {}", l.ticks, l.seq, l.target, l.kind);
    }
    s
}

pub fn path_trace_csv(traces: &[PathSegmentTrace]) -> String {
    let mut s = String::from("packet_id,segment,ingress_ticks,egress_ticks,drop_reason\n");
    for t in traces {
        for sp in &t.spans {
            let _ = writeln!(s, "{},{},{},{},", t.packet_id, sp.hop, sp.ingress.as_micros(), sp.egress.as_micros());
        }
        if let Some((hop, reason, at)) = t.drop {
            let ingress = t.spans.last().map_or(at, |sp| sp.egress);
            let _ = writeln!(s, "{},{hop},{},{},{}", t.packet_id, ingress.as_micros(), at.as_micros(), reason.as_str());
        }
    }
    s
}

pub fn session_log(lines: &[SessionLogLine]) -> String {
    let mut s = String::new();
    for l in lines {
        let _ = writeln!(s, "{} {} {}→{}", l.ticks, l.session_id, l.from, l.to);
    }
    s
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_digits_and_no_negative_zero() {
        assert_eq!(fmt9(0.1), "0.100000000");
        assert_eq!(fmt9(-0.005), "-0.005000000");
        assert_eq!(fmt9(-1e-12), "0.000000000");
        assert_eq!(fmt9(3600.0), "3600.000000000");
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/x.csv");
        write_atomic(&p, b"a").unwrap();
        write_atomic(&p, b"b").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"b");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
