//! Voice quality metrics over per-packet records.
//!
//! Jitter and PDV are computed in integer microseconds so results can be
//! compared exactly; MOS follows the E-model mapping from the R factor.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::time::{SimDuration, SimTime};
use crate::traffic::{CodecProfile, Direction};

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("packet was not delivered")]
    DroppedPacket,
    #[error("not enough delivered packets")]
    InsufficientData,
    #[error("value {0} outside the function's domain")]
    DomainError(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoicePacketRecord {
    pub call_id: u32,
    pub direction: Direction,
    pub seq: u32,
    pub t_send: SimTime,
    pub t_recv: Option<SimTime>,
    pub dropped: bool,
}

impl VoicePacketRecord {
    /// One-way network delay in µs, if delivered.
    pub fn network_delay_us(&self) -> Option<i64> {
        self.t_recv.map(|r| r.as_micros() as i64 - self.t_send.as_micros() as i64)
    }

    pub fn in_flight(&self) -> bool {
        !self.dropped && self.t_recv.is_none()
    }
}

/// Mouth-to-ear delay of a delivered packet: network delay plus the
/// codec's encoding, decoding, compression and decompression delays.
pub fn e2e_delay_us(rec: &VoicePacketRecord, codec: &CodecProfile) -> Result<SimDuration, MetricsError> {
    let recv = rec.t_recv.ok_or(MetricsError::DroppedPacket)?;
    let dn = recv.checked_since(rec.t_send).ok_or(MetricsError::DroppedPacket)?;
    Ok(dn + codec.processing_delay())
}

/// [`e2e_delay_us`] in milliseconds.
pub fn e2e_delay(rec: &VoicePacketRecord, codec: &CodecProfile) -> Result<f64, MetricsError> {
    e2e_delay_us(rec, codec).map(SimDuration::as_millis_f64)
}

fn delivered_by_seq<'a>(records: impl IntoIterator<Item = &'a VoicePacketRecord>) -> Vec<&'a VoicePacketRecord> {
    let mut d: Vec<_> = records.into_iter().filter(|r| r.t_recv.is_some()).collect();
    d.sort_by_key(|r| r.seq);
    d
}

/// Arrival spacing minus send spacing for each consecutive pair of
/// delivered packets of one flow, keyed by the later packet's seq.
pub fn jitter_pairs<'a>(records: impl IntoIterator<Item = &'a VoicePacketRecord>) -> Vec<(u32, i64)> {
    let d = delivered_by_seq(records);
    d.windows(2)
        .map(|w| {
            let recv = w[1].t_recv.unwrap().as_micros() as i64 - w[0].t_recv.unwrap().as_micros() as i64;
            let send = w[1].t_send.as_micros() as i64 - w[0].t_send.as_micros() as i64;
            (w[1].seq, recv - send)
        })
        .collect()
}

/// Signed maximum of [`jitter_pairs`] over one flow, in µs. Negative when
/// every packet arrived ahead of its send spacing.
pub fn jitter<'a>(records: impl IntoIterator<Item = &'a VoicePacketRecord>) -> Result<i64, MetricsError> {
    jitter_pairs(records).into_iter().map(|p| p.1).max().ok_or(MetricsError::InsufficientData)
}

/// Exact population variance `num / den` in µs².
#[derive(Debug, Clone, Copy)]
pub struct Variance {
    num: i128,
    den: i128,
}

impl Variance {
    pub fn new(num: i128, den: i128) -> Self {
        assert!(den > 0);
        Variance { num, den }
    }

    pub fn parts(&self) -> (i128, i128) {
        (self.num, self.den)
    }

    pub fn as_us2(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn as_secs2(&self) -> f64 {
        self.as_us2() / 1e12
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }
}

impl PartialEq for Variance {
    fn eq(&self, other: &Self) -> bool {
        self.num * other.den == other.num * self.den
    }
}

impl Eq for Variance {}

/// Population variance of one-way delays (µs): `(nΣd² − (Σd)²) / n²`.
pub fn pdv_of_delays(delays: &[i64]) -> Result<Variance, MetricsError> {
    if delays.is_empty() {
        return Err(MetricsError::InsufficientData);
    }
    let n = delays.len() as i128;
    let (s, s2) = delays.iter().fold((0i128, 0i128), |(s, s2), &d| (s + d as i128, s2 + (d as i128) * (d as i128)));
    Ok(Variance::new(n * s2 - s * s, n * n))
}

/// Packet delay variation over the delivered packets of `records`.
pub fn pdv<'a>(records: impl IntoIterator<Item = &'a VoicePacketRecord>) -> Result<Variance, MetricsError> {
    let delays: Vec<i64> = records.into_iter().filter_map(VoicePacketRecord::network_delay_us).collect();
    pdv_of_delays(&delays)
}

/// Delay impairment for mouth-to-ear delay `d_ms`:
/// `0.024·d + 0.11·(d − 177.3)` once `d` exceeds 177.3 ms.
pub fn id_from_delay(d_ms: f64) -> f64 {
    let knee = d_ms - 177.3;
    0.024 * d_ms + if knee > 0.0 { 0.11 * knee } else { 0.0 }
}

/// Inputs to the R factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EModelInputs {
    /// Signal impairment.
    pub is: f64,
    /// Codec equipment impairment.
    pub ie: f64,
    /// Packet loss, percent.
    pub ppl: f64,
    /// Codec packet-loss robustness.
    pub bpl: f64,
    /// Delay impairment.
    pub id: f64,
    /// Advantage factor.
    pub a: f64,
}

impl Default for EModelInputs {
    fn default() -> Self {
        EModelInputs { is: 6.8, ie: 0.0, ppl: 0.0, bpl: 4.3, id: 0.0, a: 0.0 }
    }
}

impl EModelInputs {
    /// Ie with the random-loss extension applied.
    pub fn ie_eff(&self) -> f64 {
        if self.ppl <= 0.0 {
            self.ie
        } else {
            self.ie + (95.0 - self.ie) * self.ppl / (self.ppl + self.bpl)
        }
    }
}

/// `R = 100 − Is − Ie_eff − Id + A`, clamped to `[0, 100]`.
pub fn r_factor(inp: &EModelInputs) -> f64 {
    (100.0 - inp.is - inp.ie_eff() - inp.id + inp.a).clamp(0.0, 100.0)
}

/// `MOS = 1 + 0.035R + 7·10⁻⁶·R(R − 60)(100 − R)` for `R` in `[0, 100]`.
pub fn mos_from_r(r: f64) -> Result<f64, MetricsError> {
    if !(0.0..=100.0).contains(&r) {
        return Err(MetricsError::DomainError(r));
    }
    Ok(1.0 + 0.035 * r + 7e-6 * (r * (r - 60.0) * (100.0 - r)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MosLabel {
    pub score: u8,
    pub quality: &'static str,
    pub effort: &'static str,
}

const MOS_TABLE: [MosLabel; 5] = [
    MosLabel { score: 1, quality: "Bad", effort: "No meaning understood with effort" },
    MosLabel { score: 2, quality: "Poor", effort: "Considerable effort required" },
    MosLabel { score: 3, quality: "Fair", effort: "Moderate effort required" },
    MosLabel { score: 4, quality: "Good", effort: "No appreciable effort required" },
    MosLabel { score: 5, quality: "Excellent", effort: "No effort required" },
];

/// Listening-quality row for a MOS score, rounding half up to the nearest
/// integer.
pub fn mos_label(score: f64) -> Result<MosLabel, MetricsError> {
    if !(1.0..=5.0).contains(&score) {
        return Err(MetricsError::DomainError(score));
    }
    let row = libm::floor(score + 0.5) as usize;
    Ok(MOS_TABLE[row - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Grade {
    Good,
    Acceptable,
    Poor,
}

impl Grade {
    pub fn as_str(self) -> &'static str {
        match self {
            Grade::Good => "Good",
            Grade::Acceptable => "Acceptable",
            Grade::Poor => "Poor",
        }
    }

    fn from_thresholds(v: f64, good: f64, acceptable: f64) -> Grade {
        if v <= good {
            Grade::Good
        } else if v <= acceptable {
            Grade::Acceptable
        } else {
            Grade::Poor
        }
    }

    pub fn for_delay_ms(delay_ms: f64) -> Grade {
        Grade::from_thresholds(delay_ms, 150.0, 300.0)
    }

    /// Graded on magnitude; the sign is diagnostic only.
    pub fn for_jitter_ms(jitter_ms: f64) -> Grade {
        Grade::from_thresholds(libm::fabs(jitter_ms), 20.0, 50.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QualityClass {
    pub delay_class: Grade,
    pub jitter_class: Grade,
}

/// Delay: ≤150 ms good, ≤300 ms acceptable. Jitter: ≤20 ms good, ≤50 ms
/// acceptable. Boundary values take the better class.
pub fn classify(delay_ms: f64, jitter_ms: f64) -> QualityClass {
    QualityClass { delay_class: Grade::for_delay_ms(delay_ms), jitter_class: Grade::for_jitter_ms(jitter_ms) }
}

/// E-model parameters that are not codec properties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EModelParams {
    pub is: f64,
    pub a: f64,
}

impl Default for EModelParams {
    fn default() -> Self {
        EModelParams { is: 6.8, a: 0.0 }
    }
}

impl EModelParams {
    /// MOS for a mouth-to-ear delay and a loss percentage.
    pub fn mos(&self, codec: &CodecProfile, e2e_ms: f64, loss_pct: f64) -> f64 {
        let inputs = EModelInputs {
            is: self.is,
            ie: codec.ie,
            ppl: loss_pct,
            bpl: codec.bpl,
            id: id_from_delay(e2e_ms),
            a: self.a,
        };
        mos_from_r(r_factor(&inputs)).expect("r_factor clamps")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BucketConfig {
    pub width: SimDuration,
    pub warm_up: SimDuration,
    pub run_length: SimDuration,
    pub emodel: EModelParams,
}

/// Aggregates over one time window. Metric fields are `None` when the
/// window has no delivered packets.
#[derive(Debug, Clone, PartialEq)]
pub struct QoSBucket {
    pub window_start: SimTime,
    pub width: SimDuration,
    /// Window starts before the end of the warm-up period.
    pub warm_up: bool,
    /// Delivered packets sent in this window.
    pub sample_count: u64,
    /// Dropped packets sent in this window.
    pub lost: u64,
    /// Mean over flows of each flow's signed maximum jitter, seconds.
    pub mean_jitter_s: Option<f64>,
    pub mean_e2e_s: Option<f64>,
    pub pdv_s2: Option<f64>,
    pub mos: Option<f64>,
    pub delay_class: Option<Grade>,
    pub jitter_class: Option<Grade>,
}

impl QoSBucket {
    pub fn loss_pct(&self) -> Option<f64> {
        let known = self.sample_count + self.lost;
        (known > 0).then(|| 100.0 * self.lost as f64 / known as f64)
    }
}

fn flow_key(r: &VoicePacketRecord) -> (u32, Direction) {
    (r.call_id, r.direction)
}

/// Cut records into windows of `cfg.width` by send time and compute each
/// window's mean jitter, mean mouth-to-ear delay, PDV and MOS. Every window
/// in `[0, run_length)` is emitted, including empty and warm-up windows.
/// Packets still in flight at the end of the run are ignored.
pub fn bucketize(records: &[VoicePacketRecord], codec: &CodecProfile, cfg: &BucketConfig) -> Vec<QoSBucket> {
    assert!(!cfg.width.is_zero(), "bucket width must be positive");
    let width = cfg.width.as_micros();
    let n_windows = cfg.run_length.as_micros().div_ceil(width) as usize;

    let mut sorted: Vec<&VoicePacketRecord> =
        records.iter().filter(|r| !r.in_flight() && (r.t_send.as_micros() / width) < n_windows as u64).collect();
    sorted.sort_by(|a, b| {
        let wa = a.t_send.as_micros() / width;
        let wb = b.t_send.as_micros() / width;
        wa.cmp(&wb).then_with(|| flow_key(a).cmp(&flow_key(b))).then_with(|| a.seq.cmp(&b.seq))
    });

    let mut buckets: Vec<QoSBucket> = (0..n_windows)
        .map(|w| {
            let start = SimTime::from_micros(w as u64 * width);
            QoSBucket {
                window_start: start,
                width: cfg.width,
                warm_up: start < SimTime::ZERO + cfg.warm_up,
                sample_count: 0,
                lost: 0,
                mean_jitter_s: None,
                mean_e2e_s: None,
                pdv_s2: None,
                mos: None,
                delay_class: None,
                jitter_class: None,
            }
        })
        .collect();

    let mut i = 0;
    while i < sorted.len() {
        let w = (sorted[i].t_send.as_micros() / width) as usize;
        let end = i + sorted[i..].partition_point(|r| (r.t_send.as_micros() / width) as usize == w);
        fill_bucket(&mut buckets[w], &sorted[i..end], codec, &cfg.emodel);
        i = end;
    }
    buckets
}

fn fill_bucket(b: &mut QoSBucket, window: &[&VoicePacketRecord], codec: &CodecProfile, emodel: &EModelParams) {
    let delays: Vec<i64> = window.iter().filter_map(|r| r.network_delay_us()).collect();
    b.sample_count = delays.len() as u64;
    b.lost = window.iter().filter(|r| r.dropped).count() as u64;
    if delays.is_empty() {
        return;
    }

    let mut flow_jitters: Vec<i64> = Vec::new();
    let mut j = 0;
    while j < window.len() {
        let key = flow_key(window[j]);
        let end = j + window[j..].partition_point(|r| flow_key(r) == key);
        if let Ok(v) = jitter(window[j..end].iter().copied()) {
            flow_jitters.push(v);
        }
        j = end;
    }
    if !flow_jitters.is_empty() {
        let mean_us = flow_jitters.iter().map(|&v| v as f64).sum::<f64>() / flow_jitters.len() as f64;
        b.mean_jitter_s = Some(mean_us / 1e6);
        b.jitter_class = Some(Grade::for_jitter_ms(mean_us / 1e3));
    }

    let mean_dn_us = delays.iter().map(|&d| d as f64).sum::<f64>() / delays.len() as f64;
    let e2e_ms = (mean_dn_us + codec.processing_delay().as_micros() as f64) / 1e3;
    b.mean_e2e_s = Some(e2e_ms / 1e3);
    b.delay_class = Some(Grade::for_delay_ms(e2e_ms));
    b.pdv_s2 = pdv_of_delays(&delays).ok().map(|v| v.as_secs2());
    b.mos = Some(emodel.mos(codec, e2e_ms, b.loss_pct().unwrap_or(0.0)));
}

/// Mean and population standard deviation of a slice.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Some((mean, libm::sqrt(var)))
}

/// Total order for f64 metric values; NaN never occurs in practice.
pub fn cmp_f64(a: &f64, b: &f64) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}
