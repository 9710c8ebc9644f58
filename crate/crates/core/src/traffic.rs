//! Call arrivals, call durations and constant-bitrate voice framing.

use alloc::string::String;
use alloc::vec::Vec;

use crate::rng::{RngError, RngStream};
use crate::time::{SimDuration, SimTime};

/// RTP (12) + UDP (8) + IPv4 (20) bytes carried by every voice packet.
pub const RTP_UDP_IP_OVERHEAD: u32 = 40;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrafficError {
    #[error("codec {0}: framing does not match bitrate")]
    Framing(String),
    #[error("codec {0}: impairment and delay components must be non-negative")]
    NegativeComponent(String),
    #[error("unknown codec {0}")]
    UnknownCodec(String),
    #[error("call {0} is not active")]
    CallNotActive(u32),
    #[error(transparent)]
    Rng(#[from] RngError),
}

/// Codec framing plus its E-model impairment and delay components.
#[derive(Debug, Clone, PartialEq)]
pub struct CodecProfile {
    pub name: String,
    pub bitrate_bps: u32,
    pub frame_interval: SimDuration,
    pub payload_bytes: u32,
    /// Equipment impairment Ie.
    pub ie: f64,
    /// Packet-loss robustness Bpl.
    pub bpl: f64,
    pub encode_delay: SimDuration,
    pub decode_delay: SimDuration,
    pub compress_delay: SimDuration,
    pub decompress_delay: SimDuration,
}

impl CodecProfile {
    /// G.711: 64 kbit/s, 20 ms frames, Ie 0, Bpl 4.3.
    pub fn g711() -> Self {
        CodecProfile {
            name: String::from("G.711"),
            bitrate_bps: 64_000,
            frame_interval: SimDuration::from_millis(20),
            payload_bytes: 160,
            ie: 0.0,
            bpl: 4.3,
            encode_delay: SimDuration::from_micros(500),
            decode_delay: SimDuration::from_micros(500),
            compress_delay: SimDuration::ZERO,
            decompress_delay: SimDuration::ZERO,
        }
    }

    /// G.729: 8 kbit/s, 10 ms frames, Ie 11, Bpl 19. Encoding delay is one
    /// frame plus 5 ms look-ahead.
    pub fn g729() -> Self {
        CodecProfile {
            name: String::from("G.729"),
            bitrate_bps: 8_000,
            frame_interval: SimDuration::from_millis(10),
            payload_bytes: 10,
            ie: 11.0,
            bpl: 19.0,
            encode_delay: SimDuration::from_millis(15),
            decode_delay: SimDuration::from_millis(5),
            compress_delay: SimDuration::ZERO,
            decompress_delay: SimDuration::ZERO,
        }
    }

    /// G.723.1 at 6.3 kbit/s: 30 ms frames of 189 bits padded to 24 bytes,
    /// Ie 15, Bpl 16.1. Encoding delay is one frame plus 7.5 ms look-ahead.
    pub fn g723_1() -> Self {
        CodecProfile {
            name: String::from("G.723.1"),
            bitrate_bps: 6_300,
            frame_interval: SimDuration::from_millis(30),
            payload_bytes: 24,
            ie: 15.0,
            bpl: 16.1,
            encode_delay: SimDuration::from_micros(37_500),
            decode_delay: SimDuration::from_micros(15_000),
            compress_delay: SimDuration::ZERO,
            decompress_delay: SimDuration::ZERO,
        }
    }

    pub fn builtin(name: &str) -> Result<Self, TrafficError> {
        match name.to_ascii_lowercase().as_str() {
            "g.711" | "g711" => Ok(Self::g711()),
            "g.729" | "g729" => Ok(Self::g729()),
            "g.723.1" | "g723.1" | "g7231" => Ok(Self::g723_1()),
            _ => Err(TrafficError::UnknownCodec(String::from(name))),
        }
    }

    /// A frame carries `bitrate × interval` bits, padded up to whole octets.
    pub fn validate(&self) -> Result<(), TrafficError> {
        let bits = self.bitrate_bps as u64 * self.frame_interval.as_micros();
        let octets = bits.div_ceil(8 * 1_000_000);
        if self.frame_interval.is_zero() || self.bitrate_bps == 0 || octets != self.payload_bytes as u64 {
            return Err(TrafficError::Framing(self.name.clone()));
        }
        if !(self.ie >= 0.0 && self.bpl > 0.0) {
            return Err(TrafficError::NegativeComponent(self.name.clone()));
        }
        Ok(())
    }

    /// De + Dd + Dc + Dde.
    pub fn processing_delay(&self) -> SimDuration {
        self.encode_delay + self.decode_delay + self.compress_delay + self.decompress_delay
    }

    /// Bytes on the wire above the link layer.
    pub fn packet_bytes(&self) -> u32 {
        self.payload_bytes + RTP_UDP_IP_OVERHEAD
    }
}

/// Exponential call arrivals and durations over caller/callee pools, serial mode.
#[derive(Debug, Clone, PartialEq)]
pub struct CallProcess {
    pub inter_arrival_mean: SimDuration,
    pub duration_mean: SimDuration,
    pub caller_pool: Vec<u32>,
    pub callee_pool: Vec<u32>,
}

impl CallProcess {
    pub fn next_call_arrival(&self, now: SimTime, rng: &mut RngStream) -> Result<SimTime, TrafficError> {
        Ok(now + rng.exp_sample(self.inter_arrival_mean)?)
    }

    pub fn sample_call_duration(&self, rng: &mut RngStream) -> Result<SimDuration, TrafficError> {
        Ok(rng.exp_sample(self.duration_mean)?)
    }

    /// Uniform idle caller, then uniform idle callee other than the caller.
    /// `None` means the arrival is blocked.
    pub fn pick_parties(&self, is_busy: impl Fn(u32) -> bool, rng: &mut RngStream) -> Option<(u32, u32)> {
        let callers: Vec<u32> = self.caller_pool.iter().copied().filter(|&w| !is_busy(w)).collect();
        if callers.is_empty() {
            return None;
        }
        let caller = callers[rng.index(callers.len())];
        let callees: Vec<u32> =
            self.callee_pool.iter().copied().filter(|&w| w != caller && !is_busy(w)).collect();
        if callees.is_empty() {
            return None;
        }
        Some((caller, callees[rng.index(callees.len())]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    CallerToCallee,
    CalleeToCaller,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::CallerToCallee, Direction::CalleeToCaller];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CallState {
    Signaling,
    Active,
    Ended,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Call {
    pub call_id: u32,
    pub caller: u32,
    pub callee: u32,
    /// Start of media, i.e. session establishment.
    pub start: SimTime,
    pub duration: SimDuration,
    pub state: CallState,
}

impl Call {
    pub fn end(&self) -> SimTime {
        self.start + self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoicePacket {
    pub call_id: u32,
    pub direction: Direction,
    pub seq: u32,
    pub t_send: SimTime,
    pub size_bytes: u32,
}

/// Send times for one direction of a call: `start + k·interval`, `k < count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameSchedule {
    pub start: SimTime,
    pub interval: SimDuration,
    pub count: u32,
}

impl FrameSchedule {
    pub fn send_time(&self, k: u32) -> SimTime {
        self.start + self.interval.saturating_mul(k as u64)
    }

    pub fn packets(&self, call_id: u32, direction: Direction, size_bytes: u32) -> impl Iterator<Item = VoicePacket> + '_ {
        (0..self.count).map(move |seq| VoicePacket {
            call_id,
            direction,
            seq,
            t_send: self.send_time(seq),
            size_bytes,
        })
    }
}

/// One frame per packet for the whole call; the same schedule applies to
/// both directions (full duplex, no silence suppression).
pub fn generate_frames(call: &Call, codec: &CodecProfile) -> Result<FrameSchedule, TrafficError> {
    if call.state != CallState::Active {
        return Err(TrafficError::CallNotActive(call.call_id));
    }
    let count = call.duration.as_micros() / codec.frame_interval.as_micros();
    Ok(FrameSchedule { start: call.start, interval: codec.frame_interval, count: count as u32 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn active_call(duration: SimDuration) -> Call {
        Call { call_id: 1, caller: 0, callee: 4, start: SimTime::from_secs(10), duration, state: CallState::Active }
    }

    #[test]
    fn builtin_codecs_are_consistent() {
        for c in [CodecProfile::g711(), CodecProfile::g729(), CodecProfile::g723_1()] {
            c.validate().unwrap();
        }
        let g711 = CodecProfile::g711();
        assert_eq!(g711.payload_bytes as u64 * 8 * 1_000_000 / g711.frame_interval.as_micros(), 64_000);
        assert_eq!(g711.packet_bytes(), 200);
    }

    #[test]
    fn inconsistent_framing_is_rejected() {
        let mut c = CodecProfile::g711();
        c.payload_bytes = 161;
        assert!(matches!(c.validate(), Err(TrafficError::Framing(_))));
        let mut c = CodecProfile::g711();
        c.ie = -1.0;
        assert!(matches!(c.validate(), Err(TrafficError::NegativeComponent(_))));
    }

    #[test]
    fn codec_lookup_by_name() {
        assert_eq!(CodecProfile::builtin("g729").unwrap().name, "G.729");
        assert!(CodecProfile::builtin("opus").is_err());
    }

    #[test]
    fn three_minute_call_is_nine_thousand_frames() {
        let s = generate_frames(&active_call(SimDuration::from_secs(180)), &CodecProfile::g711()).unwrap();
        assert_eq!(s.count, 9_000);
        let pkts: Vec<_> = s.packets(1, Direction::CallerToCallee, 200).collect();
        assert!(pkts.windows(2).all(|w| w[1].t_send - w[0].t_send == SimDuration::from_millis(20)));
        assert!(pkts.last().unwrap().t_send < SimTime::from_secs(190));
    }

    #[test]
    fn zero_length_call_has_no_frames() {
        let s = generate_frames(&active_call(SimDuration::ZERO), &CodecProfile::g711()).unwrap();
        assert_eq!(s.count, 0);
    }

    #[test]
    fn frames_need_an_active_call() {
        let mut call = active_call(SimDuration::from_secs(1));
        call.state = CallState::Signaling;
        assert_eq!(generate_frames(&call, &CodecProfile::g711()), Err(TrafficError::CallNotActive(1)));
    }

    #[test]
    fn single_idle_pair_is_always_chosen() {
        let proc = CallProcess {
            inter_arrival_mean: SimDuration::from_secs(60),
            duration_mean: SimDuration::from_secs(180),
            caller_pool: vec![0, 1, 2, 3],
            callee_pool: vec![4, 5, 6, 7],
        };
        let mut rng = RngStream::new(5, "call-parties");
        for _ in 0..100 {
            assert_eq!(proc.pick_parties(|w| w != 2 && w != 6, &mut rng), Some((2, 6)));
        }
        assert_eq!(proc.pick_parties(|w| w < 4, &mut rng), None);
        assert_eq!(proc.pick_parties(|_| true, &mut rng), None);
    }

    #[test]
    fn caller_is_never_its_own_callee() {
        let proc = CallProcess {
            inter_arrival_mean: SimDuration::from_secs(60),
            duration_mean: SimDuration::from_secs(180),
            caller_pool: vec![0, 1],
            callee_pool: vec![0, 1],
        };
        let mut rng = RngStream::new(9, "call-parties");
        for _ in 0..200 {
            let (a, b) = proc.pick_parties(|_| false, &mut rng).unwrap();
            assert_ne!(a, b);
        }
        assert_eq!(proc.pick_parties(|w| w == 1, &mut rng), None);
    }
}
