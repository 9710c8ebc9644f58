//! In-memory scenario description; file formats live in the std companion crate.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::metrics::EModelParams;
use crate::net::{IpCloud, SubnetKind, Topology, UmtsCell, WifiCell};
use crate::time::SimDuration;
use crate::traffic::CodecProfile;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid scenario: {0}")]
pub struct ValidationError(pub String);

#[derive(Debug, Clone, PartialEq)]
pub enum CellSpec {
    Wifi(WifiCell),
    Umts(UmtsCell),
}

impl CellSpec {
    pub fn kind(&self) -> SubnetKind {
        match self {
            CellSpec::Wifi(_) => SubnetKind::Wifi,
            CellSpec::Umts(_) => SubnetKind::Umts,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubnetSpec {
    pub name: String,
    pub station_count: u16,
    pub cell: CellSpec,
}

impl SubnetSpec {
    pub fn wifi(name: &str, station_count: u16) -> Self {
        SubnetSpec { name: String::from(name), station_count, cell: CellSpec::Wifi(WifiCell::default()) }
    }

    pub fn umts(name: &str, station_count: u16) -> Self {
        SubnetSpec { name: String::from(name), station_count, cell: CellSpec::Umts(UmtsCell::default()) }
    }

    pub fn kind(&self) -> SubnetKind {
        self.cell.kind()
    }
}

/// Call generation. Each subnet runs its own arrival process; its
/// workstations call workstations of the other subnet.
#[derive(Debug, Clone, PartialEq)]
pub struct CallParams {
    pub inter_arrival_mean: SimDuration,
    pub duration_mean: SimDuration,
}

impl Default for CallParams {
    fn default() -> Self {
        CallParams { inter_arrival_mean: SimDuration::from_secs(60), duration_mean: SimDuration::from_secs(180) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SipParams {
    /// Time between 180 Ringing and 200 OK at the callee.
    pub answer_delay: SimDuration,
    pub proxy_delay: SimDuration,
    /// Transaction timeout for INVITE and BYE.
    pub transaction_timeout: SimDuration,
    pub message_bytes: u32,
}

impl Default for SipParams {
    fn default() -> Self {
        SipParams {
            answer_delay: SimDuration::from_secs(2),
            proxy_delay: SimDuration::from_millis(1),
            transaction_timeout: SimDuration::from_secs(32),
            message_bytes: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub subnets: Vec<SubnetSpec>,
    pub cloud: IpCloud,
    pub codec: CodecProfile,
    pub calls: CallParams,
    pub sip: SipParams,
    pub emodel: EModelParams,
    pub run_length: SimDuration,
    pub warm_up: SimDuration,
    pub bucket_width: SimDuration,
    pub master_seed: u64,
    pub repetitions: u32,
}

impl ScenarioSpec {
    /// Two subnets joined by the cloud, every other field at its default.
    pub fn two_subnets(name: &str, a: SubnetSpec, b: SubnetSpec) -> Self {
        ScenarioSpec {
            name: String::from(name),
            subnets: alloc::vec![a, b],
            cloud: IpCloud::default(),
            codec: CodecProfile::g711(),
            calls: CallParams::default(),
            sip: SipParams::default(),
            emodel: EModelParams::default(),
            run_length: SimDuration::from_secs(3600),
            warm_up: SimDuration::from_secs(300),
            bucket_width: SimDuration::from_secs(10),
            master_seed: 1,
            repetitions: 1,
        }
    }

    pub fn topology(&self) -> Topology {
        Topology::new(self.subnets.iter().map(|s| (s.kind(), s.station_count)).collect())
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let fail = |m: String| Err(ValidationError(m));
        if self.subnets.len() != 2 {
            return fail(format!("exactly 2 subnets required, got {}", self.subnets.len()));
        }
        for s in &self.subnets {
            if s.station_count == 0 {
                return fail(format!("subnet {}: station_count must be >= 1", s.name));
            }
            let ok = match &s.cell {
                CellSpec::Wifi(c) => c.validate(),
                CellSpec::Umts(c) => c.validate(),
            };
            if !ok {
                return fail(format!("subnet {}: cell parameters out of range", s.name));
            }
        }
        if self.subnets[0].name == self.subnets[1].name {
            return fail(format!("subnet names must differ ({})", self.subnets[0].name));
        }
        if !self.cloud.validate() {
            return fail(String::from("cloud loss_prob must be in [0, 1)"));
        }
        if let Err(e) = self.codec.validate() {
            return fail(format!("{e}"));
        }
        if self.calls.inter_arrival_mean.is_zero() || self.calls.duration_mean.is_zero() {
            return fail(String::from("call means must be positive"));
        }
        if self.sip.transaction_timeout.is_zero() {
            return fail(String::from("sip transaction timeout must be positive"));
        }
        if self.run_length <= self.warm_up {
            return fail(String::from("run_length must exceed warm_up"));
        }
        if self.bucket_width.is_zero() {
            return fail(String::from("bucket_width must be positive"));
        }
        if self.repetitions == 0 {
            return fail(String::from("repetitions must be >= 1"));
        }
        if !(self.emodel.is.is_finite() && self.emodel.a.is_finite()) {
            return fail(String::from("emodel parameters must be finite"));
        }
        Ok(())
    }
}
