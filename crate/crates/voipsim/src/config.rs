//! Scenario files.
//!
//! A scenario is a TOML document. Durations carry their unit in the key
//! name (`_s`, `_ms`, `_us`) and are stored internally as whole
//! microseconds. Every key except `scenario.name` and the subnet identity
//! keys is optional; omitted keys take the simulator defaults. [`emit`]
//! writes every key explicitly, so the emitted form doubles as the
//! manifest's record of the configuration that ran.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use voipsim_core::metrics::EModelParams;
use voipsim_core::net::{IpCloud, UmtsCell, WifiCell};
use voipsim_core::scenario::{CallParams, CellSpec, ScenarioSpec, SipParams, SubnetSpec};
use voipsim_core::traffic::CodecProfile;
use voipsim_core::SimDuration;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {message}")]
    Validation { path: String, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("unknown builtin scenario `{0}` (expected one of: {list})", list = crate::builtin::NAMES.join(", "))]
    UnknownBuiltin(String),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub codec: CodecSection,
    #[serde(default)]
    pub calls: CallsSection,
    #[serde(default)]
    pub sip: SipSection,
    #[serde(default)]
    pub emodel: EModelSection,
    #[serde(default)]
    pub cloud: CloudSection,
    #[serde(default, rename = "subnet")]
    pub subnets: Vec<SubnetSection>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: String,
    pub master_seed: Option<u64>,
    pub repetitions: Option<u32>,
    pub run_length_s: Option<f64>,
    pub warm_up_s: Option<f64>,
    pub bucket_width_s: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodecSection {
    pub name: Option<String>,
    pub bitrate_bps: Option<u32>,
    pub frame_interval_ms: Option<f64>,
    pub payload_bytes: Option<u32>,
    pub ie: Option<f64>,
    pub bpl: Option<f64>,
    pub encode_delay_ms: Option<f64>,
    pub decode_delay_ms: Option<f64>,
    pub compress_delay_ms: Option<f64>,
    pub decompress_delay_ms: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CallsSection {
    pub inter_arrival_mean_s: Option<f64>,
    pub duration_mean_s: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SipSection {
    pub answer_delay_ms: Option<f64>,
    pub proxy_delay_ms: Option<f64>,
    pub transaction_timeout_s: Option<f64>,
    pub message_bytes: Option<u32>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EModelSection {
    pub is: Option<f64>,
    pub a: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudSection {
    pub base_delay_ms: Option<f64>,
    pub jitter_half_width_ms: Option<f64>,
    pub loss_prob: Option<f64>,
}

/// One subnet. `kind` selects which cell keys are allowed.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubnetSection {
    pub name: String,
    pub kind: String,
    pub stations: u16,
    pub queue_cap: Option<usize>,
    // WiFi
    pub data_rate_bps: Option<u64>,
    pub slot_us: Option<u64>,
    pub sifs_us: Option<u64>,
    pub difs_us: Option<u64>,
    pub cw_min: Option<u32>,
    pub cw_max: Option<u32>,
    pub retry_limit: Option<u32>,
    pub phy_mac_overhead_bytes: Option<u32>,
    // UMTS
    pub tti_ms: Option<f64>,
    pub bearer_rate_bps: Option<u64>,
    pub bler: Option<f64>,
    pub max_rlc_retx: Option<u32>,
    pub rlc_retx_delay_ms: Option<f64>,
    pub nodeb_rnc_delay_ms: Option<f64>,
    pub rnc_proc_delay_ms: Option<f64>,
    pub cn_delay_ms: Option<f64>,
    pub air_interleave_delay_ms: Option<f64>,
}

const WIFI_KEYS: [&str; 8] =
    ["data_rate_bps", "slot_us", "sifs_us", "difs_us", "cw_min", "cw_max", "retry_limit", "phy_mac_overhead_bytes"];
const UMTS_KEYS: [&str; 9] = [
    "tti_ms",
    "bearer_rate_bps",
    "bler",
    "max_rlc_retx",
    "rlc_retx_delay_ms",
    "nodeb_rnc_delay_ms",
    "rnc_proc_delay_ms",
    "cn_delay_ms",
    "air_interleave_delay_ms",
];

impl SubnetSection {
    fn present_wifi_keys(&self) -> Vec<&'static str> {
        let set = [
            self.data_rate_bps.is_some(),
            self.slot_us.is_some(),
            self.sifs_us.is_some(),
            self.difs_us.is_some(),
            self.cw_min.is_some(),
            self.cw_max.is_some(),
            self.retry_limit.is_some(),
            self.phy_mac_overhead_bytes.is_some(),
        ];
        WIFI_KEYS.iter().zip(set).filter(|p| p.1).map(|p| *p.0).collect()
    }

    fn present_umts_keys(&self) -> Vec<&'static str> {
        let set = [
            self.tti_ms.is_some(),
            self.bearer_rate_bps.is_some(),
            self.bler.is_some(),
            self.max_rlc_retx.is_some(),
            self.rlc_retx_delay_ms.is_some(),
            self.nodeb_rnc_delay_ms.is_some(),
            self.rnc_proc_delay_ms.is_some(),
            self.cn_delay_ms.is_some(),
            self.air_interleave_delay_ms.is_some(),
        ];
        UMTS_KEYS.iter().zip(set).filter(|p| p.1).map(|p| *p.0).collect()
    }
}

fn micros(value: f64, scale: f64, field: &str) -> Result<SimDuration, String> {
    let us = (value * scale).round();
    if !us.is_finite() || !(0.0..=9.0e15).contains(&us) {
        return Err(format!("{field}: {value} is not a valid non-negative duration"));
    }
    Ok(SimDuration::from_micros(us as u64))
}

fn secs(v: Option<f64>, default: SimDuration, field: &str) -> Result<SimDuration, String> {
    v.map_or(Ok(default), |v| micros(v, 1e6, field))
}

fn millis(v: Option<f64>, default: SimDuration, field: &str) -> Result<SimDuration, String> {
    v.map_or(Ok(default), |v| micros(v, 1e3, field))
}

fn us(v: Option<u64>, default: SimDuration) -> SimDuration {
    v.map_or(default, SimDuration::from_micros)
}

fn as_s(d: SimDuration) -> f64 {
    d.as_micros() as f64 / 1e6
}

fn as_ms(d: SimDuration) -> f64 {
    d.as_micros() as f64 / 1e3
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
}

impl ScenarioFile {
    /// Resolve defaults and check invariants.
    pub fn to_spec(&self) -> Result<ScenarioSpec, String> {
        let sc = &self.scenario;
        if !valid_name(&sc.name) {
            return Err(format!("scenario.name `{}` must be non-empty and use only [A-Za-z0-9._-]", sc.name));
        }
        if self.subnets.len() != 2 {
            return Err(format!("exactly 2 [[subnet]] tables required, found {}", self.subnets.len()));
        }
        let subnets = self.subnets.iter().map(subnet_spec).collect::<Result<Vec<_>, _>>()?;
        let mut spec = ScenarioSpec::two_subnets(&sc.name, subnets[0].clone(), subnets[1].clone());
        spec.master_seed = sc.master_seed.unwrap_or(spec.master_seed);
        spec.repetitions = sc.repetitions.unwrap_or(spec.repetitions);
        spec.run_length = secs(sc.run_length_s, spec.run_length, "scenario.run_length_s")?;
        spec.warm_up = secs(sc.warm_up_s, spec.warm_up, "scenario.warm_up_s")?;
        spec.bucket_width = secs(sc.bucket_width_s, spec.bucket_width, "scenario.bucket_width_s")?;
        spec.codec = codec(&self.codec)?;

        let d = CallParams::default();
        spec.calls = CallParams {
            inter_arrival_mean: secs(self.calls.inter_arrival_mean_s, d.inter_arrival_mean, "calls.inter_arrival_mean_s")?,
            duration_mean: secs(self.calls.duration_mean_s, d.duration_mean, "calls.duration_mean_s")?,
        };
        let d = SipParams::default();
        spec.sip = SipParams {
            answer_delay: millis(self.sip.answer_delay_ms, d.answer_delay, "sip.answer_delay_ms")?,
            proxy_delay: millis(self.sip.proxy_delay_ms, d.proxy_delay, "sip.proxy_delay_ms")?,
            transaction_timeout: secs(self.sip.transaction_timeout_s, d.transaction_timeout, "sip.transaction_timeout_s")?,
            message_bytes: self.sip.message_bytes.unwrap_or(d.message_bytes),
        };
        let d = EModelParams::default();
        spec.emodel = EModelParams { is: self.emodel.is.unwrap_or(d.is), a: self.emodel.a.unwrap_or(d.a) };
        let d = IpCloud::default();
        spec.cloud = IpCloud {
            base_delay: millis(self.cloud.base_delay_ms, d.base_delay, "cloud.base_delay_ms")?,
            jitter_half_width: millis(self.cloud.jitter_half_width_ms, d.jitter_half_width, "cloud.jitter_half_width_ms")?,
            loss_prob: self.cloud.loss_prob.unwrap_or(d.loss_prob),
        };
        spec.validate().map_err(|e| e.0)?;
        Ok(spec)
    }

    /// The fully explicit file for `spec`.
    pub fn from_spec(spec: &ScenarioSpec) -> Self {
        let c = &spec.codec;
        ScenarioFile {
            scenario: ScenarioSection {
                name: spec.name.clone(),
                master_seed: Some(spec.master_seed),
                repetitions: Some(spec.repetitions),
                run_length_s: Some(as_s(spec.run_length)),
                warm_up_s: Some(as_s(spec.warm_up)),
                bucket_width_s: Some(as_s(spec.bucket_width)),
            },
            codec: CodecSection {
                name: Some(c.name.clone()),
                bitrate_bps: Some(c.bitrate_bps),
                frame_interval_ms: Some(as_ms(c.frame_interval)),
                payload_bytes: Some(c.payload_bytes),
                ie: Some(c.ie),
                bpl: Some(c.bpl),
                encode_delay_ms: Some(as_ms(c.encode_delay)),
                decode_delay_ms: Some(as_ms(c.decode_delay)),
                compress_delay_ms: Some(as_ms(c.compress_delay)),
                decompress_delay_ms: Some(as_ms(c.decompress_delay)),
            },
            calls: CallsSection {
                inter_arrival_mean_s: Some(as_s(spec.calls.inter_arrival_mean)),
                duration_mean_s: Some(as_s(spec.calls.duration_mean)),
            },
            sip: SipSection {
                answer_delay_ms: Some(as_ms(spec.sip.answer_delay)),
                proxy_delay_ms: Some(as_ms(spec.sip.proxy_delay)),
                transaction_timeout_s: Some(as_s(spec.sip.transaction_timeout)),
                message_bytes: Some(spec.sip.message_bytes),
            },
            emodel: EModelSection { is: Some(spec.emodel.is), a: Some(spec.emodel.a) },
            cloud: CloudSection {
                base_delay_ms: Some(as_ms(spec.cloud.base_delay)),
                jitter_half_width_ms: Some(as_ms(spec.cloud.jitter_half_width)),
                loss_prob: Some(spec.cloud.loss_prob),
            },
            subnets: spec.subnets.iter().map(subnet_section).collect(),
        }
    }
}

fn codec(s: &CodecSection) -> Result<CodecProfile, String> {
    let name = s.name.clone().unwrap_or_else(|| String::from("g711"));
    let base = CodecProfile::builtin(&name).ok();
    let need = |field: &str| format!("codec.{field} is required for custom codec `{name}`");
    let c = match base {
        Some(b) => CodecProfile {
            name: name.clone(),
            bitrate_bps: s.bitrate_bps.unwrap_or(b.bitrate_bps),
            frame_interval: millis(s.frame_interval_ms, b.frame_interval, "codec.frame_interval_ms")?,
            payload_bytes: s.payload_bytes.unwrap_or(b.payload_bytes),
            ie: s.ie.unwrap_or(b.ie),
            bpl: s.bpl.unwrap_or(b.bpl),
            encode_delay: millis(s.encode_delay_ms, b.encode_delay, "codec.encode_delay_ms")?,
            decode_delay: millis(s.decode_delay_ms, b.decode_delay, "codec.decode_delay_ms")?,
            compress_delay: millis(s.compress_delay_ms, b.compress_delay, "codec.compress_delay_ms")?,
            decompress_delay: millis(s.decompress_delay_ms, b.decompress_delay, "codec.decompress_delay_ms")?,
        },
        None => CodecProfile {
            name: name.clone(),
            bitrate_bps: s.bitrate_bps.ok_or_else(|| need("bitrate_bps"))?,
            frame_interval: micros(s.frame_interval_ms.ok_or_else(|| need("frame_interval_ms"))?, 1e3, "codec.frame_interval_ms")?,
            payload_bytes: s.payload_bytes.ok_or_else(|| need("payload_bytes"))?,
            ie: s.ie.ok_or_else(|| need("ie"))?,
            bpl: s.bpl.ok_or_else(|| need("bpl"))?,
            encode_delay: millis(s.encode_delay_ms, SimDuration::ZERO, "codec.encode_delay_ms")?,
            decode_delay: millis(s.decode_delay_ms, SimDuration::ZERO, "codec.decode_delay_ms")?,
            compress_delay: millis(s.compress_delay_ms, SimDuration::ZERO, "codec.compress_delay_ms")?,
            decompress_delay: millis(s.decompress_delay_ms, SimDuration::ZERO, "codec.decompress_delay_ms")?,
        },
    };
    if !valid_name(&c.name) {
        return Err(format!("codec.name `{}` must use only [A-Za-z0-9._-]", c.name));
    }
    if !(c.ie.is_finite() && c.bpl.is_finite() && c.ie >= 0.0 && c.bpl > 0.0) {
        return Err(String::from("codec.ie must be >= 0 and codec.bpl > 0"));
    }
    Ok(c)
}

fn subnet_spec(s: &SubnetSection) -> Result<SubnetSpec, String> {
    if !valid_name(&s.name) {
        return Err(format!("subnet name `{}` must be non-empty and use only [A-Za-z0-9._-]", s.name));
    }
    let cell = match s.kind.as_str() {
        "wifi" => {
            if let Some(k) = s.present_umts_keys().first() {
                return Err(format!("subnet {}: `{k}` is a UMTS key but kind = \"wifi\"", s.name));
            }
            let d = WifiCell::default();
            CellSpec::Wifi(WifiCell {
                data_rate_bps: s.data_rate_bps.unwrap_or(d.data_rate_bps),
                slot: us(s.slot_us, d.slot),
                sifs: us(s.sifs_us, d.sifs),
                difs: us(s.difs_us, d.difs),
                cw_min: s.cw_min.unwrap_or(d.cw_min),
                cw_max: s.cw_max.unwrap_or(d.cw_max),
                retry_limit: s.retry_limit.unwrap_or(d.retry_limit),
                phy_mac_overhead_bytes: s.phy_mac_overhead_bytes.unwrap_or(d.phy_mac_overhead_bytes),
                queue_cap: s.queue_cap.unwrap_or(d.queue_cap),
            })
        }
        "umts" => {
            if let Some(k) = s.present_wifi_keys().first() {
                return Err(format!("subnet {}: `{k}` is a WiFi key but kind = \"umts\"", s.name));
            }
            let d = UmtsCell::default();
            let f = |field: &str| format!("subnet {}.{field}", s.name);
            CellSpec::Umts(UmtsCell {
                tti: millis(s.tti_ms, d.tti, &f("tti_ms"))?,
                bearer_rate_bps: s.bearer_rate_bps.unwrap_or(d.bearer_rate_bps),
                bler: s.bler.unwrap_or(d.bler),
                max_rlc_retx: s.max_rlc_retx.unwrap_or(d.max_rlc_retx),
                rlc_retx_delay: millis(s.rlc_retx_delay_ms, d.rlc_retx_delay, &f("rlc_retx_delay_ms"))?,
                nodeb_rnc_delay: millis(s.nodeb_rnc_delay_ms, d.nodeb_rnc_delay, &f("nodeb_rnc_delay_ms"))?,
                rnc_proc_delay: millis(s.rnc_proc_delay_ms, d.rnc_proc_delay, &f("rnc_proc_delay_ms"))?,
                cn_delay: millis(s.cn_delay_ms, d.cn_delay, &f("cn_delay_ms"))?,
                air_interleave_delay: millis(s.air_interleave_delay_ms, d.air_interleave_delay, &f("air_interleave_delay_ms"))?,
                queue_cap: s.queue_cap.unwrap_or(d.queue_cap),
            })
        }
        other => return Err(format!("subnet {}: kind must be \"wifi\" or \"umts\", got \"{other}\"", s.name)),
    };
    Ok(SubnetSpec { name: s.name.clone(), station_count: s.stations, cell })
}

fn subnet_section(s: &SubnetSpec) -> SubnetSection {
    let base = SubnetSection { name: s.name.clone(), stations: s.station_count, ..SubnetSection::default() };
    match &s.cell {
        CellSpec::Wifi(c) => SubnetSection {
            kind: String::from("wifi"),
            queue_cap: Some(c.queue_cap),
            data_rate_bps: Some(c.data_rate_bps),
            slot_us: Some(c.slot.as_micros()),
            sifs_us: Some(c.sifs.as_micros()),
            difs_us: Some(c.difs.as_micros()),
            cw_min: Some(c.cw_min),
            cw_max: Some(c.cw_max),
            retry_limit: Some(c.retry_limit),
            phy_mac_overhead_bytes: Some(c.phy_mac_overhead_bytes),
            ..base
        },
        CellSpec::Umts(c) => SubnetSection {
            kind: String::from("umts"),
            queue_cap: Some(c.queue_cap),
            tti_ms: Some(as_ms(c.tti)),
            bearer_rate_bps: Some(c.bearer_rate_bps),
            bler: Some(c.bler),
            max_rlc_retx: Some(c.max_rlc_retx),
            rlc_retx_delay_ms: Some(as_ms(c.rlc_retx_delay)),
            nodeb_rnc_delay_ms: Some(as_ms(c.nodeb_rnc_delay)),
            rnc_proc_delay_ms: Some(as_ms(c.rnc_proc_delay)),
            cn_delay_ms: Some(as_ms(c.cn_delay)),
            air_interleave_delay_ms: Some(as_ms(c.air_interleave_delay)),
            ..base
        },
    }
}

/// Parse and validate scenario text. `origin` names the source in errors.
pub fn parse_scenario_str(text: &str, origin: &str) -> Result<ScenarioSpec, ConfigError> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| ConfigError::Parse { path: origin.to_string(), message: e.to_string() })?;
    file.to_spec().map_err(|message| ConfigError::Validation { path: origin.to_string(), message })
}

pub fn parse_scenario(path: &std::path::Path) -> Result<ScenarioSpec, ConfigError> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: origin.clone(), source })?;
    parse_scenario_str(&text, &origin)
}

/// A file path if one exists, otherwise a builtin scenario name.
pub fn resolve_scenario(arg: &str) -> Result<ScenarioSpec, ConfigError> {
    let path = std::path::Path::new(arg);
    if path.is_file() {
        return parse_scenario(path);
    }
    match crate::builtin::source(arg) {
        Some(text) => parse_scenario_str(text, &format!("builtin:{arg}")),
        None => Err(ConfigError::UnknownBuiltin(arg.to_string())),
    }
}

/// Canonical TOML with every key explicit.
pub fn emit(spec: &ScenarioSpec) -> String {
    toml::to_string(&ScenarioFile::from_spec(spec)).expect("scenario file serializes")
}
