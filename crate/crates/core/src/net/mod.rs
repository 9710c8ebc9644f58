//! Packet transport: WiFi cells, UMTS cells and the IP cloud between them.

pub mod cloud;
pub mod umts;
pub mod wifi;

use alloc::vec::Vec;
use core::fmt;

use crate::time::{SimDuration, SimTime};

pub use cloud::IpCloud;
pub use umts::{UmtsCell, UmtsRadio};
pub use wifi::{WifiCell, WifiMac};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubnetKind {
    Wifi,
    Umts,
}

impl SubnetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SubnetKind::Wifi => "wifi",
            SubnetKind::Umts => "umts",
        }
    }
}

/// One logical hop of a path. `subnet` indexes the scenario's subnets and
/// `station` the workstation within that subnet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hop {
    /// Station → access point, through DCF contention.
    WifiUp { subnet: u8, station: u16 },
    /// Access point → station, through DCF contention.
    WifiDown { subnet: u8, station: u16 },
    /// UE ↔ Node-B air interface, including interleaving.
    UmtsAir { subnet: u8, ue: u16, downlink: bool },
    NodebRnc { subnet: u8 },
    RncProc { subnet: u8 },
    CoreNet { subnet: u8 },
    Cloud,
    /// SIP proxy processing, for signaling only.
    Proxy,
}

impl fmt::Display for Hop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Hop::WifiUp { subnet, station } => write!(f, "wifi-up/{subnet}.{station}"),
            Hop::WifiDown { subnet, station } => write!(f, "wifi-down/{subnet}.{station}"),
            Hop::UmtsAir { subnet, ue, downlink: false } => write!(f, "umts-air-up/{subnet}.{ue}"),
            Hop::UmtsAir { subnet, ue, downlink: true } => write!(f, "umts-air-down/{subnet}.{ue}"),
            Hop::NodebRnc { subnet } => write!(f, "nodeb-rnc/{subnet}"),
            Hop::RncProc { subnet } => write!(f, "rnc/{subnet}"),
            Hop::CoreNet { subnet } => write!(f, "cn/{subnet}"),
            Hop::Cloud => f.write_str("cloud"),
            Hop::Proxy => f.write_str("proxy"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DropReason {
    CollisionRetryExhausted,
    BlerRetxExhausted,
    CloudLoss,
    QueueOverflow,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::CollisionRetryExhausted => "collision-retry-exhausted",
            DropReason::BlerRetxExhausted => "bler-retx-exhausted",
            DropReason::CloudLoss => "cloud-loss",
            DropReason::QueueOverflow => "queue-overflow",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum RouteError {
    #[error("workstation {0} does not exist in the scenario")]
    UnknownEndpoint(u32),
}

/// Subnet layout: kind and station count per subnet. Workstation ids are
/// assigned consecutively, subnet by subnet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    subnets: Vec<(SubnetKind, u16)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Endpoint {
    pub subnet: u8,
    pub kind: SubnetKind,
    pub station: u16,
}

impl Topology {
    pub fn new(subnets: Vec<(SubnetKind, u16)>) -> Self {
        Topology { subnets }
    }

    pub fn workstation_count(&self) -> u32 {
        self.subnets.iter().map(|s| s.1 as u32).sum()
    }

    pub fn subnet_count(&self) -> usize {
        self.subnets.len()
    }

    pub fn subnet_kind(&self, subnet: usize) -> SubnetKind {
        self.subnets[subnet].0
    }

    /// Workstation ids belonging to `subnet`.
    pub fn workstations_of(&self, subnet: usize) -> core::ops::Range<u32> {
        let start: u32 = self.subnets[..subnet].iter().map(|s| s.1 as u32).sum();
        start..start + self.subnets[subnet].1 as u32
    }

    pub fn endpoint(&self, ws: u32) -> Result<Endpoint, RouteError> {
        let mut base = 0u32;
        for (i, &(kind, n)) in self.subnets.iter().enumerate() {
            if ws < base + n as u32 {
                return Ok(Endpoint { subnet: i as u8, kind, station: (ws - base) as u16 });
            }
            base += n as u32;
        }
        Err(RouteError::UnknownEndpoint(ws))
    }

    /// Hops from `src` to `dst`. Media crosses the cloud once; signaling
    /// additionally visits the proxy right after the cloud.
    pub fn route(&self, src: u32, dst: u32, via_proxy: bool) -> Result<Vec<Hop>, RouteError> {
        let s = self.endpoint(src)?;
        let d = self.endpoint(dst)?;
        let mut hops = Vec::with_capacity(10);
        match s.kind {
            SubnetKind::Wifi => hops.push(Hop::WifiUp { subnet: s.subnet, station: s.station }),
            SubnetKind::Umts => hops.extend([
                Hop::UmtsAir { subnet: s.subnet, ue: s.station, downlink: false },
                Hop::NodebRnc { subnet: s.subnet },
                Hop::RncProc { subnet: s.subnet },
                Hop::CoreNet { subnet: s.subnet },
            ]),
        }
        hops.push(Hop::Cloud);
        if via_proxy {
            hops.push(Hop::Proxy);
        }
        match d.kind {
            SubnetKind::Wifi => hops.push(Hop::WifiDown { subnet: d.subnet, station: d.station }),
            SubnetKind::Umts => hops.extend([
                Hop::CoreNet { subnet: d.subnet },
                Hop::RncProc { subnet: d.subnet },
                Hop::NodebRnc { subnet: d.subnet },
                Hop::UmtsAir { subnet: d.subnet, ue: d.station, downlink: true },
            ]),
        }
        Ok(hops)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentSpan {
    pub hop: Hop,
    pub ingress: SimTime,
    pub egress: SimTime,
}

/// Per-hop timing of one packet, plus the drop cause if it never arrived.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSegmentTrace {
    pub packet_id: u64,
    pub spans: Vec<SegmentSpan>,
    pub drop: Option<(Hop, DropReason, SimTime)>,
}

impl PathSegmentTrace {
    pub fn new(packet_id: u64) -> Self {
        PathSegmentTrace { packet_id, spans: Vec::new(), drop: None }
    }

    pub fn total(&self) -> SimDuration {
        self.spans.iter().map(|s| s.egress - s.ingress).sum()
    }

    /// Egress never precedes ingress, and each hop starts where the
    /// previous one ended.
    pub fn is_consistent(&self) -> bool {
        self.spans.iter().all(|s| s.egress >= s.ingress)
            && self.spans.windows(2).all(|w| w[0].egress == w[1].ingress)
    }
}
