//! Discrete-event simulation of VoIP calls over WiFi and UMTS access
//! networks joined by an IP cloud, with per-packet QoS and E-model scoring.

#![no_std]

extern crate alloc;

pub mod engine;
pub mod metrics;
pub mod net;
pub mod rng;
pub mod scenario;
pub mod signaling;
pub mod sim;
pub mod time;
pub mod traffic;

pub use engine::{EngineError, RunStats, Scheduler};
pub use scenario::{ScenarioSpec, SubnetSpec, ValidationError};
pub use sim::{run, SimOptions, SimOutput, Simulation};
pub use time::{SimDuration, SimTime};
