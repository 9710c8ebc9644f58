//! One simulation run: wires call generation, SIP sessions and the network
//! models onto the event engine and collects per-packet records.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::rc::Rc;
use alloc::string::String;
use alloc::vec::Vec;

use crate::engine::{EngineError, EventId, EventKind, RunStats, Scheduler, SimEvent, TraceLine};
use crate::metrics::VoicePacketRecord;
use crate::net::umts::AirOutcome;
use crate::net::wifi::Frame;
use crate::net::{DropReason, Hop, PathSegmentTrace, SegmentSpan, Topology, UmtsRadio, WifiMac};
use crate::rng::RngStream;
use crate::scenario::{CellSpec, ScenarioSpec, ValidationError};
use crate::signaling::{initiate, Party, Reaction, SessionState, SipAgent, SipMessage, SipProxy, SipSession};
use crate::time::{SimDuration, SimTime};
use crate::traffic::{generate_frames, Call, CallProcess, CallState, Direction, FrameSchedule};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimOptions {
    /// Record every processed event.
    pub trace_events: bool,
    /// Record per-hop timing of every packet.
    pub trace_paths: bool,
    /// Record SIP session transitions.
    pub session_log: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Internal inconsistency raised by an event handler.
#[derive(Debug, Clone, PartialEq)]
pub struct Fault(String);

impl core::fmt::Display for Fault {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<EngineError> for Fault {
    fn from(e: EngineError) -> Self {
        Fault(format!("{e}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ev {
    CallArrival { process: u8 },
    SipSend { session: u32, msg: SipMessage, from: Party },
    SipTimer { session: u32 },
    CallEnd { session: u32 },
    Frame { session: u32, direction: Direction, k: u32 },
    HopDone { packet: u64 },
    WifiAttempt { subnet: u8 },
    WifiIdle { subnet: u8 },
    UmtsTti { subnet: u8, link: u16 },
    UmtsRetx { subnet: u8, packet: u64, retx: u32 },
}

impl EventKind for Ev {
    fn kind(&self) -> &'static str {
        match self {
            Ev::CallArrival { .. } => "call-arrival",
            Ev::SipSend { .. } => "sip-send",
            Ev::SipTimer { .. } => "sip-timer",
            Ev::CallEnd { .. } => "call-end",
            Ev::Frame { .. } => "frame",
            Ev::HopDone { .. } => "hop-done",
            Ev::WifiAttempt { .. } => "wifi-attempt",
            Ev::WifiIdle { .. } => "wifi-idle",
            Ev::UmtsTti { .. } => "umts-tti",
            Ev::UmtsRetx { .. } => "umts-retx",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DropCounts {
    pub collision_retry_exhausted: u64,
    pub bler_retx_exhausted: u64,
    pub cloud_loss: u64,
    pub queue_overflow: u64,
}

impl DropCounts {
    fn bump(&mut self, r: DropReason) {
        match r {
            DropReason::CollisionRetryExhausted => self.collision_retry_exhausted += 1,
            DropReason::BlerRetxExhausted => self.bler_retx_exhausted += 1,
            DropReason::CloudLoss => self.cloud_loss += 1,
            DropReason::QueueOverflow => self.queue_overflow += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.collision_retry_exhausted + self.bler_retx_exhausted + self.cloud_loss + self.queue_overflow
    }
}

/// Run-level counters beyond the engine's [`RunStats`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub calls_attempted: u64,
    pub calls_blocked: u64,
    pub sessions_established: u64,
    pub setups_failed: u64,
    pub sessions_closed: u64,
    pub sessions_open_at_end: u64,
    pub protocol_violations: u64,
    pub media_in_flight_at_end: u64,
    pub media_drops: DropCounts,
    pub sip_sent: u64,
    pub sip_delivered: u64,
    pub sip_dropped: u64,
    pub wifi_collisions: u64,
    pub umts_block_errors: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallInfo {
    pub call_id: u32,
    pub caller: u32,
    pub callee: u32,
    pub caller_subnet: u8,
    pub callee_subnet: u8,
    pub t_invite: SimTime,
    pub t_established: Option<SimTime>,
    /// Scheduled end of media, once established.
    pub media_end: Option<SimTime>,
    pub frames_per_direction: u32,
    pub final_state: SessionState,
    pub t_closed: Option<SimTime>,
    /// Every SIP message of the session in send order.
    pub sip: Vec<SipTransit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SipTransit {
    pub msg: SipMessage,
    pub from: Party,
    pub packet_id: u64,
    pub sent: SimTime,
    /// `None` if the message was lost or still in flight.
    pub arrived: Option<SimTime>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionLogLine {
    pub ticks: u64,
    pub session_id: u32,
    pub from: SessionState,
    pub to: SessionState,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub stats: RunStats,
    pub summary: RunSummary,
    pub records: Vec<VoicePacketRecord>,
    /// Transport packet id of each record, for matching path traces.
    pub record_packet_ids: Vec<u64>,
    pub calls: Vec<CallInfo>,
    pub event_trace: Vec<TraceLine>,
    pub path_traces: Vec<PathSegmentTrace>,
    pub session_log: Vec<SessionLogLine>,
    pub end: SimTime,
}

impl SimOutput {
    /// Records grouped by (source subnet, destination subnet).
    pub fn records_by_subnet_direction(&self) -> BTreeMap<(u8, u8), Vec<VoicePacketRecord>> {
        let subnets: BTreeMap<u32, (u8, u8)> =
            self.calls.iter().map(|c| (c.call_id, (c.caller_subnet, c.callee_subnet))).collect();
        let mut out: BTreeMap<(u8, u8), Vec<VoicePacketRecord>> = BTreeMap::new();
        for r in &self.records {
            let (a, b) = subnets[&r.call_id];
            let key = match r.direction {
                Direction::CallerToCallee => (a, b),
                Direction::CalleeToCaller => (b, a),
            };
            out.entry(key).or_default().push(*r);
        }
        out
    }

    /// generated == delivered + dropped + in flight, for media packets.
    pub fn is_conserved(&self) -> bool {
        self.stats.packets_created
            == self.stats.packets_delivered + self.stats.packets_dropped + self.summary.media_in_flight_at_end
    }
}

enum Content {
    Voice { record: usize },
    Sip { session: u32, msg: SipMessage, log: usize },
}

struct InFlight {
    content: Content,
    route: Rc<[Hop]>,
    hop: usize,
    hop_ingress: SimTime,
    trace: Option<PathSegmentTrace>,
}

struct SessionCtx {
    session: SipSession,
    duration: SimDuration,
    timer: Option<EventId>,
    schedule: Option<FrameSchedule>,
    info: CallInfo,
}

enum Cell {
    Wifi { mac: WifiMac, attempt: Option<(SimTime, EventId)>, rng: RngStream },
    Umts { radio: UmtsRadio, rng: RngStream },
}

struct CallSource {
    process: CallProcess,
    arrivals: RngStream,
    parties: RngStream,
    durations: RngStream,
}

struct World {
    spec: ScenarioSpec,
    opts: SimOptions,
    topology: Topology,
    cells: Vec<Cell>,
    cloud_rng: RngStream,
    sources: Vec<CallSource>,
    proxy: SipProxy,
    agents: Vec<SipAgent>,
    busy: Vec<Option<u32>>,
    sessions: Vec<SessionCtx>,
    packets: BTreeMap<u64, InFlight>,
    next_packet: u64,
    routes: BTreeMap<(u32, u32, bool), Rc<[Hop]>>,
    records: Vec<VoicePacketRecord>,
    record_packet_ids: Vec<u64>,
    summary: RunSummary,
    path_traces: Vec<PathSegmentTrace>,
    session_log: Vec<SessionLogLine>,
    arrivals_open: bool,
}

/// A simulation in progress. Use [`run`] for the common case.
pub struct Simulation {
    sched: Scheduler<Ev>,
    world: World,
}

impl Simulation {
    pub fn new(spec: &ScenarioSpec, seed: u64, opts: SimOptions) -> Result<Self, SimError> {
        spec.validate()?;
        let topology = spec.topology();
        let cells = spec
            .subnets
            .iter()
            .enumerate()
            .map(|(i, s)| match &s.cell {
                CellSpec::Wifi(c) => Cell::Wifi {
                    mac: WifiMac::new(c.clone(), s.station_count as usize),
                    attempt: None,
                    rng: RngStream::new(seed, &format!("wifi-backoff:{i}")),
                },
                CellSpec::Umts(c) => Cell::Umts {
                    radio: UmtsRadio::new(c.clone(), s.station_count as usize),
                    rng: RngStream::new(seed, &format!("umts-bler:{i}")),
                },
            })
            .collect();
        let sources = (0..spec.subnets.len())
            .map(|i| CallSource {
                process: CallProcess {
                    inter_arrival_mean: spec.calls.inter_arrival_mean,
                    duration_mean: spec.calls.duration_mean,
                    caller_pool: topology.workstations_of(i).collect(),
                    callee_pool: topology.workstations_of(1 - i).collect(),
                },
                arrivals: RngStream::new(seed, &format!("call-arrivals:{i}")),
                parties: RngStream::new(seed, &format!("call-parties:{i}")),
                durations: RngStream::new(seed, &format!("call-durations:{i}")),
            })
            .collect();

        let mut proxy = SipProxy::new(0);
        let mut agents = Vec::new();
        for ws in 0..topology.workstation_count() {
            let mut agent = SipAgent::new(ws, proxy.id);
            let location = topology.endpoint(ws).expect("workstation in range").subnet as u32;
            proxy.register(&mut agent, location).expect("fresh registration");
            agents.push(agent);
        }

        let mut sched = Scheduler::new();
        if opts.trace_events {
            sched.enable_trace();
        }
        let world = World {
            busy: alloc::vec![None; agents.len()],
            spec: spec.clone(),
            opts,
            topology,
            cells,
            cloud_rng: RngStream::new(seed, "cloud-jitter"),
            sources,
            proxy,
            agents,
            sessions: Vec::new(),
            packets: BTreeMap::new(),
            next_packet: 0,
            routes: BTreeMap::new(),
            records: Vec::new(),
            record_packet_ids: Vec::new(),
            summary: RunSummary::default(),
            path_traces: Vec::new(),
            session_log: Vec::new(),
            arrivals_open: true,
        };
        let mut sim = Simulation { sched, world };
        for p in 0..sim.world.sources.len() {
            let src = &mut sim.world.sources[p];
            let first = src.process.next_call_arrival(SimTime::ZERO, &mut src.arrivals).map_err(|e| {
                ValidationError(format!("{e}"))
            })?;
            sim.sched.schedule(first, p as u32, Ev::CallArrival { process: p as u8 })?;
        }
        Ok(sim)
    }

    pub fn now(&self) -> SimTime {
        self.sched.now()
    }

    /// Advance the simulation to `t_end`.
    pub fn run_until(&mut self, t_end: SimTime) -> Result<RunStats, SimError> {
        let world = &mut self.world;
        Ok(self.sched.run_until(t_end, |s, ev| world.handle(s, ev))?)
    }

    /// No further calls are generated; calls already arriving are blocked.
    pub fn stop_new_calls(&mut self) {
        self.world.arrivals_open = false;
    }

    pub fn finish(mut self) -> SimOutput {
        let w = &mut self.world;
        w.summary.media_in_flight_at_end = w.records.iter().filter(|r| r.in_flight()).count() as u64;
        w.summary.sessions_open_at_end =
            w.sessions.iter().filter(|s| s.session.state != SessionState::Closed).count() as u64;
        for cell in &w.cells {
            match cell {
                Cell::Wifi { mac, .. } => w.summary.wifi_collisions += mac.counters.collisions,
                Cell::Umts { radio, .. } => w.summary.umts_block_errors += radio.counters.block_errors,
            }
        }
        if w.opts.trace_paths {
            for (_, p) in core::mem::take(&mut w.packets) {
                if let Some(t) = p.trace {
                    w.path_traces.push(t);
                }
            }
            w.path_traces.sort_by_key(|t| t.packet_id);
        }
        let calls = w
            .sessions
            .iter()
            .map(|s| CallInfo { final_state: s.session.state, ..s.info.clone() })
            .collect();
        SimOutput {
            stats: self.sched.stats().clone(),
            summary: core::mem::take(&mut w.summary),
            records: core::mem::take(&mut w.records),
            record_packet_ids: core::mem::take(&mut w.record_packet_ids),
            calls,
            event_trace: self.sched.take_trace(),
            path_traces: core::mem::take(&mut w.path_traces),
            session_log: core::mem::take(&mut w.session_log),
            end: self.sched.now(),
        }
    }
}

/// Run `spec` with `seed` for its full run length.
pub fn run(spec: &ScenarioSpec, seed: u64, opts: SimOptions) -> Result<SimOutput, SimError> {
    let mut sim = Simulation::new(spec, seed, opts)?;
    sim.run_until(SimTime::ZERO + spec.run_length)?;
    Ok(sim.finish())
}

type Sched = Scheduler<Ev>;

impl World {
    fn handle(&mut self, s: &mut Sched, ev: SimEvent<Ev>) -> Result<(), Fault> {
        let now = ev.fire_at;
        match ev.payload {
            Ev::CallArrival { process } => self.on_call_arrival(s, process as usize, now),
            Ev::SipSend { session, msg, from } => self.send_sip(s, session, msg, from, now),
            Ev::SipTimer { session } => {
                let ctx = &mut self.sessions[session as usize];
                ctx.timer = None;
                let r = ctx.session.timeout(now);
                self.apply(s, session, r, now)
            }
            Ev::CallEnd { session } => {
                let r = self.sessions[session as usize].session.teardown(now);
                self.apply(s, session, r, now)
            }
            Ev::Frame { session, direction, k } => self.on_frame(s, session, direction, k, now),
            Ev::HopDone { packet } => self.on_hop_done(s, packet, now),
            Ev::WifiAttempt { subnet } => self.on_wifi_attempt(s, subnet, now),
            Ev::WifiIdle { subnet } => {
                if let Cell::Wifi { mac, .. } = &mut self.cells[subnet as usize] {
                    mac.on_idle(now);
                }
                self.reschedule_wifi(s, subnet)
            }
            Ev::UmtsTti { subnet, link } => {
                let Cell::Umts { radio, rng } = &mut self.cells[subnet as usize] else {
                    return Err(Fault(format!("subnet {subnet} is not UMTS")));
                };
                if let Some((packet, outcome, next)) = radio.serve(link as usize, now, rng) {
                    if let Some(at) = next {
                        s.schedule(at, subnet as u32, Ev::UmtsTti { subnet, link })?;
                    }
                    self.on_air_outcome(s, subnet, packet, 0, outcome)?;
                }
                Ok(())
            }
            Ev::UmtsRetx { subnet, packet, retx } => {
                let Cell::Umts { radio, rng } = &mut self.cells[subnet as usize] else {
                    return Err(Fault(format!("subnet {subnet} is not UMTS")));
                };
                let outcome = radio.transmit(now, retx, rng);
                self.on_air_outcome(s, subnet, packet, retx, outcome)
            }
        }
    }

    fn on_call_arrival(&mut self, s: &mut Sched, p: usize, now: SimTime) -> Result<(), Fault> {
        let src = &mut self.sources[p];
        let next = src.process.next_call_arrival(now, &mut src.arrivals).map_err(|e| Fault(format!("{e}")))?;
        s.schedule(next, p as u32, Ev::CallArrival { process: p as u8 })?;
        self.summary.calls_attempted += 1;

        let busy = &self.busy;
        let picked = if self.arrivals_open {
            src.process.pick_parties(|w| busy[w as usize].is_some(), &mut src.parties)
        } else {
            None
        };
        let Some((caller, callee)) = picked else {
            self.summary.calls_blocked += 1;
            return Ok(());
        };
        let duration = src.process.sample_call_duration(&mut src.durations).map_err(|e| Fault(format!("{e}")))?;

        let id = self.sessions.len() as u32;
        let (session, reaction) = initiate(
            id,
            &self.agents[caller as usize],
            &self.agents[callee as usize],
            &self.proxy,
            self.busy[callee as usize].is_some(),
            now,
        )
        .map_err(|e| Fault(format!("{e}")))?;
        self.busy[caller as usize] = Some(id);
        self.busy[callee as usize] = Some(id);
        let ep = |w: u32| self.topology.endpoint(w).map(|e| e.subnet);
        let info = CallInfo {
            call_id: id,
            caller,
            callee,
            caller_subnet: ep(caller).map_err(|e| Fault(format!("{e}")))?,
            callee_subnet: ep(callee).map_err(|e| Fault(format!("{e}")))?,
            t_invite: now,
            t_established: None,
            media_end: None,
            frames_per_direction: 0,
            final_state: SessionState::Inviting,
            t_closed: None,
            sip: Vec::new(),
        };
        let timer = s.schedule(now + self.spec.sip.transaction_timeout, id, Ev::SipTimer { session: id })?;
        self.sessions.push(SessionCtx { session, duration, timer: Some(timer), schedule: None, info });
        self.apply(s, id, reaction, now)
    }

    /// Act on a session reaction: log, send, start or stop media, release
    /// workstations.
    fn apply(&mut self, s: &mut Sched, id: u32, r: Reaction, now: SimTime) -> Result<(), Fault> {
        if self.opts.session_log {
            for t in &r.transitions {
                self.session_log.push(SessionLogLine { ticks: t.at.as_micros(), session_id: id, from: t.from, to: t.to });
            }
        }
        for out in &r.send {
            s.schedule(now + out.after, id, Ev::SipSend { session: id, msg: out.msg, from: out.from })?;
        }
        let timeout = self.spec.sip.transaction_timeout;
        let ctx = &mut self.sessions[id as usize];
        let entered_terminating = r.transitions.iter().any(|t| t.to == SessionState::Terminating);
        if r.established || r.closed || entered_terminating {
            if let Some(t) = ctx.timer.take() {
                s.cancel(t);
            }
        }
        if entered_terminating && !r.closed {
            ctx.timer = Some(s.schedule(now + timeout, id, Ev::SipTimer { session: id })?);
        }
        if r.established {
            self.summary.sessions_established += 1;
            let call = Call {
                call_id: id,
                caller: ctx.session.caller,
                callee: ctx.session.callee,
                start: now,
                duration: ctx.duration,
                state: CallState::Active,
            };
            let schedule = generate_frames(&call, &self.spec.codec).map_err(|e| Fault(format!("{e}")))?;
            ctx.schedule = Some(schedule);
            ctx.info.t_established = Some(now);
            ctx.info.media_end = Some(call.end());
            ctx.info.frames_per_direction = schedule.count;
            if schedule.count > 0 {
                for d in Direction::BOTH {
                    s.schedule(now, id, Ev::Frame { session: id, direction: d, k: 0 })?;
                }
            }
            s.schedule(call.end(), id, Ev::CallEnd { session: id })?;
        }
        if r.closed {
            ctx.info.t_closed = Some(now);
            self.summary.sessions_closed += 1;
            if !ctx.session.is_established_once() {
                self.summary.setups_failed += 1;
            }
            let (a, b) = (ctx.session.caller as usize, ctx.session.callee as usize);
            self.busy[a] = None;
            self.busy[b] = None;
        }
        Ok(())
    }

    fn party_ws(&self, session: u32, party: Party) -> u32 {
        let ss = &self.sessions[session as usize].session;
        match party {
            Party::Caller => ss.caller,
            Party::Callee => ss.callee,
        }
    }

    fn route(&mut self, src: u32, dst: u32, via_proxy: bool) -> Result<Rc<[Hop]>, Fault> {
        if let Some(r) = self.routes.get(&(src, dst, via_proxy)) {
            return Ok(r.clone());
        }
        let r: Rc<[Hop]> = self.topology.route(src, dst, via_proxy).map_err(|e| Fault(format!("{e}")))?.into();
        self.routes.insert((src, dst, via_proxy), r.clone());
        Ok(r)
    }

    fn send_sip(&mut self, s: &mut Sched, session: u32, msg: SipMessage, from: Party, now: SimTime) -> Result<(), Fault> {
        if self.sessions[session as usize].session.state == SessionState::Closed {
            return Ok(());
        }
        let src = self.party_ws(session, from);
        let dst = self.party_ws(session, from.peer());
        let route = self.route(src, dst, true)?;
        self.summary.sip_sent += 1;
        let sip = &mut self.sessions[session as usize].info.sip;
        sip.push(SipTransit { msg, from, packet_id: self.next_packet, sent: now, arrived: None });
        let log = sip.len() - 1;
        self.launch(s, Content::Sip { session, msg, log }, route, now)
    }

    fn on_frame(&mut self, s: &mut Sched, session: u32, direction: Direction, k: u32, now: SimTime) -> Result<(), Fault> {
        let ctx = &self.sessions[session as usize];
        let schedule = ctx.schedule.ok_or_else(|| Fault(format!("frame for session {session} without media")))?;
        debug_assert_eq!(schedule.send_time(k), now);
        let (src, dst) = match direction {
            Direction::CallerToCallee => (ctx.session.caller, ctx.session.callee),
            Direction::CalleeToCaller => (ctx.session.callee, ctx.session.caller),
        };
        if k + 1 < schedule.count {
            s.schedule(schedule.send_time(k + 1), session, Ev::Frame { session, direction, k: k + 1 })?;
        }
        self.records.push(VoicePacketRecord {
            call_id: session,
            direction,
            seq: k,
            t_send: now,
            t_recv: None,
            dropped: false,
        });
        s.stats_mut().packets_created += 1;
        self.record_packet_ids.push(self.next_packet);
        let route = self.route(src, dst, false)?;
        self.launch(s, Content::Voice { record: self.records.len() - 1 }, route, now)
    }

    fn launch(&mut self, s: &mut Sched, content: Content, route: Rc<[Hop]>, now: SimTime) -> Result<(), Fault> {
        let id = self.next_packet;
        self.next_packet += 1;
        let trace = self.opts.trace_paths.then(|| PathSegmentTrace::new(id));
        self.packets.insert(id, InFlight { content, route, hop: 0, hop_ingress: now, trace });
        self.enter_hop(s, id, now)
    }

    fn packet_bytes(&self, p: &InFlight) -> u32 {
        match p.content {
            Content::Voice { .. } => self.spec.codec.packet_bytes(),
            Content::Sip { .. } => self.spec.sip.message_bytes,
        }
    }

    fn enter_hop(&mut self, s: &mut Sched, id: u64, now: SimTime) -> Result<(), Fault> {
        let p = &self.packets[&id];
        let hop = p.route[p.hop];
        let bytes = self.packet_bytes(p);
        let fixed = |d: SimDuration| Some(now + d);
        let done_at = match hop {
            Hop::WifiUp { subnet, station } | Hop::WifiDown { subnet, station } => {
                let contender = match hop {
                    Hop::WifiUp { .. } => station as usize + 1,
                    _ => 0,
                };
                let Cell::Wifi { mac, rng, .. } = &mut self.cells[subnet as usize] else {
                    return Err(Fault(format!("hop {hop} on non-WiFi subnet")));
                };
                if mac.enqueue(contender, Frame { id, bytes }, now, rng).is_err() {
                    return self.drop_packet(s, id, DropReason::QueueOverflow, now);
                }
                return self.reschedule_wifi(s, subnet);
            }
            Hop::UmtsAir { subnet, ue, downlink } => {
                let Cell::Umts { radio, .. } = &mut self.cells[subnet as usize] else {
                    return Err(Fault(format!("hop {hop} on non-UMTS subnet")));
                };
                let link = UmtsRadio::link_index(ue as usize, downlink);
                match radio.enqueue(link, id, now) {
                    Err(_) => return self.drop_packet(s, id, DropReason::QueueOverflow, now),
                    Ok(Some(at)) => {
                        s.schedule(at, subnet as u32, Ev::UmtsTti { subnet, link: link as u16 })?;
                    }
                    Ok(None) => {}
                }
                return Ok(());
            }
            Hop::NodebRnc { subnet } => fixed(self.umts_cell(subnet)?.nodeb_rnc_delay),
            Hop::RncProc { subnet } => fixed(self.umts_cell(subnet)?.rnc_proc_delay),
            Hop::CoreNet { subnet } => fixed(self.umts_cell(subnet)?.cn_delay),
            Hop::Proxy => fixed(self.spec.sip.proxy_delay),
            Hop::Cloud => self.spec.cloud.cloud_forward(&mut self.cloud_rng).map(|d| now + d),
        };
        match done_at {
            Some(at) => {
                s.schedule(at, id as u32, Ev::HopDone { packet: id })?;
                Ok(())
            }
            None => self.drop_packet(s, id, DropReason::CloudLoss, now),
        }
    }

    fn umts_cell(&self, subnet: u8) -> Result<&crate::net::UmtsCell, Fault> {
        match &self.cells[subnet as usize] {
            Cell::Umts { radio, .. } => Ok(radio.cell()),
            Cell::Wifi { .. } => Err(Fault(format!("subnet {subnet} is not UMTS"))),
        }
    }

    fn on_hop_done(&mut self, s: &mut Sched, id: u64, now: SimTime) -> Result<(), Fault> {
        let p = self.packets.get_mut(&id).ok_or_else(|| Fault(format!("unknown packet {id}")))?;
        if let Some(t) = p.trace.as_mut() {
            t.spans.push(SegmentSpan { hop: p.route[p.hop], ingress: p.hop_ingress, egress: now });
        }
        p.hop += 1;
        p.hop_ingress = now;
        if p.hop < p.route.len() {
            return self.enter_hop(s, id, now);
        }
        let p = self.packets.remove(&id).expect("present");
        if let Some(t) = p.trace {
            self.path_traces.push(t);
        }
        match p.content {
            Content::Voice { record } => {
                self.records[record].t_recv = Some(now);
                s.stats_mut().packets_delivered += 1;
                Ok(())
            }
            Content::Sip { session, msg, log } => {
                self.summary.sip_delivered += 1;
                let ctx = &mut self.sessions[session as usize];
                ctx.info.sip[log].arrived = Some(now);
                let r = match ctx.session.on_message(msg, now, self.spec.sip.answer_delay) {
                    Ok(r) => r,
                    Err(_) => {
                        self.summary.protocol_violations += 1;
                        // The session was force-closed; synthesize the closing reaction.
                        Reaction { closed: true, ..Reaction::default() }
                    }
                };
                self.apply(s, session, r, now)
            }
        }
    }

    fn drop_packet(&mut self, s: &mut Sched, id: u64, reason: DropReason, now: SimTime) -> Result<(), Fault> {
        let p = self.packets.remove(&id).ok_or_else(|| Fault(format!("unknown packet {id}")))?;
        if let Some(mut t) = p.trace {
            t.drop = Some((p.route[p.hop], reason, now));
            self.path_traces.push(t);
        }
        match p.content {
            Content::Voice { record } => {
                self.records[record].dropped = true;
                s.stats_mut().packets_dropped += 1;
                self.summary.media_drops.bump(reason);
            }
            Content::Sip { .. } => self.summary.sip_dropped += 1,
        }
        Ok(())
    }

    fn reschedule_wifi(&mut self, s: &mut Sched, subnet: u8) -> Result<(), Fault> {
        let Cell::Wifi { mac, attempt, .. } = &mut self.cells[subnet as usize] else {
            return Err(Fault(format!("subnet {subnet} is not WiFi")));
        };
        if mac.is_busy() {
            return Ok(());
        }
        let next = mac.next_attempt();
        if attempt.map(|a| a.0) == next {
            return Ok(());
        }
        if let Some((_, old)) = attempt.take() {
            s.cancel(old);
        }
        if let Some(at) = next {
            *attempt = Some((at, s.schedule(at, subnet as u32, Ev::WifiAttempt { subnet })?));
        }
        Ok(())
    }

    fn on_wifi_attempt(&mut self, s: &mut Sched, subnet: u8, now: SimTime) -> Result<(), Fault> {
        let Cell::Wifi { mac, attempt, rng } = &mut self.cells[subnet as usize] else {
            return Err(Fault(format!("subnet {subnet} is not WiFi")));
        };
        *attempt = None;
        let outcome = mac.attempt(now, rng);
        for (frame, at) in &outcome.delivered {
            s.schedule(*at, frame.id as u32, Ev::HopDone { packet: frame.id })?;
        }
        s.schedule(outcome.busy_until, subnet as u32, Ev::WifiIdle { subnet })?;
        for frame in outcome.dropped {
            self.drop_packet(s, frame.id, DropReason::CollisionRetryExhausted, now)?;
        }
        Ok(())
    }

    fn on_air_outcome(&mut self, s: &mut Sched, subnet: u8, packet: u64, retx: u32, outcome: AirOutcome) -> Result<(), Fault> {
        match outcome {
            AirOutcome::Delivered(at) => {
                s.schedule(at, packet as u32, Ev::HopDone { packet })?;
            }
            AirOutcome::Retry(at) => {
                s.schedule(at, subnet as u32, Ev::UmtsRetx { subnet, packet, retx: retx + 1 })?;
            }
            AirOutcome::Dropped(at) => return self.drop_packet(s, packet, DropReason::BlerRetxExhausted, at),
        }
        Ok(())
    }
}
