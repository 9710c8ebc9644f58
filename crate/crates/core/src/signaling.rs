//! Point-to-point SIP sessions: registration with a proxy, the
//! INVITE/180/200/ACK handshake and BYE teardown.
//!
//! The state machine is transport-agnostic. Every reaction lists the
//! messages to send and the side that sends them; the caller of this module
//! decides how those messages travel.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::time::{SimDuration, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum SipError {
    #[error("agent {0} is already registered")]
    DuplicateRegistration(u32),
    #[error("uri {0} is not registered")]
    NotFound(u32),
    #[error("callee {0} is not registered")]
    CalleeUnregistered(u32),
    #[error("caller {0} is not registered")]
    CallerUnregistered(u32),
    #[error("callee {0} is busy")]
    CalleeBusy(u32),
    #[error("{msg:?} is not legal in state {state}")]
    ProtocolViolation { state: SessionState, msg: SipMessage },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SipMessage {
    Invite,
    Ringing180,
    Ok200,
    Ack,
    Bye,
}

impl SipMessage {
    pub fn name(self) -> &'static str {
        match self {
            SipMessage::Invite => "INVITE",
            SipMessage::Ringing180 => "180",
            SipMessage::Ok200 => "200",
            SipMessage::Ack => "ACK",
            SipMessage::Bye => "BYE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    Idle,
    Inviting,
    Ringing,
    Established,
    Terminating,
    Closed,
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionState::Idle => "Idle",
            SessionState::Inviting => "Inviting",
            SessionState::Ringing => "Ringing",
            SessionState::Established => "Established",
            SessionState::Terminating => "Terminating",
            SessionState::Closed => "Closed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    Caller,
    Callee,
}

impl Party {
    pub fn peer(self) -> Party {
        match self {
            Party::Caller => Party::Callee,
            Party::Callee => Party::Caller,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SipAgent {
    pub uri: u32,
    pub registered: bool,
    pub home_proxy: u32,
}

impl SipAgent {
    pub fn new(uri: u32, home_proxy: u32) -> Self {
        SipAgent { uri, registered: false, home_proxy }
    }
}

/// Location of a registered agent; for the simulator this is the
/// workstation's subnet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Binding {
    pub uri: u32,
    pub location: u32,
}

#[derive(Debug, Clone, Default)]
pub struct SipProxy {
    pub id: u32,
    registry: BTreeMap<u32, u32>,
}

impl SipProxy {
    pub fn new(id: u32) -> Self {
        SipProxy { id, registry: BTreeMap::new() }
    }

    /// Registers `agent` at `location`. A second registration refreshes the
    /// binding and is reported as `DuplicateRegistration`.
    pub fn register(&mut self, agent: &mut SipAgent, location: u32) -> Result<Binding, SipError> {
        let fresh = self.registry.insert(agent.uri, location).is_none();
        let already = agent.registered;
        agent.registered = true;
        agent.home_proxy = self.id;
        if !fresh || already {
            return Err(SipError::DuplicateRegistration(agent.uri));
        }
        Ok(Binding { uri: agent.uri, location })
    }

    pub fn lookup(&self, uri: u32) -> Result<u32, SipError> {
        self.registry.get(&uri).copied().ok_or(SipError::NotFound(uri))
    }

    pub fn len(&self) -> usize {
        self.registry.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registry.is_empty()
    }
}

/// A message to put on the wire `after` the triggering event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outbound {
    pub msg: SipMessage,
    pub from: Party,
    pub after: SimDuration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub at: SimTime,
    pub from: SessionState,
    pub to: SessionState,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Reaction {
    pub send: Vec<Outbound>,
    pub transitions: Vec<Transition>,
    /// Session reached Established on this step; media may start.
    pub established: bool,
    /// Session reached Closed on this step.
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SipSession {
    pub session_id: u32,
    pub caller: u32,
    pub callee: u32,
    pub state: SessionState,
    /// 200 OK for the INVITE has reached the caller.
    answered: bool,
    pub t_invite: Option<SimTime>,
    pub t_established: Option<SimTime>,
}

impl SipSession {
    fn new(session_id: u32, caller: u32, callee: u32) -> Self {
        SipSession {
            session_id,
            caller,
            callee,
            state: SessionState::Idle,
            answered: false,
            t_invite: None,
            t_established: None,
        }
    }

    fn move_to(&mut self, to: SessionState, at: SimTime, r: &mut Reaction) {
        r.transitions.push(Transition { at, from: self.state, to });
        self.state = to;
        if to == SessionState::Closed {
            r.closed = true;
        }
    }

    /// Applies `msg`, which has just arrived at its destination at `now`.
    ///
    /// Illegal messages force the session to Closed and return
    /// `ProtocolViolation`; messages for a closed session are ignored.
    pub fn on_message(&mut self, msg: SipMessage, now: SimTime, answer_delay: SimDuration) -> Result<Reaction, SipError> {
        use SessionState::*;
        use SipMessage::*;

        let mut r = Reaction::default();
        match (self.state, msg) {
            (Closed, _) => {}
            (Inviting, Invite) => {
                r.send.push(Outbound { msg: Ringing180, from: Party::Callee, after: SimDuration::ZERO });
                r.send.push(Outbound { msg: Ok200, from: Party::Callee, after: answer_delay });
            }
            (Inviting, Ringing180) => self.move_to(Ringing, now, &mut r),
            (Inviting | Ringing, Ok200) if !self.answered => {
                if self.state == Inviting {
                    self.move_to(Ringing, now, &mut r);
                }
                self.answered = true;
                r.send.push(Outbound { msg: Ack, from: Party::Caller, after: SimDuration::ZERO });
            }
            // 180 overtaken by the 200 it preceded.
            (Ringing, Ringing180) if self.answered => {}
            (Ringing, Ack) if self.answered => {
                self.t_established = Some(now);
                self.move_to(Established, now, &mut r);
                r.established = true;
            }
            (Established, Bye) => {
                self.move_to(Terminating, now, &mut r);
                r.send.push(Outbound { msg: Ok200, from: Party::Callee, after: SimDuration::ZERO });
            }
            (Terminating, Bye) => {
                r.send.push(Outbound { msg: Ok200, from: Party::Callee, after: SimDuration::ZERO });
            }
            (Terminating, Ok200) => self.move_to(Closed, now, &mut r),
            (state, msg) => {
                self.move_to(Closed, now, &mut r);
                return Err(SipError::ProtocolViolation { state, msg });
            }
        }
        Ok(r)
    }

    /// Call-duration expiry: an established session sends BYE and moves to
    /// Terminating. Any other state is a no-op.
    pub fn teardown(&mut self, now: SimTime) -> Reaction {
        let mut r = Reaction::default();
        if self.state == SessionState::Established {
            self.move_to(SessionState::Terminating, now, &mut r);
            r.send.push(Outbound { msg: SipMessage::Bye, from: Party::Caller, after: SimDuration::ZERO });
        }
        r
    }

    /// Transaction timer expiry: anything not yet Closed is closed.
    pub fn timeout(&mut self, now: SimTime) -> Reaction {
        let mut r = Reaction::default();
        if self.state != SessionState::Closed {
            self.move_to(SessionState::Closed, now, &mut r);
        }
        r
    }

    pub fn is_established_once(&self) -> bool {
        self.t_established.is_some()
    }
}

/// Starts a session: both agents registered and idle, INVITE leaves the caller.
pub fn initiate(
    session_id: u32,
    caller: &SipAgent,
    callee: &SipAgent,
    proxy: &SipProxy,
    callee_busy: bool,
    now: SimTime,
) -> Result<(SipSession, Reaction), SipError> {
    if !caller.registered || proxy.lookup(caller.uri).is_err() {
        return Err(SipError::CallerUnregistered(caller.uri));
    }
    if !callee.registered || proxy.lookup(callee.uri).is_err() {
        return Err(SipError::CalleeUnregistered(callee.uri));
    }
    if callee_busy {
        return Err(SipError::CalleeBusy(callee.uri));
    }
    let mut s = SipSession::new(session_id, caller.uri, callee.uri);
    let mut r = Reaction::default();
    s.t_invite = Some(now);
    s.move_to(SessionState::Inviting, now, &mut r);
    r.send.push(Outbound { msg: SipMessage::Invite, from: Party::Caller, after: SimDuration::ZERO });
    Ok((s, r))
}
