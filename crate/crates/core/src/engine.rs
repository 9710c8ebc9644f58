//! Future-event list and the single-threaded event loop.
//!
//! Events are ordered by `(fire_at, seq)`; `seq` is an insertion counter so
//! simultaneous events fire in the order they were scheduled. Cancellation is
//! lazy: the heap entry stays in place and is skipped when popped.

use alloc::collections::{BTreeSet, BinaryHeap};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use crate::time::SimTime;

/// Handle returned by [`Scheduler::schedule`]. Equal to the event's `seq`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId(u64);

impl EventId {
    pub fn seq(self) -> u64 {
        self.0
    }
}

/// Short label for an event payload, used in trace dumps.
pub trait EventKind {
    fn kind(&self) -> &'static str;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent<P> {
    pub fire_at: SimTime,
    pub seq: u64,
    /// Node or session the event is addressed to.
    pub target: u32,
    pub payload: P,
}

struct Entry<P>(SimEvent<P>);

impl<P> Entry<P> {
    fn key(&self) -> (SimTime, u64) {
        (self.0.fire_at, self.0.seq)
    }
}

impl<P> PartialEq for Entry<P> {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl<P> Eq for Entry<P> {}

impl<P> PartialOrd for Entry<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Entry<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("event scheduled in the past: fire_at {fire_at} < now {now}")]
    SchedulingInPast { fire_at: SimTime, now: SimTime },
    #[error("run_until target {t_end} is before now {now}")]
    EndInPast { t_end: SimTime, now: SimTime },
    #[error("event handler fault at {at}: {message}")]
    EventHandlerFault { at: SimTime, message: String },
}

/// Counters reported by [`Scheduler::run_until`]. Packet counters are
/// maintained by event handlers through [`Scheduler::stats_mut`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunStats {
    pub events_processed: u64,
    pub packets_created: u64,
    pub packets_delivered: u64,
    pub packets_dropped: u64,
}

/// One processed event, as written to the optional trace dump.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceLine {
    pub ticks: u64,
    pub seq: u64,
    pub target: u32,
    pub kind: &'static str,
}

pub struct Scheduler<P> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Reverse<Entry<P>>>,
    pending: BTreeSet<u64>,
    stats: RunStats,
    trace: Option<Vec<TraceLine>>,
}

impl<P> Default for Scheduler<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Scheduler<P> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            pending: BTreeSet::new(),
            stats: RunStats::default(),
            trace: None,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Start recording every processed event.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<TraceLine> {
        self.trace.as_mut().map(core::mem::take).unwrap_or_default()
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    pub fn stats_mut(&mut self) -> &mut RunStats {
        &mut self.stats
    }

    /// Number of live (scheduled, not cancelled, not fired) events.
    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn schedule(&mut self, fire_at: SimTime, target: u32, payload: P) -> Result<EventId, EngineError> {
        if fire_at < self.now {
            return Err(EngineError::SchedulingInPast { fire_at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.pending.insert(seq);
        self.heap.push(Reverse(Entry(SimEvent { fire_at, seq, target, payload })));
        Ok(EventId(seq))
    }

    /// Returns true if the event was pending and is now inert.
    pub fn cancel(&mut self, id: EventId) -> bool {
        self.pending.remove(&id.0)
    }

    /// Fire time of the next live event, discarding tombstones on the way.
    fn peek_live(&mut self) -> Option<SimTime> {
        while let Some(Reverse(top)) = self.heap.peek() {
            if self.pending.contains(&top.0.seq) {
                return Some(top.0.fire_at);
            }
            self.heap.pop();
        }
        None
    }

    /// Process all events with `fire_at <= t_end` in `(fire_at, seq)` order,
    /// then advance the clock to `t_end`.
    ///
    /// A handler error aborts the run; the clock stays at the failing event
    /// and the partial statistics remain available through [`Self::stats`].
    pub fn run_until<F, E>(&mut self, t_end: SimTime, mut handler: F) -> Result<RunStats, EngineError>
    where
        P: EventKind,
        F: FnMut(&mut Scheduler<P>, SimEvent<P>) -> Result<(), E>,
        E: core::fmt::Display,
    {
        if t_end < self.now {
            return Err(EngineError::EndInPast { t_end, now: self.now });
        }
        while let Some(at) = self.peek_live() {
            if at > t_end {
                break;
            }
            let Reverse(Entry(ev)) = self.heap.pop().expect("peeked");
            self.pending.remove(&ev.seq);
            debug_assert!(ev.fire_at >= self.now);
            self.now = ev.fire_at;
            self.stats.events_processed += 1;
            if let Some(trace) = self.trace.as_mut() {
                trace.push(TraceLine {
                    ticks: ev.fire_at.as_micros(),
                    seq: ev.seq,
                    target: ev.target,
                    kind: ev.payload.kind(),
                });
            }
            if let Err(e) = handler(self, ev) {
                return Err(EngineError::EventHandlerFault {
                    at: self.now,
                    message: alloc::format!("{e}"),
                });
            }
        }
        self.now = t_end;
        Ok(self.stats.clone())
    }
}
