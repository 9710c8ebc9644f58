//! 802.11 DCF at slot granularity.
//!
//! The access point and every station are contenders for one shared medium.
//! Each contender owns a FIFO queue and a backoff counter. Counters only run
//! while the medium has been idle for DIFS and are frozen while it is busy;
//! counting is aligned to a common slot grid so that two contenders whose
//! counters expire together transmit in the same slot and collide.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::rng::RngStream;
use crate::time::{SimDuration, SimTime};

/// ACK frame size and control rate (802.11b basic rate).
pub const ACK_BYTES: u64 = 14;
pub const ACK_RATE_BPS: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct WifiCell {
    pub data_rate_bps: u64,
    pub slot: SimDuration,
    pub sifs: SimDuration,
    pub difs: SimDuration,
    pub cw_min: u32,
    pub cw_max: u32,
    pub retry_limit: u32,
    pub phy_mac_overhead_bytes: u32,
    pub queue_cap: usize,
}

impl Default for WifiCell {
    fn default() -> Self {
        WifiCell {
            data_rate_bps: 11_000_000,
            slot: SimDuration::from_micros(20),
            sifs: SimDuration::from_micros(10),
            difs: SimDuration::from_micros(50),
            cw_min: 31,
            cw_max: 1023,
            retry_limit: 7,
            phy_mac_overhead_bytes: 58,
            queue_cap: 50,
        }
    }
}

impl WifiCell {
    pub fn validate(&self) -> bool {
        self.cw_min < self.cw_max
            && self.retry_limit >= 1
            && self.data_rate_bps > 0
            && !self.slot.is_zero()
            && self.queue_cap >= 1
    }

    /// Airtime of a data frame carrying `bytes` above the MAC.
    pub fn data_airtime(&self, bytes: u32) -> SimDuration {
        let bits = (bytes as u64 + self.phy_mac_overhead_bytes as u64) * 8;
        SimDuration::from_micros((bits * 1_000_000).div_ceil(self.data_rate_bps))
    }

    pub fn ack_airtime(&self) -> SimDuration {
        SimDuration::from_micros((ACK_BYTES * 8 * 1_000_000).div_ceil(ACK_RATE_BPS))
    }

    /// Data + SIFS + ACK: how long a successful exchange holds the medium.
    pub fn exchange_time(&self, bytes: u32) -> SimDuration {
        self.data_airtime(bytes) + self.sifs + self.ack_airtime()
    }

    /// Expected service time of a lone contender with an empty queue:
    /// DIFS + mean initial backoff + exchange.
    pub fn lone_station_service_time_us(&self, bytes: u32) -> f64 {
        self.difs.as_micros() as f64
            + self.cw_min as f64 / 2.0 * self.slot.as_micros() as f64
            + self.exchange_time(bytes).as_micros() as f64
    }
}

/// A frame queued at a contender; `id` identifies the packet to the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frame {
    pub id: u64,
    pub bytes: u32,
}

#[derive(Debug, Clone)]
struct Contender {
    queue: VecDeque<Frame>,
    backoff: u32,
    cw: u32,
    retries: u32,
    /// Grid time from which the counter is decrementing; `None` while frozen.
    countdown_from: Option<SimTime>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueueOverflow;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttemptOutcome {
    /// Frames whose exchange completed, with the completion time.
    pub delivered: Vec<(Frame, SimTime)>,
    /// Frames dropped after exhausting the retry limit.
    pub dropped: Vec<Frame>,
    /// End of the busy period started by this attempt.
    pub busy_until: SimTime,
    pub collided: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MacCounters {
    pub successes: u64,
    pub collisions: u64,
    pub retry_drops: u64,
    pub overflow_drops: u64,
}

/// DCF state of one cell. Contender 0 is the access point.
#[derive(Debug, Clone)]
pub struct WifiMac {
    cell: WifiCell,
    contenders: Vec<Contender>,
    busy_until: Option<SimTime>,
    idle_since: SimTime,
    pub counters: MacCounters,
}

impl WifiMac {
    pub fn new(cell: WifiCell, stations: usize) -> Self {
        let c = Contender { queue: VecDeque::new(), backoff: 0, cw: cell.cw_min, retries: 0, countdown_from: None };
        WifiMac {
            contenders: alloc::vec![c; stations + 1],
            cell,
            busy_until: None,
            idle_since: SimTime::ZERO,
            counters: MacCounters::default(),
        }
    }

    pub fn cell(&self) -> &WifiCell {
        &self.cell
    }

    pub fn queue_len(&self, contender: usize) -> usize {
        self.contenders[contender].queue.len()
    }

    pub fn is_busy(&self) -> bool {
        self.busy_until.is_some()
    }

    /// First slot boundary at or after `now + DIFS` on the grid anchored at
    /// the start of the current idle period.
    fn aligned_start(&self, now: SimTime) -> SimTime {
        let anchor = self.idle_since + self.cell.difs;
        let elapsed = now.saturating_since(self.idle_since).as_micros();
        let slot = self.cell.slot.as_micros();
        anchor + SimDuration::from_micros(elapsed.div_ceil(slot) * slot)
    }

    /// Queue `frame` at `contender`. Returns `Err` when the queue is full.
    pub fn enqueue(&mut self, contender: usize, frame: Frame, now: SimTime, rng: &mut RngStream) -> Result<(), QueueOverflow> {
        if self.contenders[contender].queue.len() >= self.cell.queue_cap {
            self.counters.overflow_drops += 1;
            return Err(QueueOverflow);
        }
        let was_empty = self.contenders[contender].queue.is_empty();
        self.contenders[contender].queue.push_back(frame);
        if was_empty {
            let start = (!self.is_busy()).then(|| self.aligned_start(now));
            let c = &mut self.contenders[contender];
            c.backoff = rng.uniform_inclusive(c.cw as u64) as u32;
            c.countdown_from = start;
        }
        Ok(())
    }

    /// Time of the next transmission attempt, if any contender is counting.
    pub fn next_attempt(&self) -> Option<SimTime> {
        let slot = self.cell.slot;
        self.contenders
            .iter()
            .filter(|c| !c.queue.is_empty())
            .filter_map(|c| c.countdown_from.map(|t| t + slot.saturating_mul(c.backoff as u64)))
            .min()
    }

    /// Resolve the attempt scheduled for `now`: one transmitter succeeds,
    /// several collide.
    pub fn attempt(&mut self, now: SimTime, rng: &mut RngStream) -> AttemptOutcome {
        debug_assert_eq!(self.next_attempt(), Some(now));
        let slot = self.cell.slot;
        let mut transmitters = Vec::new();
        for (i, c) in self.contenders.iter_mut().enumerate() {
            let Some(from) = c.countdown_from.take() else { continue };
            if c.queue.is_empty() {
                continue;
            }
            if from + slot.saturating_mul(c.backoff as u64) == now {
                transmitters.push(i);
            } else if now > from {
                let elapsed = ((now - from).as_micros() / slot.as_micros()) as u32;
                c.backoff -= elapsed.min(c.backoff);
            }
        }

        let mut out = AttemptOutcome::default();
        if let [only] = transmitters[..] {
            let c = &mut self.contenders[only];
            let frame = c.queue.pop_front().expect("transmitter has a frame");
            let end = now + self.cell.exchange_time(frame.bytes);
            out.delivered.push((frame, end));
            out.busy_until = end;
            c.cw = self.cell.cw_min;
            c.retries = 0;
            if !c.queue.is_empty() {
                c.backoff = rng.uniform_inclusive(c.cw as u64) as u32;
            }
            self.counters.successes += 1;
        } else {
            out.collided = true;
            self.counters.collisions += 1;
            let longest = transmitters
                .iter()
                .map(|&i| self.cell.data_airtime(self.contenders[i].queue[0].bytes))
                .max()
                .unwrap_or(SimDuration::ZERO);
            out.busy_until = now + longest + self.cell.sifs + self.cell.ack_airtime();
            for &i in &transmitters {
                let c = &mut self.contenders[i];
                c.retries += 1;
                if c.retries > self.cell.retry_limit {
                    out.dropped.push(c.queue.pop_front().expect("transmitter has a frame"));
                    self.counters.retry_drops += 1;
                    c.retries = 0;
                    c.cw = self.cell.cw_min;
                } else {
                    c.cw = (2 * c.cw + 1).min(self.cell.cw_max);
                }
                if !c.queue.is_empty() {
                    c.backoff = rng.uniform_inclusive(c.cw as u64) as u32;
                }
            }
        }
        self.busy_until = Some(out.busy_until);
        out
    }

    /// The busy period ended at `now`; frozen counters resume after DIFS.
    pub fn on_idle(&mut self, now: SimTime) {
        debug_assert_eq!(self.busy_until, Some(now));
        self.busy_until = None;
        self.idle_since = now;
        let start = now + self.cell.difs;
        for c in self.contenders.iter_mut().filter(|c| !c.queue.is_empty()) {
            c.countdown_from = Some(start);
        }
    }
}
