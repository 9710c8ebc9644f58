//! UMTS radio bearer as a calibrated delay pipeline.
//!
//! Each UE has one FIFO queue per direction. A new packet starts on the next
//! TTI boundary and occupies one TTI; a failed block is retried on a later
//! TTI without holding up the queue. Past the air interface the packet sees
//! the fixed Node-B→RNC, RNC processing and core-network delays.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::rng::RngStream;
use crate::time::{SimDuration, SimTime};

#[derive(Debug, Clone, PartialEq)]
pub struct UmtsCell {
    pub tti: SimDuration,
    /// Nominal conversational bearer rate; one voice packet fits one TTI.
    pub bearer_rate_bps: u64,
    pub bler: f64,
    pub max_rlc_retx: u32,
    /// Extra wait between a failed block and its retransmission, on top of
    /// the TTI it occupied.
    pub rlc_retx_delay: SimDuration,
    pub nodeb_rnc_delay: SimDuration,
    pub rnc_proc_delay: SimDuration,
    pub cn_delay: SimDuration,
    pub air_interleave_delay: SimDuration,
    pub queue_cap: usize,
}

impl Default for UmtsCell {
    fn default() -> Self {
        UmtsCell {
            tti: SimDuration::from_millis(10),
            bearer_rate_bps: 64_000,
            bler: 0.02,
            max_rlc_retx: 2,
            rlc_retx_delay: SimDuration::ZERO,
            nodeb_rnc_delay: SimDuration::from_millis(15),
            rnc_proc_delay: SimDuration::from_millis(25),
            cn_delay: SimDuration::from_millis(25),
            air_interleave_delay: SimDuration::from_millis(40),
            queue_cap: 50,
        }
    }
}

impl UmtsCell {
    pub fn validate(&self) -> bool {
        (0.0..1.0).contains(&self.bler) && !self.tti.is_zero() && self.queue_cap >= 1 && self.bearer_rate_bps > 0
    }

    /// One-way delay through the UTRAN and core network for a packet that
    /// arrives on a TTI boundary and is received on the first attempt.
    pub fn best_case_delay(&self) -> SimDuration {
        self.tti + self.air_interleave_delay + self.nodeb_rnc_delay + self.rnc_proc_delay + self.cn_delay
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AirOutcome {
    /// Block received; the packet leaves the air segment at this time.
    Delivered(SimTime),
    /// Block lost; try again at this TTI boundary.
    Retry(SimTime),
    /// Block lost and retransmissions exhausted.
    Dropped(SimTime),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueueOverflow;

#[derive(Debug, Clone, Default)]
struct Link {
    queue: VecDeque<u64>,
    tti_pending: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RadioCounters {
    pub blocks_sent: u64,
    pub block_errors: u64,
    pub bler_drops: u64,
    pub overflow_drops: u64,
}

/// Air-interface state for one cell: `links[2·ue + dir]`, dir 0 up, 1 down.
#[derive(Debug, Clone)]
pub struct UmtsRadio {
    cell: UmtsCell,
    links: Vec<Link>,
    pub counters: RadioCounters,
}

impl UmtsRadio {
    pub fn new(cell: UmtsCell, ues: usize) -> Self {
        UmtsRadio { cell, links: alloc::vec![Link::default(); 2 * ues], counters: RadioCounters::default() }
    }

    pub fn cell(&self) -> &UmtsCell {
        &self.cell
    }

    pub fn link_index(ue: usize, downlink: bool) -> usize {
        2 * ue + downlink as usize
    }

    /// Queue packet `id` on `link`. Returns the TTI boundary at which the
    /// link must be served if it was not already waiting for one.
    pub fn enqueue(&mut self, link: usize, id: u64, now: SimTime) -> Result<Option<SimTime>, QueueOverflow> {
        let l = &mut self.links[link];
        if l.queue.len() >= self.cell.queue_cap {
            self.counters.overflow_drops += 1;
            return Err(QueueOverflow);
        }
        l.queue.push_back(id);
        if l.tti_pending {
            return Ok(None);
        }
        l.tti_pending = true;
        Ok(Some(now.ceil_to(self.cell.tti)))
    }

    /// Serve `link` on the TTI starting at `now`: the head packet goes on
    /// air. Returns the packet, its first-attempt outcome and the next TTI
    /// at which the link must be served, if its queue is not empty.
    pub fn serve(&mut self, link: usize, now: SimTime, rng: &mut RngStream) -> Option<(u64, AirOutcome, Option<SimTime>)> {
        let l = &mut self.links[link];
        let Some(id) = l.queue.pop_front() else {
            l.tti_pending = false;
            return None;
        };
        let next = if l.queue.is_empty() {
            l.tti_pending = false;
            None
        } else {
            Some(now + self.cell.tti)
        };
        let outcome = self.transmit(now, 0, rng);
        Some((id, outcome, next))
    }

    /// Send one block during the TTI starting at `now`; `retx` counts
    /// earlier failed attempts of the same packet.
    pub fn transmit(&mut self, now: SimTime, retx: u32, rng: &mut RngStream) -> AirOutcome {
        self.counters.blocks_sent += 1;
        let end = now + self.cell.tti;
        if !rng.bernoulli(self.cell.bler) {
            return AirOutcome::Delivered(end + self.cell.air_interleave_delay);
        }
        self.counters.block_errors += 1;
        if retx < self.cell.max_rlc_retx {
            AirOutcome::Retry((end + self.cell.rlc_retx_delay).ceil_to(self.cell.tti))
        } else {
            self.counters.bler_drops += 1;
            AirOutcome::Dropped(end)
        }
    }
}
