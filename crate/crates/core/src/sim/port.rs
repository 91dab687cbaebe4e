use std::collections::{BTreeSet, VecDeque};

use super::clock::NodeClock;
use crate::model::{Bytes, Nanos, NS_PER_S};

/// Serialization time of `bytes` at `rate_bps`, rounded up.
pub fn tx_ns(bytes: Bytes, rate_bps: u64) -> Nanos {
    (bytes as u128 * 8 * NS_PER_S as u128).div_ceil(rate_bps as u128) as Nanos
}

#[derive(Clone, Debug, Default)]
struct GatedQueue {
    cycle: i64,
    packets: VecDeque<(usize, Bytes)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PortAction {
    /// Start a high-priority transmission from the open queue.
    Hp { packet: usize, size: Bytes, cycle: i64 },
    /// Start a best-effort transmission.
    Be { packet: usize, size: Bytes },
    /// A high-priority packet cannot finish before its cycle closes.
    Overrun { packet: usize, size: Bytes, cycle: i64 },
    /// Nothing to send now; wake up at the given boundary if set.
    Idle { wake: Option<(i64, Nanos)> },
}

/// Output port with `N` cyclically opened gated queues and a lower
/// priority best-effort FIFO.
#[derive(Clone, Debug)]
pub struct PortScheduler {
    pub clock: NodeClock,
    pub rate_bps: u64,
    queues: Vec<GatedQueue>,
    be: VecDeque<(usize, Bytes)>,
    be_bytes: Bytes,
    pub be_limit: Bytes,
    pub busy: bool,
    wakes: BTreeSet<i64>,
}

impl PortScheduler {
    pub fn new(clock: NodeClock, rate_bps: u64, queues: u32, be_limit: Bytes) -> Self {
        PortScheduler {
            clock,
            rate_bps,
            queues: vec![GatedQueue::default(); queues as usize],
            be: VecDeque::new(),
            be_bytes: 0,
            be_limit,
            busy: false,
            wakes: BTreeSet::new(),
        }
    }

    pub fn tx_ns(&self, size: Bytes) -> Nanos {
        tx_ns(size, self.rate_bps)
    }

    fn slot(&self, cycle: i64) -> usize {
        cycle.rem_euclid(self.queues.len() as i64) as usize
    }

    /// Index of the queue open at `t`.
    pub fn open_queue(&self, t: Nanos) -> usize {
        self.slot(self.clock.cycle_at(t))
    }

    /// Puts a packet into the first queue opening strictly after `e`.
    /// Returns the queue index, the cycle and its opening time, or `Err`
    /// with the cycle when that queue still holds an older cycle.
    pub fn enqueue_after_eligibility(&mut self, packet: usize, size: Bytes, e: Nanos) -> Result<(usize, i64, Nanos), i64> {
        let (cycle, opening) = self.clock.next_opening_after(e);
        let slot = self.slot(cycle);
        let q = &mut self.queues[slot];
        if q.cycle != cycle {
            if !q.packets.is_empty() {
                return Err(cycle);
            }
            q.cycle = cycle;
        }
        q.packets.push_back((packet, size));
        Ok((slot, cycle, opening))
    }

    /// Returns false when the best-effort FIFO is full.
    pub fn enqueue_best_effort(&mut self, packet: usize, size: Bytes) -> bool {
        if self.be_bytes + size > self.be_limit {
            return false;
        }
        self.be_bytes += size;
        self.be.push_back((packet, size));
        true
    }

    /// Registers a wake-up at the opening of `cycle`; returns its time when
    /// none was pending.
    pub fn request_wake(&mut self, cycle: i64) -> Option<Nanos> {
        self.wakes.insert(cycle).then(|| self.clock.boundary(cycle))
    }

    pub fn wake_fired(&mut self, cycle: i64) {
        self.wakes.remove(&cycle);
    }

    /// Decides what the idle port does at `now`. High-priority packets of
    /// the open queue go first; best-effort packets start only if they end
    /// before the next boundary.
    pub fn next_action(&mut self, now: Nanos) -> PortAction {
        debug_assert!(!self.busy);
        let cycle = self.clock.cycle_at(now);
        let end = self.clock.boundary(cycle + 1);
        let slot = self.slot(cycle);
        if self.queues[slot].cycle == cycle {
            if let Some((packet, size)) = self.queues[slot].packets.pop_front() {
                if now + self.tx_ns(size) <= end {
                    return PortAction::Hp { packet, size, cycle };
                }
                return PortAction::Overrun { packet, size, cycle };
            }
        }
        if let Some(&(packet, size)) = self.be.front() {
            if now + self.tx_ns(size) <= end {
                self.be.pop_front();
                self.be_bytes -= size;
                return PortAction::Be { packet, size };
            }
            return PortAction::Idle {
                wake: self.request_wake(cycle + 1).map(|t| (cycle + 1, t)),
            };
        }
        PortAction::Idle { wake: None }
    }

    pub fn hp_backlog(&self) -> usize {
        self.queues.iter().map(|q| q.packets.len()).sum()
    }
}
