use thiserror::Error;

use super::clock::NodeClock;
use crate::model::{Bytes, Nanos, TransmissionPattern};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("packet of {size} bytes cannot fit a {b_prime}-byte reservation")]
pub struct ShaperOverflow {
    pub size: Bytes,
    pub b_prime: Bytes,
}

/// A packet placed into a reservation by the ingress shaper.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shaped {
    pub size: Bytes,
    /// Reserved cycle of the ingress port.
    pub cycle: i64,
    /// Eligibility time: the boundary that precedes the reserved cycle, so
    /// the next opening strictly after it is the reservation itself.
    pub e0: Nanos,
}

/// Per-flow ingress shaper: at most `b'` bytes in every reserved cycle,
/// reserved cycles `n` with `n = phase (mod m)`.
#[derive(Clone, Debug)]
pub struct Shaper {
    pub pattern: TransmissionPattern,
    pub phase: i64,
    cycle: i64,
    used: Bytes,
}

impl Shaper {
    pub fn new(pattern: TransmissionPattern, phase: i64) -> Self {
        Shaper {
            pattern,
            phase: phase.rem_euclid(pattern.multiple as i64),
            cycle: i64::MIN,
            used: 0,
        }
    }

    fn align(&self, n: i64) -> i64 {
        let m = self.pattern.multiple as i64;
        n + (self.phase - n).rem_euclid(m)
    }

    /// Places a burst arriving at `t` into consecutive reservations, FIFO
    /// after anything already queued.
    pub fn igw_inject(&mut self, clock: &NodeClock, t: Nanos, sizes: &[Bytes]) -> Result<Vec<Shaped>, ShaperOverflow> {
        let b_prime = self.pattern.b_prime;
        let k = clock.cycle_at(t);
        let earliest = self.align(if clock.boundary(k) == t { k + 1 } else { k + 2 });
        if earliest > self.cycle {
            self.cycle = earliest;
            self.used = 0;
        }
        let mut out = Vec::with_capacity(sizes.len());
        for &size in sizes {
            if size > b_prime {
                return Err(ShaperOverflow { size, b_prime });
            }
            if self.used + size > b_prime {
                self.cycle += self.pattern.multiple as i64;
                self.used = 0;
            }
            self.used += size;
            out.push(Shaped {
                size,
                cycle: self.cycle,
                e0: clock.boundary(self.cycle - 1),
            });
        }
        Ok(out)
    }
}

/// Splits a burst into packets of at most `max_packet` bytes.
pub fn packetize(burst: Bytes, max_packet: Bytes) -> Vec<Bytes> {
    let mut out = vec![max_packet; (burst / max_packet) as usize];
    if !burst.is_multiple_of(max_packet) {
        out.push(burst % max_packet);
    }
    out
}
