use crate::model::Nanos;

/// Local cycle grid of a node: boundaries at
/// `offset + n T (1 + drift_ppm 1e-6)` in global time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeClock {
    pub offset_ns: Nanos,
    /// Rate error in parts per billion; `|ppb| <= 1e6`.
    pub drift_ppb: i64,
    pub cycle_ns: Nanos,
}

pub const MAX_DRIFT_PPM: f64 = 1000.0;

impl NodeClock {
    pub fn ideal(offset_ns: Nanos, cycle_ns: Nanos) -> Self {
        NodeClock {
            offset_ns,
            drift_ppb: 0,
            cycle_ns,
        }
    }

    pub fn with_drift_ppm(mut self, ppm: f64) -> Self {
        let ppm = ppm.clamp(-MAX_DRIFT_PPM, MAX_DRIFT_PPM);
        self.drift_ppb = (ppm * 1000.0).round() as i64;
        self
    }

    /// Start of local cycle `n`.
    pub fn boundary(&self, n: i64) -> Nanos {
        let nominal = n as i128 * self.cycle_ns as i128;
        let skew = (nominal * self.drift_ppb as i128).div_euclid(1_000_000_000);
        (self.offset_ns as i128 + nominal + skew) as Nanos
    }

    /// The cycle containing `t`: `boundary(n) <= t < boundary(n + 1)`.
    pub fn cycle_at(&self, t: Nanos) -> i64 {
        let span = self.cycle_ns as i128 * (1_000_000_000 + self.drift_ppb as i128);
        let mut n = ((t - self.offset_ns) as i128 * 1_000_000_000).div_euclid(span) as i64;
        while self.boundary(n + 1) <= t {
            n += 1;
        }
        while self.boundary(n) > t {
            n -= 1;
        }
        n
    }

    /// First queue opening strictly after `t`.
    pub fn next_opening_after(&self, t: Nanos) -> (i64, Nanos) {
        let n = self.cycle_at(t) + 1;
        (n, self.boundary(n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ideal_grid() {
        let c = NodeClock::ideal(3, 10);
        assert_eq!(c.boundary(0), 3);
        assert_eq!(c.boundary(5), 53);
        assert_eq!(c.cycle_at(3), 0);
        assert_eq!(c.cycle_at(2), -1);
        assert_eq!(c.cycle_at(12), 0);
        assert_eq!(c.cycle_at(13), 1);
        assert_eq!(c.next_opening_after(13), (2, 23));
        assert_eq!(c.next_opening_after(14), (2, 23));
    }

    proptest! {
        #[test]
        fn cycle_at_inverts_boundary(offset in 0i64..10_000, ppm in -1000.0f64..1000.0, t in 0i64..1_000_000_000_000) {
            let c = NodeClock::ideal(offset, 10_000).with_drift_ppm(ppm);
            let n = c.cycle_at(t);
            prop_assert!(c.boundary(n) <= t && t < c.boundary(n + 1));
            let (m, open) = c.next_opening_after(t);
            prop_assert!(open > t && open - t <= c.boundary(m) - c.boundary(m - 1));
        }
    }
}
