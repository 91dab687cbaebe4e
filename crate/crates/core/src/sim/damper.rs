use thiserror::Error;

use crate::model::Nanos;

/// Carried from a parent to its child: the parent's measured queuing delay
/// and its bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DamperHeader {
    pub q_prev: Nanos,
    pub q_bound: Nanos,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("queuing delay {q} ns exceeds its bound {bound} ns")]
pub struct QueuingBoundFault {
    pub q: Nanos,
    pub bound: Nanos,
}

/// `E = t_in + P + (Q_prev - q_prev)`.
pub fn compute_eligibility(t_in: Nanos, p_next: Nanos, header: DamperHeader) -> Result<Nanos, QueuingBoundFault> {
    if header.q_prev > header.q_bound || header.q_prev < 0 {
        return Err(QueuingBoundFault {
            q: header.q_prev,
            bound: header.q_bound,
        });
    }
    Ok(t_in + p_next + (header.q_bound - header.q_prev))
}

/// Header for the next hop: `q = t_out - E` and this node's bound.
pub fn record_departure(e: Nanos, t_out: Nanos, q_bound: Nanos) -> DamperHeader {
    debug_assert!(t_out >= e);
    DamperHeader {
        q_prev: t_out - e,
        q_bound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NS_PER_US as US;

    #[test]
    fn eligibility_examples() {
        let h = |q| DamperHeader {
            q_prev: q,
            q_bound: 20 * US,
        };
        assert_eq!(compute_eligibility(100 * US, US, h(3 * US)), Ok(118 * US));
        assert_eq!(compute_eligibility(100 * US, US, h(20 * US)), Ok(101 * US));
        assert_eq!(compute_eligibility(100 * US, US, h(0)), Ok(121 * US));
        assert!(compute_eligibility(100 * US, US, h(21 * US)).is_err());
    }

    #[test]
    fn departure_examples() {
        assert_eq!(record_departure(7, 7, 20).q_prev, 0);
        let h = record_departure(50 * US, 63 * US, 20 * US);
        assert_eq!((h.q_prev, h.q_bound), (13 * US, 20 * US));
        let late = record_departure(0, 21 * US, 20 * US);
        assert!(compute_eligibility(0, 0, late).is_err());
    }
}
