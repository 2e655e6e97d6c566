//! Resource accounting: what the protocols consume and what they leave
//! behind, both as closed-form per-message vectors and as integer
//! counters accumulated by live runs.
//!
//! Conventions: `channel_uses` on the left side of an inequality counts
//! uses by the protocol itself, not uses spent restocking ebits; the
//! restocking cost enters through [`net_rate`], which charges any ebit
//! deficit against the supply line `1 use >= (1-p) ebits`. Components
//! are nonnegative except inside net-balance arithmetic.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::protocol::ProtocolTrace;

/// Fractional per-message resource amounts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ResourceVector {
    pub channel_uses: f64,
    pub ebits_ab: f64,
    pub ebits_be: f64,
    pub ghz_abe: f64,
    pub qbits: f64,
}

impl ResourceVector {
    pub fn scaled(self, factor: f64) -> ResourceVector {
        ResourceVector {
            channel_uses: self.channel_uses * factor,
            ebits_ab: self.ebits_ab * factor,
            ebits_be: self.ebits_be * factor,
            ghz_abe: self.ghz_abe * factor,
            qbits: self.qbits * factor,
        }
    }

    pub fn plus(self, other: ResourceVector) -> ResourceVector {
        ResourceVector {
            channel_uses: self.channel_uses + other.channel_uses,
            ebits_ab: self.ebits_ab + other.ebits_ab,
            ebits_be: self.ebits_be + other.ebits_be,
            ghz_abe: self.ghz_abe + other.ghz_abe,
            qbits: self.qbits + other.qbits,
        }
    }
}

/// `lhs >= rhs`: consuming the left side suffices to produce the right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResourceInequality {
    pub lhs: ResourceVector,
    pub rhs: ResourceVector,
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    if p == 1.0 {
        return Err(Error::PEqualsOne);
    }
    Ok(())
}

/// Per-message balance of the retransmit-until-delivered protocol:
/// `2/(1-p)` uses and one ebit buy a perfect qubit plus `2(1-p)`
/// residual ebits and `2p` three-party cat states.
pub fn sub1_inequality(p: f64) -> Result<ResourceInequality> {
    check_p(p)?;
    Ok(ResourceInequality {
        lhs: ResourceVector {
            channel_uses: 2.0 / (1.0 - p),
            ebits_ab: 1.0,
            ..Default::default()
        },
        rhs: ResourceVector {
            qbits: 1.0,
            ebits_ab: 2.0 * (1.0 - p),
            ghz_abe: 2.0 * p,
            ..Default::default()
        },
    })
}

/// Per-message balance of the dense-coding protocol: one teleport ebit
/// plus `1/(1-p)` attempt ebits and uses buy a perfect qubit, two
/// residual ebits and `1/(1-p) - 1` Bob-Eve ebits.
pub fn sub2_inequality(p: f64) -> Result<ResourceInequality> {
    check_p(p)?;
    let attempts = 1.0 / (1.0 - p);
    Ok(ResourceInequality {
        lhs: ResourceVector {
            channel_uses: attempts,
            ebits_ab: 1.0 + attempts,
            ..Default::default()
        },
        rhs: ResourceVector {
            qbits: 1.0,
            ebits_ab: 2.0,
            ebits_be: attempts - 1.0,
            ..Default::default()
        },
    })
}

/// One channel use yields `1-p` ebits on average.
pub fn ebit_supply(p: f64) -> Result<ResourceInequality> {
    check_p(p)?;
    Ok(ResourceInequality {
        lhs: ResourceVector {
            channel_uses: 1.0,
            ..Default::default()
        },
        rhs: ResourceVector {
            ebits_ab: 1.0 - p,
            ..Default::default()
        },
    })
}

/// Qubits per channel use once the protocol's ebit books are balanced
/// against `supply`. A net ebit surplus is discarded; a deficit is
/// charged at the supply's cost per ebit.
pub fn net_rate(protocol: &ResourceInequality, supply: &ResourceInequality) -> Result<f64> {
    let yield_per_use = supply.rhs.ebits_ab / supply.lhs.channel_uses;
    if !(yield_per_use > 0.0) {
        return Err(Error::InfeasibleSupply(yield_per_use));
    }
    let deficit = (protocol.lhs.ebits_ab - protocol.rhs.ebits_ab).max(0.0);
    let uses = protocol.lhs.channel_uses + deficit / yield_per_use;
    Ok(protocol.rhs.qbits / uses)
}

/// Integer counters accumulated by one or more protocol runs.
///
/// `channel_uses` is the grand total; `protocol_uses` and `supply_uses`
/// split it by purpose and always sum to it. Merging is associative, so
/// parallel runs can be combined in any grouping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ResourceLedger {
    pub channel_uses: u64,
    pub protocol_uses: u64,
    pub supply_uses: u64,
    pub ebits_ab_consumed: u64,
    pub ebits_ab_produced: u64,
    pub ebits_ab_generated: u64,
    pub ebits_ae_discarded: u64,
    pub ebits_be: u64,
    pub ghz_abe: u64,
    pub qubits_delivered: u64,
    pub messages: u64,
}

impl ResourceLedger {
    pub fn merge(self, other: ResourceLedger) -> ResourceLedger {
        ResourceLedger {
            channel_uses: self.channel_uses + other.channel_uses,
            protocol_uses: self.protocol_uses + other.protocol_uses,
            supply_uses: self.supply_uses + other.supply_uses,
            ebits_ab_consumed: self.ebits_ab_consumed + other.ebits_ab_consumed,
            ebits_ab_produced: self.ebits_ab_produced + other.ebits_ab_produced,
            ebits_ab_generated: self.ebits_ab_generated + other.ebits_ab_generated,
            ebits_ae_discarded: self.ebits_ae_discarded + other.ebits_ae_discarded,
            ebits_be: self.ebits_be + other.ebits_be,
            ghz_abe: self.ghz_abe + other.ghz_abe,
            qubits_delivered: self.qubits_delivered + other.qubits_delivered,
            messages: self.messages + other.messages,
        }
    }
}

/// Empirical per-message flows of a finished run: protocol channel
/// uses on the consumption side, residual entanglement and the
/// delivered qubit on the production side. Means over the recorded
/// messages converge to the matching inequality coefficients.
pub fn ledger_reconcile(trace: &ProtocolTrace) -> Result<ResourceVector> {
    if trace.per_message.is_empty() {
        return Err(Error::IncompleteTrace("per-message records"));
    }
    let n = trace.per_message.len() as f64;
    let mut v = ResourceVector::default();
    for m in &trace.per_message {
        v.channel_uses += m.direct_uses as f64;
        v.ebits_ab += m.residual_ab as f64;
        v.ebits_be += m.residual_be as f64;
        v.ghz_abe += m.ghz as f64;
    }
    v = v.scaled(1.0 / n);
    v.qbits = 1.0;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const TOL: f64 = 1e-12;

    #[test]
    fn inequality_coefficients_at_one_half() {
        let s1 = sub1_inequality(0.5).unwrap();
        assert_abs_diff_eq!(s1.lhs.channel_uses, 4.0, epsilon = TOL);
        assert_abs_diff_eq!(s1.lhs.ebits_ab, 1.0, epsilon = TOL);
        assert_abs_diff_eq!(s1.rhs.ebits_ab, 1.0, epsilon = TOL);
        assert_abs_diff_eq!(s1.rhs.ghz_abe, 1.0, epsilon = TOL);
        let s2 = sub2_inequality(0.5).unwrap();
        assert_abs_diff_eq!(s2.lhs.channel_uses, 2.0, epsilon = TOL);
        assert_abs_diff_eq!(s2.lhs.ebits_ab, 3.0, epsilon = TOL);
        assert_abs_diff_eq!(s2.rhs.ebits_be, 1.0, epsilon = TOL);
    }

    #[test]
    fn net_rates_reproduce_closed_forms() {
        for p in [0.0, 0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.9] {
            let supply = ebit_supply(p).unwrap();
            let r1 = net_rate(&sub1_inequality(p).unwrap(), &supply).unwrap();
            let r2 = net_rate(&sub2_inequality(p).unwrap(), &supply).unwrap();
            let expect1 = if p <= 0.5 {
                (1.0 - p) / 2.0
            } else {
                (1.0 - p) / (1.0 + 2.0 * p)
            };
            assert_abs_diff_eq!(r1, expect1, epsilon = TOL);
            assert_abs_diff_eq!(r2, (1.0 - p) * (1.0 - p), epsilon = TOL);
        }
    }

    #[test]
    fn dense_coding_wins_below_one_half_retransmit_above() {
        for p in [0.1, 0.3, 0.49] {
            let supply = ebit_supply(p).unwrap();
            let r1 = net_rate(&sub1_inequality(p).unwrap(), &supply).unwrap();
            let r2 = net_rate(&sub2_inequality(p).unwrap(), &supply).unwrap();
            assert!(r2 > r1, "p = {p}");
        }
        for p in [0.51, 0.7, 0.9] {
            let supply = ebit_supply(p).unwrap();
            let r1 = net_rate(&sub1_inequality(p).unwrap(), &supply).unwrap();
            let r2 = net_rate(&sub2_inequality(p).unwrap(), &supply).unwrap();
            assert!(r1 > r2, "p = {p}");
        }
    }

    #[test]
    fn degenerate_supply_is_rejected() {
        let supply = ResourceInequality {
            lhs: ResourceVector {
                channel_uses: 1.0,
                ..Default::default()
            },
            rhs: ResourceVector::default(),
        };
        let proto = sub2_inequality(0.3).unwrap();
        assert!(matches!(
            net_rate(&proto, &supply).unwrap_err(),
            Error::InfeasibleSupply(_)
        ));
    }

    #[test]
    fn p_equal_one_diverges() {
        assert_eq!(sub1_inequality(1.0).unwrap_err(), Error::PEqualsOne);
        assert_eq!(sub2_inequality(1.0).unwrap_err(), Error::PEqualsOne);
        assert_eq!(ebit_supply(1.0).unwrap_err(), Error::PEqualsOne);
    }

    #[test]
    fn ledger_merge_is_associative() {
        let a = ResourceLedger {
            channel_uses: 3,
            protocol_uses: 2,
            supply_uses: 1,
            messages: 1,
            ..Default::default()
        };
        let b = ResourceLedger {
            channel_uses: 5,
            ebits_be: 2,
            ..Default::default()
        };
        let c = ResourceLedger {
            ghz_abe: 7,
            ..Default::default()
        };
        assert_eq!(a.merge(b).merge(c), a.merge(b.merge(c)));
    }
}
