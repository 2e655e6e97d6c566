//! The erasure channel and its classical feedback.
//!
//! A transmission either hands the register to Bob or, with probability
//! `p`, to Eve. Amplitudes never change; erasure is modeled purely as a
//! change of ownership, and the sender always learns the outcome. Every
//! call is one channel use, which is the unit all rates are quoted in.
//!
//! Outcomes come from a counter-based stream addressed by `(seed,
//! run_index)`, so runs are reproducible and independent runs can be
//! drawn from one seed without sharing state. A channel can instead be
//! driven by a fixed outcome script, which pins down erasure patterns
//! in tests and register-level audits.

use std::collections::VecDeque;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::state::{LabeledState, Party, RegId, SystemLabel};

/// Retry cap applied by the protocols per logical register.
pub const DEFAULT_MAX_RETRANSMITS: u32 = 64;

/// Erasure probability, retry cap and stream seed for one channel.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct ChannelConfig {
    pub p: f64,
    #[serde(default = "default_retransmits")]
    pub max_retransmits: u32,
    pub seed: u64,
}

fn default_retransmits() -> u32 {
    DEFAULT_MAX_RETRANSMITS
}

impl ChannelConfig {
    pub fn new(p: f64, max_retransmits: u32, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability(p));
        }
        Ok(ChannelConfig {
            p,
            max_retransmits,
            seed,
        })
    }

    /// Reads `p`, `max_retransmits` (optional) and `seed` from
    /// `key = value` text.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ChannelConfig = toml::from_str(text).map_err(|e| Error::Config {
            field: "channel",
            reason: e.to_string(),
        })?;
        ChannelConfig::new(cfg.p, cfg.max_retransmits, cfg.seed)
    }
}

/// Mean channel uses until one delivery, `1/(1-p)`.
pub fn expected_uses_per_success(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    if p == 1.0 {
        return Err(Error::PEqualsOne);
    }
    Ok(1.0 / (1.0 - p))
}

/// Classical record of one channel use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmitOutcome {
    pub delivered: bool,
    /// The transmitted register with its post-use owner.
    pub recipient: SystemLabel,
    /// 1-based position of this use in the channel's history.
    pub use_index: u64,
}

enum OutcomeSource {
    Sampled { p: f64, rng: ChaCha8Rng },
    Scripted { deliveries: VecDeque<bool> },
}

/// One erasure channel instance with its use counter.
pub struct ErasureChannel {
    source: OutcomeSource,
    cfg: ChannelConfig,
    uses: u64,
    budget: Option<u64>,
}

impl ErasureChannel {
    /// Channel drawing outcomes from stream 0 of `cfg.seed`.
    pub fn new(cfg: ChannelConfig) -> Result<Self> {
        ErasureChannel::with_stream(cfg, 0)
    }

    /// Channel drawing outcomes from stream `run_index` of `cfg.seed`.
    pub fn with_stream(cfg: ChannelConfig, run_index: u64) -> Result<Self> {
        let cfg = ChannelConfig::new(cfg.p, cfg.max_retransmits, cfg.seed)?;
        Ok(ErasureChannel {
            source: OutcomeSource::Sampled {
                p: cfg.p,
                rng: run_rng(cfg.seed, run_index),
            },
            cfg,
            uses: 0,
            budget: None,
        })
    }

    /// Channel that replays a fixed delivery script (`true` delivers).
    /// Runs out of script and the next use fails the budget check.
    pub fn scripted(deliveries: impl IntoIterator<Item = bool>, max_retransmits: u32) -> Self {
        let deliveries: VecDeque<bool> = deliveries.into_iter().collect();
        let budget = deliveries.len() as u64;
        ErasureChannel {
            source: OutcomeSource::Scripted { deliveries },
            cfg: ChannelConfig {
                p: f64::NAN,
                max_retransmits,
                seed: 0,
            },
            uses: 0,
            budget: Some(budget),
        }
    }

    /// Caps total uses; exceeding it is an error, not a silent stop.
    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn uses(&self) -> u64 {
        self.uses
    }

    pub fn max_retransmits(&self) -> u32 {
        self.cfg.max_retransmits
    }

    pub fn erasure_probability(&self) -> f64 {
        self.cfg.p
    }

    /// Rolls one use: checks the budget, draws the outcome, bumps the
    /// counter. Callers that defer the state update for memory reasons
    /// use this directly and apply the matching transfer later.
    pub(crate) fn draw_delivery(&mut self) -> Result<bool> {
        if let Some(b) = self.budget {
            if self.uses >= b {
                return Err(Error::BudgetExhausted(b));
            }
        }
        let delivered = match &mut self.source {
            OutcomeSource::Sampled { p, rng } => rng.gen::<f64>() >= *p,
            OutcomeSource::Scripted { deliveries } => deliveries
                .pop_front()
                .ok_or(Error::BudgetExhausted(self.uses))?,
        };
        self.uses += 1;
        Ok(delivered)
    }

    /// Sends one Alice-owned register; ownership moves to Bob on
    /// delivery and to Eve on erasure. Amplitudes are untouched.
    pub fn transmit(
        &mut self,
        state: &LabeledState,
        id: RegId,
    ) -> Result<(LabeledState, TransmitOutcome)> {
        let party = state.party_of(id)?;
        if party != Party::Alice {
            return Err(Error::NotOwnedByAlice { id, party });
        }
        let delivered = self.draw_delivery()?;
        let new_party = if delivered { Party::Bob } else { Party::Eve };
        let state = state.transfer(id, new_party)?;
        let outcome = TransmitOutcome {
            delivered,
            recipient: SystemLabel::new(id, new_party),
            use_index: self.uses,
        };
        Ok((state, outcome))
    }
}

/// The counter-based stream for run `run_index` under `seed`.
pub fn run_rng(seed: u64, run_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_index);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{LabeledState, SystemLabel};

    fn one_alice_qubit() -> (LabeledState, RegId) {
        let l = SystemLabel::fresh(Party::Alice);
        (LabeledState::basis(vec![l], 0).unwrap(), l.id)
    }

    #[test]
    fn config_validation_and_file_parsing() {
        assert!(ChannelConfig::new(1.5, 64, 0).is_err());
        assert!(ChannelConfig::new(-0.1, 64, 0).is_err());
        let cfg = ChannelConfig::from_toml_str("p = 0.25\nseed = 7\n").unwrap();
        assert_eq!(cfg.max_retransmits, DEFAULT_MAX_RETRANSMITS);
        assert_eq!(cfg.seed, 7);
        let cfg = ChannelConfig::from_toml_str("p = 0.5\nmax_retransmits = 8\nseed = 1").unwrap();
        assert_eq!(cfg.max_retransmits, 8);
        assert!(ChannelConfig::from_toml_str("p = 2.0\nseed = 1").is_err());
        assert!(ChannelConfig::from_toml_str("seed = 1").is_err());
    }

    #[test]
    fn expected_uses_formula_and_edge() {
        assert_eq!(expected_uses_per_success(0.0).unwrap(), 1.0);
        assert_eq!(expected_uses_per_success(0.5).unwrap(), 2.0);
        assert_eq!(expected_uses_per_success(1.0).unwrap_err(), Error::PEqualsOne);
    }

    #[test]
    fn deterministic_edges() {
        let mut sure = ErasureChannel::new(ChannelConfig::new(0.0, 64, 3).unwrap()).unwrap();
        let (s, id) = one_alice_qubit();
        let (s, out) = sure.transmit(&s, id).unwrap();
        assert!(out.delivered);
        assert_eq!(s.party_of(id).unwrap(), Party::Bob);
        assert_eq!(out.use_index, 1);

        let mut lossy = ErasureChannel::new(ChannelConfig::new(1.0, 64, 3).unwrap()).unwrap();
        let (s, id) = one_alice_qubit();
        let (s, out) = lossy.transmit(&s, id).unwrap();
        assert!(!out.delivered);
        assert_eq!(s.party_of(id).unwrap(), Party::Eve);
    }

    #[test]
    fn amplitudes_survive_transmission() {
        let psi = crate::state::prepare_message(1.1, 0.3);
        let id = psi.ids()[0];
        let mut ch = ErasureChannel::new(ChannelConfig::new(1.0, 64, 9).unwrap()).unwrap();
        let (sent, _) = ch.transmit(&psi, id).unwrap();
        assert_eq!(sent.amplitudes(), psi.amplitudes());
    }

    #[test]
    fn only_alice_registers_can_be_sent() {
        let bell = crate::state::make_bell();
        let bob_half = bell.ids()[1];
        let mut ch = ErasureChannel::new(ChannelConfig::new(0.0, 64, 0).unwrap()).unwrap();
        assert!(matches!(
            ch.transmit(&bell, bob_half).unwrap_err(),
            Error::NotOwnedByAlice { .. }
        ));
    }

    #[test]
    fn delivered_fraction_concentrates() {
        let cfg = ChannelConfig::new(0.5, 64, 2024).unwrap();
        let mut ch = ErasureChannel::new(cfg).unwrap();
        let n = 100_000;
        let mut delivered = 0u64;
        for _ in 0..n {
            let (s, id) = one_alice_qubit();
            let (_, out) = ch.transmit(&s, id).unwrap();
            if out.delivered {
                delivered += 1;
            }
        }
        let frac = delivered as f64 / n as f64;
        // 3 sigma for a fair coin over 1e5 draws is 0.0047.
        assert!((frac - 0.5).abs() < 0.005, "fraction {frac}");
        assert_eq!(ch.uses(), n);
    }

    #[test]
    fn same_seed_same_outcomes_different_stream_differs() {
        let cfg = ChannelConfig::new(0.5, 64, 11).unwrap();
        let drain = |mut ch: ErasureChannel| -> Vec<bool> {
            (0..64)
                .map(|_| {
                    let (s, id) = one_alice_qubit();
                    ch.transmit(&s, id).unwrap().1.delivered
                })
                .collect()
        };
        let a = drain(ErasureChannel::with_stream(cfg, 0).unwrap());
        let b = drain(ErasureChannel::with_stream(cfg, 0).unwrap());
        let c = drain(ErasureChannel::with_stream(cfg, 1).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn scripted_channel_replays_and_then_stops() {
        let mut ch = ErasureChannel::scripted([true, false], 64);
        let (s, id) = one_alice_qubit();
        assert!(ch.transmit(&s, id).unwrap().1.delivered);
        let (s, id) = one_alice_qubit();
        assert!(!ch.transmit(&s, id).unwrap().1.delivered);
        let (s, id) = one_alice_qubit();
        assert!(matches!(
            ch.transmit(&s, id).unwrap_err(),
            Error::BudgetExhausted(_)
        ));
    }

    #[test]
    fn budget_is_enforced() {
        let cfg = ChannelConfig::new(0.0, 64, 5).unwrap();
        let mut ch = ErasureChannel::new(cfg).unwrap().with_budget(1);
        let (s, id) = one_alice_qubit();
        ch.transmit(&s, id).unwrap();
        let (s, id) = one_alice_qubit();
        assert!(matches!(
            ch.transmit(&s, id).unwrap_err(),
            Error::BudgetExhausted(1)
        ));
    }
}
