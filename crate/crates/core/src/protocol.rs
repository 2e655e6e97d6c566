//! The two feedback-assisted transmission protocols and their runner.
//!
//! Subprotocol 1 teleports coherently: the message and one half of a
//! shared pair are rotated into the Bell basis, and the two outcome
//! registers are copied and resent until Bob holds both, at which point
//! his controlled corrections recover the message exactly. Subprotocol 2
//! densely codes the two outcome registers onto one half of a fresh pair
//! per attempt and resends until one half arrives.
//!
//! Erased registers end up with Eve, but never carry more than basis
//! information, so each message closes with the live state in a verified
//! normal form: residual Alice-Bob pairs, three-party cat states or
//! Bob-Eve pairs, and the delivered message register. Every claimed
//! factor is checked by [`LabeledState::factor_out`] before retirement;
//! the product of those check fidelities is the run's bookkeeping
//! fidelity and equals 1 when the simulation is exact.
//!
//! Ebits are pooled with signed balance: a message may borrow against
//! its own residual pairs, and any deficit left after the message is
//! restocked by supply attempts before the next one. The pool is an
//! accounting device; pooled pairs are interchangeable, and drawing one
//! materializes it on fresh labels.

use rand::Rng;
use serde::Serialize;

use crate::channel::{run_rng, ChannelConfig, ErasureChannel, TransmitOutcome};
use crate::density::{fidelity, DensityOp};
use crate::error::{Error, Result};
use crate::ledger::ResourceLedger;
use crate::state::{
    make_bell_with, make_ghz_with, prepare_message, Gate, LabeledState, Party, RegId, SystemLabel,
    QUBIT_CAP,
};

/// Which transmission scheme a run requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Sub1,
    Sub2,
    Auto,
}

/// The scheme actually executed for a message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Sub1,
    Sub2,
    Direct,
}

impl Strategy {
    /// `Auto` picks dense coding up to the crossover at one half, where
    /// the two rates coincide, and retransmission above it.
    pub fn resolve(self, p: f64) -> ProtocolKind {
        match self {
            Strategy::Sub1 => ProtocolKind::Sub1,
            Strategy::Sub2 => ProtocolKind::Sub2,
            Strategy::Auto => {
                if p <= 0.5 {
                    ProtocolKind::Sub2
                } else {
                    ProtocolKind::Sub1
                }
            }
        }
    }
}

impl ProtocolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::Sub1 => "sub1",
            ProtocolKind::Sub2 => "sub2",
            ProtocolKind::Direct => "direct",
        }
    }
}

/// Bookkeeping row for one delivered message.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerMessage {
    pub kind: ProtocolKind,
    /// Erasures of the first outcome register (or of dense attempts).
    pub erasures_first: u32,
    /// Erasures of the second outcome register (retransmission only).
    pub erasures_second: u32,
    /// Channel uses spent on the message itself.
    pub direct_uses: u64,
    /// Channel uses spent restocking the ebit pool afterwards.
    pub supply_uses: u64,
    pub residual_ab: u32,
    pub residual_be: u32,
    pub ghz: u32,
    pub fidelity: f64,
    pub bookkeeping_fidelity: f64,
}

impl PerMessage {
    pub fn indicator_first(&self) -> u8 {
        (self.erasures_first > 0) as u8
    }

    pub fn indicator_second(&self) -> u8 {
        (self.erasures_second > 0) as u8
    }
}

/// Full-state checkpoint taken at a channel use.
///
/// The checkpoint is the live state with `sent` about to go through the
/// channel, so `sent` is still Alice's. Amplitudes are identical on
/// both sides of a use; only ownership of `sent` changes after it.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub state: LabeledState,
    pub sent: RegId,
}

/// Chronological record of a run.
#[derive(Debug, Clone, Default)]
pub struct ProtocolTrace {
    pub events: Vec<TransmitOutcome>,
    pub per_message: Vec<PerMessage>,
    /// Present only when checkpointing was enabled; one per event.
    pub snapshots: Option<Vec<Snapshot>>,
    /// Registers Bob decoded the messages into, in message order.
    pub decoded_registers: Vec<RegId>,
}

/// Fidelity of a delivered message, with the slack used in bound checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FidelityReport {
    pub fidelity: f64,
    pub epsilon: f64,
}

impl FidelityReport {
    pub fn from_fidelity(f: f64) -> FidelityReport {
        FidelityReport {
            fidelity: f,
            epsilon: (1.0 - f).max(0.0),
        }
    }
}

/// Everything one message send produced.
#[derive(Debug, Clone)]
pub struct MessageOutcome {
    /// Verified normal form at the end of the message: residual pairs,
    /// cat states and the delivered register. Bob-Eve pairs are checked
    /// and retired as they appear and are counted in `record`.
    pub final_state: LabeledState,
    pub delivered_register: RegId,
    pub report: FidelityReport,
    pub record: PerMessage,
}

struct InnerRecord {
    final_state: LabeledState,
    delivered: RegId,
    fidelity: f64,
    book: f64,
    k: u32,
    l: u32,
    residual_ab: u32,
    residual_be: u32,
    ghz: u32,
}

/// One party pair's protocol state: the channel, the ebit pool, the
/// ledger and the trace. All sends go through one session so that
/// channel uses are globally ordered.
pub struct Session {
    channel: ErasureChannel,
    ledger: ResourceLedger,
    trace: ProtocolTrace,
    pool: i64,
    bookkeeping: f64,
    record_snapshots: bool,
}

impl Session {
    pub fn new(cfg: ChannelConfig) -> Result<Session> {
        Session::with_run_index(cfg, 0)
    }

    /// Session whose channel outcomes come from stream `2*run_index` of
    /// the seed. Stream `2*run_index + 1` is reserved for the run's
    /// message content, so outcome and content draws never interleave.
    pub fn with_run_index(cfg: ChannelConfig, run_index: u64) -> Result<Session> {
        Ok(Session::from_channel(ErasureChannel::with_stream(
            cfg,
            2 * run_index,
        )?))
    }

    /// Session over a fixed delivery script, which pins down erasure
    /// patterns exactly. The script must also cover any restocking.
    pub fn scripted(deliveries: impl IntoIterator<Item = bool>, max_retransmits: u32) -> Session {
        Session::from_channel(ErasureChannel::scripted(deliveries, max_retransmits))
    }

    fn from_channel(channel: ErasureChannel) -> Session {
        Session {
            channel,
            ledger: ResourceLedger::default(),
            trace: ProtocolTrace::default(),
            pool: 0,
            bookkeeping: 1.0,
            record_snapshots: false,
        }
    }

    /// Records a full-state checkpoint at every subsequent channel use.
    /// Audits only: each checkpoint clones the live amplitude vector,
    /// and dense-coding sends switch to physical attempt ordering whose
    /// live width grows with the erasure count.
    pub fn enable_snapshots(&mut self) {
        self.record_snapshots = true;
        if self.trace.snapshots.is_none() {
            self.trace.snapshots = Some(Vec::new());
        }
    }

    pub fn ledger(&self) -> &ResourceLedger {
        &self.ledger
    }

    pub fn trace(&self) -> &ProtocolTrace {
        &self.trace
    }

    pub fn into_trace(self) -> ProtocolTrace {
        self.trace
    }

    /// Signed ebit balance; negative only inside a message.
    pub fn pool(&self) -> i64 {
        self.pool
    }

    /// Product of every verified-factor fidelity so far; 1 when every
    /// retirement was exact.
    pub fn bookkeeping_fidelity(&self) -> f64 {
        self.bookkeeping
    }

    pub fn channel_uses(&self) -> u64 {
        self.channel.uses()
    }

    fn snapshot(&mut self, state: &LabeledState, sent: RegId) {
        if self.record_snapshots {
            if let Some(snaps) = self.trace.snapshots.as_mut() {
                snaps.push(Snapshot {
                    state: state.clone(),
                    sent,
                });
            }
        }
    }

    /// One supply attempt: a fresh pair is made locally and one half is
    /// transmitted. Delivery credits the pool; erasure wastes the use
    /// and leaves the pair with Eve. Either way the pair is verified as
    /// an exact product factor and retired, so supply attempts never
    /// grow the live state. Returns whether the half arrived.
    pub fn generate_ebit(&mut self) -> Result<bool> {
        let (delivered, f) = self.generate_ebit_inner()?;
        self.bookkeeping *= f;
        Ok(delivered)
    }

    fn generate_ebit_inner(&mut self) -> Result<(bool, f64)> {
        let keep = SystemLabel::fresh(Party::Alice);
        let send = SystemLabel::fresh(Party::Alice);
        let pair = make_bell_with(keep, send);
        self.snapshot(&pair, send.id);
        let (sent, out) = self.channel.transmit(&pair, send.id)?;
        self.trace.events.push(out);
        self.ledger.channel_uses += 1;
        self.ledger.supply_uses += 1;
        let owner = if out.delivered { Party::Bob } else { Party::Eve };
        let reference = make_bell_with(keep, SystemLabel::new(send.id, owner));
        let (rest, f) = sent.factor_out(&reference)?;
        debug_assert_eq!(rest.qubits(), 0);
        if out.delivered {
            self.ledger.ebits_ab_generated += 1;
            self.pool += 1;
        } else {
            self.ledger.ebits_ae_discarded += 1;
        }
        Ok((out.delivered, f))
    }

    /// Takes one pooled pair, materialized on fresh labels. The pool may
    /// go negative inside a message; the debt is repaid by the message's
    /// residual pairs and, if needed, by supply attempts before the
    /// next message.
    fn draw_ebit(&mut self) -> LabeledState {
        self.pool -= 1;
        self.ledger.ebits_ab_consumed += 1;
        make_bell_with(
            SystemLabel::fresh(Party::Alice),
            SystemLabel::fresh(Party::Bob),
        )
    }

    /// Supply attempts until the pool is nonnegative. Returns the uses
    /// spent and the product of retirement fidelities.
    fn settle(&mut self) -> Result<(u64, f64)> {
        let mut uses = 0u64;
        let mut book = 1.0;
        let mut failures = 0u32;
        while self.pool < 0 {
            let (delivered, f) = self.generate_ebit_inner()?;
            uses += 1;
            book *= f;
            if delivered {
                failures = 0;
            } else {
                failures += 1;
                if failures > self.channel.max_retransmits() {
                    return Err(Error::RetransmitCapExceeded(self.channel.max_retransmits()));
                }
            }
        }
        Ok((uses, book))
    }

    /// Coherent teleportation with retransmission of the two outcome
    /// registers until both arrive.
    pub fn subprotocol1_send(&mut self, psi: &LabeledState) -> Result<MessageOutcome> {
        self.send_message(psi, ProtocolKind::Sub1)
    }

    /// Coherent dense coding onto one half of a fresh pair per attempt
    /// until a half arrives, recycling two residual pairs per message.
    pub fn subprotocol2_send(&mut self, psi: &LabeledState) -> Result<MessageOutcome> {
        self.send_message(psi, ProtocolKind::Sub2)
    }

    fn send_message(&mut self, psi: &LabeledState, kind: ProtocolKind) -> Result<MessageOutcome> {
        let start_uses = self.ledger.protocol_uses;
        let inner = match kind {
            ProtocolKind::Sub1 => self.sub1_inner(psi)?,
            ProtocolKind::Sub2 => self.sub2_inner(psi)?,
            ProtocolKind::Direct => {
                return Err(Error::Config {
                    field: "strategy",
                    reason: "direct transfer has its own runner".into(),
                })
            }
        };
        let direct_uses = self.ledger.protocol_uses - start_uses;
        let (supply_uses, settle_book) = self.settle()?;
        let book = inner.book * settle_book;
        self.bookkeeping *= book;
        self.ledger.qubits_delivered += 1;
        self.ledger.messages += 1;
        self.trace.decoded_registers.push(inner.delivered);
        let record = PerMessage {
            kind,
            erasures_first: inner.k,
            erasures_second: inner.l,
            direct_uses,
            supply_uses,
            residual_ab: inner.residual_ab,
            residual_be: inner.residual_be,
            ghz: inner.ghz,
            fidelity: inner.fidelity,
            bookkeeping_fidelity: book,
        };
        self.trace.per_message.push(record);
        Ok(MessageOutcome {
            final_state: inner.final_state,
            delivered_register: inner.delivered,
            report: FidelityReport::from_fidelity(inner.fidelity),
            record,
        })
    }

    fn sub1_inner(&mut self, psi: &LabeledState) -> Result<InnerRecord> {
        let msg = message_register(psi)?;
        let pair = self.draw_ebit();
        let (a, b) = (pair.ids()[0], pair.ids()[1]);
        let state = psi
            .tensor(&pair)?
            .apply_gate(Gate::BellBasisChange, &[msg, a])?;
        let mut book = 1.0;
        let (state, recv_i, k, eve_i) = self.send_copies(state, msg, &mut book)?;
        let (state, recv_j, l, eve_j) = self.send_copies(state, a, &mut book)?;
        // Bob cancels the residual X^i Z^j using his received copies of
        // the two outcome registers; the X correction must come first.
        let state = state
            .apply_gate(Gate::Cx, &[recv_i, b])?
            .apply_gate(Gate::Cz, &[recv_j, b])?;
        let final_state = state.clone();
        let mut state = state;
        let mut residual_ab = 0u32;
        let mut ghz = 0u32;
        for (src, recv, eve) in [(msg, recv_i, eve_i), (a, recv_j, eve_j)] {
            let src_label = SystemLabel::new(src, Party::Alice);
            let recv_label = SystemLabel::new(recv, Party::Bob);
            let reference = match eve {
                Some(e) => {
                    ghz += 1;
                    self.ledger.ghz_abe += 1;
                    make_ghz_with(src_label, recv_label, SystemLabel::new(e, Party::Eve))
                }
                None => {
                    residual_ab += 1;
                    self.ledger.ebits_ab_produced += 1;
                    self.pool += 1;
                    make_bell_with(src_label, recv_label)
                }
            };
            let (rest, f) = state.factor_out(&reference)?;
            book *= f;
            state = rest;
        }
        let expected = psi.relabeled(msg, SystemLabel::new(b, Party::Bob))?;
        let fidelity = state.overlap(&expected)?;
        Ok(InnerRecord {
            final_state,
            delivered: b,
            fidelity,
            book,
            k,
            l,
            residual_ab,
            residual_be: 0,
            ghz,
        })
    }

    /// Copies `source` in the computational basis and transmits the
    /// copy until one arrives. Eve's extra copies are compressed on her
    /// side: a controlled-X from her first copy maps each later copy to
    /// `|0>`, which is then verified and retired, so she keeps at most
    /// one register per outcome stream.
    fn send_copies(
        &mut self,
        mut state: LabeledState,
        source: RegId,
        book: &mut f64,
    ) -> Result<(LabeledState, RegId, u32, Option<RegId>)> {
        let mut failures = 0u32;
        let mut eve_copy: Option<RegId> = None;
        loop {
            let fresh = SystemLabel::fresh(Party::Alice);
            state = state.coherent_copy(source, fresh)?;
            self.snapshot(&state, fresh.id);
            let (next, out) = self.channel.transmit(&state, fresh.id)?;
            state = next;
            self.trace.events.push(out);
            self.ledger.channel_uses += 1;
            self.ledger.protocol_uses += 1;
            if out.delivered {
                return Ok((state, fresh.id, failures, eve_copy));
            }
            failures += 1;
            if failures > self.channel.max_retransmits() {
                return Err(Error::RetransmitCapExceeded(self.channel.max_retransmits()));
            }
            match eve_copy {
                Some(e) => {
                    state = state.apply_gate(Gate::Cx, &[e, fresh.id])?;
                    let zero =
                        LabeledState::basis(vec![SystemLabel::new(fresh.id, Party::Eve)], 0)?;
                    let (rest, f) = state.factor_out(&zero)?;
                    *book *= f;
                    state = rest;
                }
                None => eve_copy = Some(fresh.id),
            }
        }
    }

    fn sub2_inner(&mut self, psi: &LabeledState) -> Result<InnerRecord> {
        let msg = message_register(psi)?;
        let pair = self.draw_ebit();
        let (a, b) = (pair.ids()[0], pair.ids()[1]);
        let mut state = psi
            .tensor(&pair)?
            .apply_gate(Gate::BellBasisChange, &[msg, a])?;
        let mut book = 1.0;
        let mut erased: Vec<(SystemLabel, SystemLabel)> = Vec::new();
        let success: (SystemLabel, SystemLabel);

        if self.record_snapshots {
            // Physical attempt order, so checkpoints see the true
            // chronological state. Every erased pair stays live until
            // the decode; width grows with the erasure count and the
            // qubit cap limits how many erasures fit.
            loop {
                let (c1, c2) = self.attempt_pair();
                state = state.tensor(&make_bell_with(c1, c2))?;
                state = state
                    .apply_gate(Gate::Cz, &[a, c1.id])?
                    .apply_gate(Gate::Cx, &[msg, c1.id])?;
                self.snapshot(&state, c1.id);
                let (next, out) = self.channel.transmit(&state, c1.id)?;
                state = next;
                self.record_attempt_use(out);
                if out.delivered {
                    success = (c1, c2);
                    break;
                }
                erased.push((c1, c2));
                self.check_attempt_cap(erased.len())?;
            }
        } else {
            // Outcomes are drawn in physical order first; the quantum
            // replay then processes the delivered attempt before the
            // erased ones. All deferred operations act on disjoint
            // pairs under computational-basis controls, so the
            // reordering commutes with them and the final state equals
            // the physical one, while the live width stays bounded for
            // any erasure count.
            loop {
                let (c1, c2) = self.attempt_pair();
                let delivered = self.channel.draw_delivery()?;
                let owner = if delivered { Party::Bob } else { Party::Eve };
                self.record_attempt_use(TransmitOutcome {
                    delivered,
                    recipient: SystemLabel::new(c1.id, owner),
                    use_index: self.channel.uses(),
                });
                if delivered {
                    success = (c1, c2);
                    break;
                }
                erased.push((c1, c2));
                self.check_attempt_cap(erased.len())?;
            }
            let (d1, d2) = success;
            state = state.tensor(&make_bell_with(d1, d2))?;
            state = state
                .apply_gate(Gate::Cz, &[a, d1.id])?
                .apply_gate(Gate::Cx, &[msg, d1.id])?
                .transfer(d1.id, Party::Bob)?;
        }

        let (d1, d2) = success;
        state = bell_measure_decode(&state, d1.id, d2.id)?;
        // Bob cancels X^i Z^j on his teleport half; X correction first.
        state = state
            .apply_gate(Gate::Cx, &[d1.id, b])?
            .apply_gate(Gate::Cz, &[d2.id, b])?;

        let mut residual_be = 0u32;
        for &(e1, e2) in &erased {
            if !self.record_snapshots {
                state = state.tensor(&make_bell_with(e1, e2))?;
                state = state
                    .apply_gate(Gate::Cz, &[a, e1.id])?
                    .apply_gate(Gate::Cx, &[msg, e1.id])?
                    .transfer(e1.id, Party::Eve)?;
            }
            // The far half of an erased pair carries the transpose of
            // the encoding, Z^j X^i, so here the Z correction comes
            // first. Each corrected pair is an exact Bob-Eve ebit.
            state = state
                .apply_gate(Gate::Cz, &[d2.id, e2.id])?
                .apply_gate(Gate::Cx, &[d1.id, e2.id])?;
            let reference = make_bell_with(SystemLabel::new(e1.id, Party::Eve), e2);
            let (rest, f) = state.factor_out(&reference)?;
            book *= f;
            state = rest;
            residual_be += 1;
            self.ledger.ebits_be += 1;
        }

        let final_state = state.clone();
        let mut residual_ab = 0u32;
        for (x, y) in [(msg, d1.id), (a, d2.id)] {
            let reference = make_bell_with(
                SystemLabel::new(x, Party::Alice),
                SystemLabel::new(y, Party::Bob),
            );
            let (rest, f) = state.factor_out(&reference)?;
            book *= f;
            state = rest;
            residual_ab += 1;
            self.pool += 1;
            self.ledger.ebits_ab_produced += 1;
        }
        let expected = psi.relabeled(msg, SystemLabel::new(b, Party::Bob))?;
        let fidelity = state.overlap(&expected)?;
        Ok(InnerRecord {
            final_state,
            delivered: b,
            fidelity,
            book,
            k: erased.len() as u32,
            l: 0,
            residual_ab,
            residual_be,
            ghz: 0,
        })
    }

    /// Consumes one pooled ebit and names the attempt pair's halves.
    fn attempt_pair(&mut self) -> (SystemLabel, SystemLabel) {
        self.pool -= 1;
        self.ledger.ebits_ab_consumed += 1;
        (
            SystemLabel::fresh(Party::Alice),
            SystemLabel::fresh(Party::Bob),
        )
    }

    fn record_attempt_use(&mut self, out: TransmitOutcome) {
        self.trace.events.push(out);
        self.ledger.channel_uses += 1;
        self.ledger.protocol_uses += 1;
    }

    fn check_attempt_cap(&self, erased: usize) -> Result<()> {
        if erased as u32 > self.channel.max_retransmits() {
            return Err(Error::RetransmitCapExceeded(self.channel.max_retransmits()));
        }
        Ok(())
    }
}

/// Exactly one Alice-owned register (the message), with any other
/// registers owned by Reference so they can ride along as spectators.
fn message_register(psi: &LabeledState) -> Result<RegId> {
    let mut msg = None;
    for l in psi.labels() {
        match l.party {
            Party::Alice => {
                if msg.replace(l.id).is_some() {
                    return Err(Error::InvalidMessageShape);
                }
            }
            Party::Reference => {}
            _ => return Err(Error::InvalidMessageShape),
        }
    }
    msg.ok_or(Error::InvalidMessageShape)
}

/// Rotates a Bob-held pair from the Bell basis to the computational
/// basis, mapping the four dense-coded pair states to `|ij>`.
pub fn bell_measure_decode(state: &LabeledState, d1: RegId, d2: RegId) -> Result<LabeledState> {
    for id in [d1, d2] {
        let party = state.party_of(id)?;
        if party != Party::Bob {
            return Err(Error::NotOwnedByBob { id, party });
        }
    }
    state.apply_gate(Gate::BellToComputational, &[d1, d2])
}

/// Summary of one run, serializable to JSON and CSV.
#[derive(Debug, Clone, Serialize)]
pub struct RunStats {
    pub p: f64,
    pub strategy: String,
    pub messages: u64,
    pub channel_uses: u64,
    pub empirical_rate: f64,
    pub mean_fidelity: f64,
    pub seed: u64,
}

/// A finished run with its full accounting.
#[derive(Debug)]
pub struct RunReport {
    pub stats: RunStats,
    pub ledger: ResourceLedger,
    pub final_pool: i64,
    pub bookkeeping_fidelity: f64,
    pub min_fidelity: f64,
    pub trace: ProtocolTrace,
}

/// Sends `num_messages` fresh Bloch-sphere-uniform qubits with the
/// resolved scheme, restocking ebits on demand. The empirical rate is
/// messages over all channel uses, supply included.
pub fn run_protocol(
    cfg: &ChannelConfig,
    num_messages: u64,
    strategy: Strategy,
) -> Result<RunReport> {
    run_protocol_indexed(cfg, num_messages, strategy, 0)
}

/// Same run drawn from the stream pair of `run_index`, for independent
/// repetitions off one seed.
pub fn run_protocol_indexed(
    cfg: &ChannelConfig,
    num_messages: u64,
    strategy: Strategy,
    run_index: u64,
) -> Result<RunReport> {
    if num_messages == 0 {
        return Err(Error::Config {
            field: "num_messages",
            reason: "need at least one message".into(),
        });
    }
    let kind = strategy.resolve(cfg.p);
    let mut session = Session::with_run_index(*cfg, run_index)?;
    let mut content = run_rng(cfg.seed, 2 * run_index + 1);
    let mut fid_sum = 0.0;
    let mut fid_min = f64::INFINITY;
    for _ in 0..num_messages {
        let (theta, phi) = random_bloch_angles(&mut content);
        let psi = prepare_message(theta, phi);
        let out = match kind {
            ProtocolKind::Sub1 => session.subprotocol1_send(&psi)?,
            ProtocolKind::Sub2 => session.subprotocol2_send(&psi)?,
            ProtocolKind::Direct => unreachable!("strategies resolve to a subprotocol"),
        };
        fid_sum += out.report.fidelity;
        fid_min = fid_min.min(out.report.fidelity);
    }
    let uses = session.channel_uses();
    let stats = RunStats {
        p: cfg.p,
        strategy: kind.as_str().to_string(),
        messages: num_messages,
        channel_uses: uses,
        empirical_rate: num_messages as f64 / uses as f64,
        mean_fidelity: fid_sum / num_messages as f64,
        seed: cfg.seed,
    };
    Ok(RunReport {
        stats,
        ledger: *session.ledger(),
        final_pool: session.pool(),
        bookkeeping_fidelity: session.bookkeeping_fidelity(),
        min_fidelity: fid_min,
        trace: session.into_trace(),
    })
}

/// Uniform point on the Bloch sphere as `(theta, phi)`.
pub fn random_bloch_angles(rng: &mut impl Rng) -> (f64, f64) {
    let u: f64 = rng.gen();
    let v: f64 = rng.gen();
    ((1.0 - 2.0 * u).acos(), 2.0 * std::f64::consts::PI * v)
}

/// A raw send of maximally entangled halves, for checkpoint audits.
#[derive(Debug)]
pub struct DirectRun {
    pub trace: ProtocolTrace,
    pub ledger: ResourceLedger,
}

/// Sends `num_messages` halves of fresh pairs straight through the
/// channel, one use each, keeping every register live so checkpoints
/// see all correlations. No retries and no corrections: an erased
/// message is simply lost and scores fidelity 0.
pub fn run_direct_transfer(cfg: &ChannelConfig, num_messages: u64) -> Result<DirectRun> {
    if num_messages == 0 {
        return Err(Error::Config {
            field: "num_messages",
            reason: "need at least one message".into(),
        });
    }
    let needed = 2 * num_messages as usize;
    if needed > QUBIT_CAP {
        return Err(Error::SizeCap {
            requested: needed,
            cap: QUBIT_CAP,
        });
    }
    let mut channel = ErasureChannel::with_stream(*cfg, 0)?;
    let mut trace = ProtocolTrace {
        snapshots: Some(Vec::new()),
        ..ProtocolTrace::default()
    };
    let mut ledger = ResourceLedger::default();
    let mut global = LabeledState::empty();
    for _ in 0..num_messages {
        let m = SystemLabel::fresh(Party::Alice);
        let r = SystemLabel::fresh(Party::Reference);
        global = global.tensor(&make_bell_with(m, r))?;
        if let Some(snaps) = trace.snapshots.as_mut() {
            snaps.push(Snapshot {
                state: global.clone(),
                sent: m.id,
            });
        }
        let (next, out) = channel.transmit(&global, m.id)?;
        global = next;
        trace.events.push(out);
        ledger.channel_uses += 1;
        ledger.protocol_uses += 1;
        let fid = if out.delivered {
            ledger.qubits_delivered += 1;
            trace.decoded_registers.push(m.id);
            let reference = make_bell_with(SystemLabel::new(m.id, Party::Bob), r);
            let rho = global.partial_trace(&[m.id, r.id])?;
            fidelity(&rho, &DensityOp::from_pure(&reference))?
        } else {
            0.0
        };
        ledger.messages += 1;
        trace.per_message.push(PerMessage {
            kind: ProtocolKind::Direct,
            erasures_first: u32::from(!out.delivered),
            erasures_second: 0,
            direct_uses: 1,
            supply_uses: 0,
            residual_ab: 0,
            residual_be: 0,
            ghz: 0,
            fidelity: fid,
            bookkeeping_fidelity: 1.0,
        });
    }
    Ok(DirectRun { trace, ledger })
}
