//! Numerical checks of the entropy toolbox the rate bounds rest on:
//! four tripartite inequalities, the entropy-continuity step, the
//! fidelity-to-distance step, and a checkpoint audit that accumulates
//! the per-use information quantities of a recorded run.
//!
//! Everything here reports slacks (bound minus constrained quantity) so
//! sweeps can assert nonnegativity within [`SLACK_TOL`] and surface any
//! bug in the entropy code as a negative slack.

use std::f64::consts::SQRT_2;

use rand::Rng;
use serde::Serialize;

use crate::channel::run_rng;
use crate::density::{fidelity, trace_distance, DensityOp};
use crate::error::{Error, Result};
use crate::protocol::ProtocolTrace;
use crate::state::{random_pure_state_with, LabeledState, Party, RegId, SystemLabel};

/// Slacks this close to zero from below still count as satisfied.
pub const SLACK_TOL: f64 = 1e-9;

/// The entropy-continuity bound is monotone only while the trace
/// distance stays at or below `1/(2e)`.
pub const FANNES_WINDOW: f64 = 1.0 / (2.0 * std::f64::consts::E);

/// Part-size profiles (in qubits) covered by the sweeps.
pub const PART_PROFILES: [(usize, usize, usize); 3] = [(1, 1, 1), (1, 2, 1), (2, 1, 1)];

/// A pure state carved into disjoint parts A, B, C, optionally with a
/// designated subset E of B and hidden purifier registers that belong
/// to no part (making the visible parts jointly mixed).
#[derive(Debug, Clone)]
pub struct TripartiteSample {
    pub state: LabeledState,
    pub a: Vec<RegId>,
    pub b: Vec<RegId>,
    pub c: Vec<RegId>,
    pub e: Option<Vec<RegId>>,
}

impl TripartiteSample {
    fn validate(&self) -> Result<()> {
        for id in &self.a {
            if self.b.contains(id) || self.c.contains(id) {
                return Err(Error::OverlappingParts(*id));
            }
        }
        for id in &self.b {
            if self.c.contains(id) {
                return Err(Error::OverlappingParts(*id));
            }
        }
        if let Some(e) = &self.e {
            if e.iter().any(|id| !self.b.contains(id)) {
                return Err(Error::MissingE);
            }
        }
        Ok(())
    }
}

/// The four tripartite inequalities, each phrased as `slack >= 0`.
///
/// `I`: the chain rule I(A;BC) = I(AB;C) - I(B;C) + ... closes with a
/// nonnegative remainder. `Ii`: coherent information cannot drop when a
/// system is adjoined to the receiving side. `Iii`: coherent
/// information into a common receiver is superadditive over senders.
/// `Iv`: the increase from adjoining C to the receiving side is at most
/// twice the entropy of C together with a designated part E of B.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyInequality {
    I,
    Ii,
    Iii,
    Iv,
}

impl EntropyInequality {
    pub const ALL: [EntropyInequality; 4] = [
        EntropyInequality::I,
        EntropyInequality::Ii,
        EntropyInequality::Iii,
        EntropyInequality::Iv,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntropyInequality::I => "i",
            EntropyInequality::Ii => "ii",
            EntropyInequality::Iii => "iii",
            EntropyInequality::Iv => "iv",
        }
    }
}

fn concat(x: &[RegId], y: &[RegId]) -> Vec<RegId> {
    let mut out = Vec::with_capacity(x.len() + y.len());
    out.extend_from_slice(x);
    out.extend_from_slice(y);
    out
}

/// Bound minus constrained quantity for one inequality on one sample;
/// nonnegative (within numerics) for every quantum state.
pub fn lemma1_slack(sample: &TripartiteSample, which: EntropyInequality) -> Result<f64> {
    sample.validate()?;
    let st = &sample.state;
    let (a, b, c) = (&sample.a, &sample.b, &sample.c);
    match which {
        EntropyInequality::I => {
            let i_a_bc = st.mutual_information(a, &concat(b, c))?;
            let i_ab_c = st.mutual_information(&concat(a, b), c)?;
            let i_b_c = st.mutual_information(b, c)?;
            Ok(i_a_bc - (i_ab_c - i_b_c))
        }
        EntropyInequality::Ii => {
            let wide = st.coherent_information(a, &concat(b, c))?;
            let narrow = st.coherent_information(a, b)?;
            Ok(wide - narrow)
        }
        EntropyInequality::Iii => {
            let joint = st.coherent_information(&concat(a, b), c)?;
            let split =
                st.coherent_information(a, c)? + st.coherent_information(b, c)?;
            Ok(joint - split)
        }
        EntropyInequality::Iv => {
            let e = sample.e.as_ref().ok_or(Error::MissingE)?;
            let h_ce = st.entropy_of(&concat(c, e))?;
            let wide = st.coherent_information(a, &concat(b, c))?;
            let narrow = st.coherent_information(a, b)?;
            Ok(2.0 * h_ce - (wide - narrow))
        }
    }
}

/// Haar-random sample with the given part sizes. With `purifier` an
/// extra hidden register is added, so the visible parts are jointly
/// mixed. E is the first qubit of B.
pub fn random_tripartite(
    profile: (usize, usize, usize),
    purifier: bool,
    rng: &mut impl Rng,
) -> Result<TripartiteSample> {
    let (na, nb, nc) = profile;
    let mut labels = Vec::new();
    let mut part = |n: usize, party: Party| -> Vec<RegId> {
        (0..n)
            .map(|_| {
                let l = SystemLabel::fresh(party);
                labels.push(l);
                l.id
            })
            .collect()
    };
    let a = part(na, Party::Alice);
    let b = part(nb, Party::Bob);
    let c = part(nc, Party::Eve);
    if purifier {
        part(1, Party::Reference);
    }
    let state = random_pure_state_with(labels, rng)?;
    let e = Some(vec![b[0]]);
    Ok(TripartiteSample { state, a, b, c, e })
}

/// Aggregate of one slack sweep, serializable for verification reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityReport {
    pub samples: u64,
    pub min_slack: f64,
    pub mean_slack: f64,
    pub violations: u64,
}

impl InequalityReport {
    /// Aggregates slacks in the given order; callers that compute
    /// slacks in parallel must collect them in index order first so
    /// the mean is reproducible.
    pub fn from_slacks(slacks: &[f64]) -> InequalityReport {
        let n = slacks.len() as f64;
        InequalityReport {
            samples: slacks.len() as u64,
            min_slack: slacks.iter().cloned().fold(f64::INFINITY, f64::min),
            mean_slack: slacks.iter().sum::<f64>() / n,
            violations: slacks.iter().filter(|&&s| s < -SLACK_TOL).count() as u64,
        }
    }
}

/// Slack of sample `index` of a sweep: the sample is drawn from stream
/// `index` of the seed, with a hidden purifier on odd indices so mixed
/// visible parts are covered. Pure per-index function, safe to
/// evaluate in any order or in parallel.
pub fn lemma1_sample_slack(
    which: EntropyInequality,
    profile: (usize, usize, usize),
    seed: u64,
    index: u64,
) -> Result<f64> {
    let mut rng = run_rng(seed, index);
    let sample = random_tripartite(profile, index % 2 == 1, &mut rng)?;
    lemma1_slack(&sample, which)
}

/// Random sweep of one inequality at one part-size profile.
pub fn lemma1_sweep(
    which: EntropyInequality,
    profile: (usize, usize, usize),
    samples: u64,
    seed: u64,
) -> Result<InequalityReport> {
    let slacks: Vec<f64> = (0..samples)
        .map(|i| lemma1_sample_slack(which, profile, seed, i))
        .collect::<Result<_>>()?;
    Ok(InequalityReport::from_slacks(&slacks))
}

/// Entropy-continuity slack: the distance-based bound minus the actual
/// entropy difference, `(2Dm - 2D log2(2D)) - |H(rho) - H(sigma)|`.
/// Valid only for trace distance within [`FANNES_WINDOW`]; larger
/// distances are rejected rather than silently evaluated.
pub fn fannes_gap(rho: &DensityOp, sigma: &DensityOp) -> Result<f64> {
    if rho.qubits() != sigma.qubits() {
        return Err(Error::DimensionMismatch {
            expected: rho.qubits(),
            got: sigma.qubits(),
        });
    }
    let d = trace_distance(rho, sigma)?;
    if d > FANNES_WINDOW {
        return Err(Error::OutOfValidityWindow(d));
    }
    let m = rho.qubits() as f64;
    let t = 2.0 * d;
    let bound = if t > 0.0 { t * m - t * t.log2() } else { 0.0 };
    Ok(bound - (rho.entropy()? - sigma.entropy()?).abs())
}

/// Slack of the distance-fidelity relation, `sqrt(1 - F^2) - D`.
pub fn fidelity_distance_gap(rho: &DensityOp, sigma: &DensityOp) -> Result<f64> {
    if rho.qubits() != sigma.qubits() {
        return Err(Error::DimensionMismatch {
            expected: rho.qubits(),
            got: sigma.qubits(),
        });
    }
    let f = fidelity(rho, sigma)?;
    let d = trace_distance(rho, sigma)?;
    Ok((1.0 - f * f).max(0.0).sqrt() - d)
}

/// Random two-qubit mixed state on the given labels, obtained by
/// discarding two hidden purifier qubits of a Haar-random pure state.
fn random_mixed_pair(keep: [SystemLabel; 2], rng: &mut impl Rng) -> Result<DensityOp> {
    let labels = vec![
        keep[0],
        keep[1],
        SystemLabel::fresh(Party::Reference),
        SystemLabel::fresh(Party::Reference),
    ];
    let pure = random_pure_state_with(labels, rng)?;
    pure.partial_trace(&[keep[0].id, keep[1].id])
}

/// Continuity gap of random pair `index`: a random mixed two-qubit
/// state against a slightly depolarized copy, which keeps the trace
/// distance inside the validity window. Pure per-index function.
pub fn fannes_pair_gap(seed: u64, index: u64) -> Result<f64> {
    let mut rng = run_rng(seed, index);
    let keep = [
        SystemLabel::fresh(Party::Alice),
        SystemLabel::fresh(Party::Bob),
    ];
    let rho = random_mixed_pair(keep, &mut rng)?;
    let t: f64 = rng.gen::<f64>() * 0.1;
    let dim = rho.dim();
    let mixed = rho.matrix() * num_complex::Complex64::new(1.0 - t, 0.0)
        + nalgebra::DMatrix::identity(dim, dim)
            * num_complex::Complex64::new(t / dim as f64, 0.0);
    let sigma = DensityOp::new(rho.labels().to_vec(), mixed)?;
    fannes_gap(&rho, &sigma)
}

/// Sweep of [`fannes_gap`] over random in-window pairs.
pub fn fannes_sweep(pairs: u64, seed: u64) -> Result<InequalityReport> {
    let slacks: Vec<f64> = (0..pairs)
        .map(|i| fannes_pair_gap(seed, i))
        .collect::<Result<_>>()?;
    Ok(InequalityReport::from_slacks(&slacks))
}

/// Distance-fidelity gap of random pair `index`: two unconstrained
/// random mixed states on shared labels. Pure per-index function.
pub fn distance_pair_gap(seed: u64, index: u64) -> Result<f64> {
    let mut rng = run_rng(seed, index);
    let keep = [
        SystemLabel::fresh(Party::Alice),
        SystemLabel::fresh(Party::Bob),
    ];
    let rho = random_mixed_pair(keep, &mut rng)?;
    let sigma = random_mixed_pair(keep, &mut rng)?;
    fidelity_distance_gap(&rho, &sigma)
}

/// Sweep of [`fidelity_distance_gap`] over random pairs.
pub fn distance_fidelity_sweep(pairs: u64, seed: u64) -> Result<InequalityReport> {
    let slacks: Vec<f64> = (0..pairs)
        .map(|i| distance_pair_gap(seed, i))
        .collect::<Result<_>>()?;
    Ok(InequalityReport::from_slacks(&slacks))
}

/// Result of a checkpoint audit over one recorded run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditReport {
    pub messages: u64,
    pub uses: u64,
    /// Worst per-message infidelity of the audited run.
    pub epsilon: f64,
    /// Sum over delivered uses of the information between the in-flight
    /// register and Bob's holdings plus all reference registers.
    pub sum_delivered: f64,
    /// Same sum over erased uses.
    pub sum_erased: f64,
    pub delivered_lower_bound: f64,
    pub erased_upper_bound: f64,
    pub pass: bool,
}

/// Information `I(S_i; B_(i-1) R)` carried by each channel use of a
/// checkpointed trace, in event order: the in-flight register against
/// Bob's current holdings plus all reference registers. Uses with no
/// observer registers contribute zero.
///
/// Registers retired during the run were verified exact product
/// factors, so their absence from later checkpoints does not change any
/// of the information terms.
pub fn per_use_information(trace: &ProtocolTrace) -> Result<Vec<f64>> {
    let snaps = trace.snapshots.as_ref().ok_or(Error::SnapshotsMissing)?;
    if snaps.len() != trace.events.len() {
        return Err(Error::IncompleteTrace("one checkpoint per channel use"));
    }
    snaps
        .iter()
        .map(|snap| {
            let sent = [snap.sent];
            let mut observers = snap.state.owned_by(Party::Bob);
            observers.extend(snap.state.owned_by(Party::Reference));
            if observers.is_empty() {
                Ok(0.0)
            } else {
                snap.state.mutual_information(&sent, &observers)
            }
        })
        .collect()
}

/// Accumulates `I(S_i; B_(i-1) R)` over a run's checkpoints, splits the
/// sum by outcome and checks both sums against the closed-form bounds
/// `sum_B >= 2m - 2(2 sqrt(2) m sqrt(eps) + 1)` and
/// `sum_E <= n - m + 4(2 sqrt(2) m sqrt(eps) + 1)`.
pub fn theorem1_audit(trace: &ProtocolTrace, m: u64) -> Result<AuditReport> {
    let infos = per_use_information(trace)?;
    if trace.per_message.len() as u64 != m {
        return Err(Error::IncompleteTrace("per-message records matching the message count"));
    }
    let epsilon = trace
        .per_message
        .iter()
        .map(|r| (1.0 - r.fidelity).max(0.0))
        .fold(0.0, f64::max);
    let mut sum_delivered = 0.0;
    let mut sum_erased = 0.0;
    for (info, event) in infos.iter().zip(&trace.events) {
        if event.delivered {
            sum_delivered += info;
        } else {
            sum_erased += info;
        }
    }
    let mf = m as f64;
    let n = trace.events.len() as f64;
    let margin = 2.0 * SQRT_2 * mf * epsilon.sqrt() + 1.0;
    let delivered_lower_bound = 2.0 * mf - 2.0 * margin;
    let erased_upper_bound = n - mf + 4.0 * margin;
    let pass = sum_delivered >= delivered_lower_bound - SLACK_TOL
        && sum_erased <= erased_upper_bound + SLACK_TOL;
    Ok(AuditReport {
        messages: m,
        uses: trace.events.len() as u64,
        epsilon,
        sum_delivered,
        sum_erased,
        delivered_lower_bound,
        erased_upper_bound,
        pass,
    })
}
