//! Labeled pure states on named qubit registers.
//!
//! A [`LabeledState`] is a unit vector over the computational basis of a
//! list of registers. The first label is the most significant bit of a
//! basis index, so `labels = [a, b]` puts `|a b>` at index `2*a + b`.
//! Registers carry an owning [`Party`]; ownership changes only through
//! [`LabeledState::transfer`], which is how channel erasure and delivery
//! are modeled upstream.
//!
//! States are immutable values. Every operation returns a new state and
//! enforces the global qubit cap [`QUBIT_CAP`], which keeps vectors small
//! enough that simulation stays exact to machine precision.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Hard upper bound on qubits per state; 2^12 amplitudes.
pub const QUBIT_CAP: usize = 12;

/// Absolute tolerance on state norms and verified-factor overlaps.
pub const NORM_TOL: f64 = 1e-9;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Who currently holds a register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Party {
    Alice,
    Bob,
    Eve,
    Reference,
}

/// Opaque register identifier, unique within any one state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegId(pub u64);

impl fmt::Display for RegId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

static NEXT_REG_ID: AtomicU64 = AtomicU64::new(0);

impl RegId {
    /// Allocates an identifier never handed out before in this process.
    pub fn fresh() -> RegId {
        RegId(NEXT_REG_ID.fetch_add(1, Ordering::Relaxed))
    }
}

/// A register name together with its current owner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SystemLabel {
    pub id: RegId,
    pub party: Party,
}

impl SystemLabel {
    pub fn new(id: RegId, party: Party) -> Self {
        SystemLabel { id, party }
    }

    pub fn fresh(party: Party) -> Self {
        SystemLabel::new(RegId::fresh(), party)
    }
}

/// Single- and two-qubit gates used by the protocols.
///
/// The two-qubit gates treat their first target as the more significant
/// bit of the pair. `BellBasisChange` maps the joint basis of a message
/// register and one half of a shared pair so that the pair of outcomes
/// `(i, j)` ends up in the computational basis with the residual
/// `X^i Z^j` on the far half. `BellToComputational` inverts the dense
/// coding encoding, mapping `(X^i Z^j x I)|phi+>` to `|i j>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    X,
    Z,
    H,
    Cx,
    Cz,
    BellBasisChange,
    BellToComputational,
}

impl Gate {
    pub fn arity(self) -> usize {
        match self {
            Gate::X | Gate::Z | Gate::H => 1,
            Gate::Cx | Gate::Cz | Gate::BellBasisChange | Gate::BellToComputational => 2,
        }
    }
}

type M2 = [[Complex64; 2]; 2];
type M4 = [[Complex64; 4]; 4];

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn matrix_1q(gate: Gate) -> M2 {
    let z = c(0.0);
    match gate {
        Gate::X => [[z, c(1.0)], [c(1.0), z]],
        Gate::Z => [[c(1.0), z], [z, c(-1.0)]],
        Gate::H => [
            [c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)],
            [c(FRAC_1_SQRT_2), c(-FRAC_1_SQRT_2)],
        ],
        _ => unreachable!("not a single-qubit gate"),
    }
}

fn matrix_2q(gate: Gate) -> M4 {
    let z = c(0.0);
    let o = c(1.0);
    let s = c(FRAC_1_SQRT_2);
    let n = c(-FRAC_1_SQRT_2);
    match gate {
        Gate::Cx => [
            [o, z, z, z],
            [z, o, z, z],
            [z, z, z, o],
            [z, z, o, z],
        ],
        Gate::Cz => [
            [o, z, z, z],
            [z, o, z, z],
            [z, z, o, z],
            [z, z, z, c(-1.0)],
        ],
        // Columns are images of |00>, |01>, |10>, |11>; built so that
        // applying it to (message, near half) of |psi>|phi+> leaves
        // (1/2) sum_ij |ij> (X^i Z^j |psi>) on the far half.
        Gate::BellBasisChange => [
            [s, z, z, s],
            [s, z, z, n],
            [z, s, s, z],
            [z, s, n, z],
        ],
        // Inverse of the dense-coding encoding: rows are the Bell basis
        // with the X^i Z^j convention on the first qubit.
        Gate::BellToComputational => [
            [s, z, z, s],
            [s, z, z, n],
            [z, s, s, z],
            [z, n, s, z],
        ],
        _ => unreachable!("not a two-qubit gate"),
    }
}

/// Pure state over an ordered list of labeled registers.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledState {
    labels: Vec<SystemLabel>,
    amps: Vec<Complex64>,
}

impl LabeledState {
    /// Builds a state after checking label uniqueness, the qubit cap,
    /// the amplitude count and the norm.
    pub fn new(labels: Vec<SystemLabel>, amps: Vec<Complex64>) -> Result<Self> {
        if labels.len() > QUBIT_CAP {
            return Err(Error::SizeCap {
                requested: labels.len(),
                cap: QUBIT_CAP,
            });
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].iter().any(|m| m.id == l.id) {
                return Err(Error::DuplicateLabel(l.id));
            }
        }
        let dim = 1usize << labels.len();
        if amps.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                got: amps.len(),
            });
        }
        let state = LabeledState { labels, amps };
        let n = state.norm();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(n));
        }
        Ok(state)
    }

    /// The zero-register state; identity for [`LabeledState::tensor`].
    pub fn empty() -> Self {
        LabeledState {
            labels: Vec::new(),
            amps: vec![c(1.0)],
        }
    }

    /// Computational basis state `|index>` on the given labels.
    pub fn basis(labels: Vec<SystemLabel>, index: usize) -> Result<Self> {
        let dim = 1usize
            .checked_shl(labels.len() as u32)
            .filter(|_| labels.len() <= QUBIT_CAP)
            .ok_or(Error::SizeCap {
                requested: labels.len(),
                cap: QUBIT_CAP,
            })?;
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                got: index,
            });
        }
        let mut amps = vec![c(0.0); dim];
        amps[index] = c(1.0);
        LabeledState::new(labels, amps)
    }

    pub fn qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn labels(&self) -> &[SystemLabel] {
        &self.labels
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn ids(&self) -> Vec<RegId> {
        self.labels.iter().map(|l| l.id).collect()
    }

    pub fn party_of(&self, id: RegId) -> Result<Party> {
        Ok(self.labels[self.position(id)?].party)
    }

    /// Ids currently owned by `party`, in label order.
    pub fn owned_by(&self, party: Party) -> Vec<RegId> {
        self.labels
            .iter()
            .filter(|l| l.party == party)
            .map(|l| l.id)
            .collect()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn position(&self, id: RegId) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l.id == id)
            .ok_or(Error::UnknownLabel(id))
    }

    fn bit_of(&self, pos: usize) -> usize {
        1usize << (self.labels.len() - 1 - pos)
    }

    /// Joint state with `other` appended on the less significant side.
    pub fn tensor(&self, other: &LabeledState) -> Result<LabeledState> {
        let total = self.labels.len() + other.labels.len();
        if total > QUBIT_CAP {
            return Err(Error::SizeCap {
                requested: total,
                cap: QUBIT_CAP,
            });
        }
        for l in &other.labels {
            if self.labels.iter().any(|m| m.id == l.id) {
                return Err(Error::DuplicateLabel(l.id));
            }
        }
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(LabeledState { labels, amps })
    }

    /// Applies `gate` to the registers named in `targets`.
    pub fn apply_gate(&self, gate: Gate, targets: &[RegId]) -> Result<LabeledState> {
        if targets.len() != gate.arity() {
            return Err(Error::ArityMismatch {
                expected: gate.arity(),
                got: targets.len(),
            });
        }
        match gate.arity() {
            1 => {
                let pos = self.position(targets[0])?;
                Ok(self.apply_1q(&matrix_1q(gate), pos))
            }
            2 => {
                if targets[0] == targets[1] {
                    return Err(Error::DuplicateLabel(targets[0]));
                }
                let p0 = self.position(targets[0])?;
                let p1 = self.position(targets[1])?;
                Ok(self.apply_2q(&matrix_2q(gate), p0, p1))
            }
            _ => unreachable!(),
        }
    }

    fn apply_1q(&self, u: &M2, pos: usize) -> LabeledState {
        let bit = self.bit_of(pos);
        let mut amps = self.amps.clone();
        for idx in 0..amps.len() {
            if idx & bit == 0 {
                let a0 = self.amps[idx];
                let a1 = self.amps[idx | bit];
                amps[idx] = u[0][0] * a0 + u[0][1] * a1;
                amps[idx | bit] = u[1][0] * a0 + u[1][1] * a1;
            }
        }
        LabeledState {
            labels: self.labels.clone(),
            amps,
        }
    }

    fn apply_2q(&self, u: &M4, p0: usize, p1: usize) -> LabeledState {
        let b0 = self.bit_of(p0);
        let b1 = self.bit_of(p1);
        let mut amps = self.amps.clone();
        for idx in 0..amps.len() {
            if idx & (b0 | b1) == 0 {
                let span = [idx, idx | b1, idx | b0, idx | b0 | b1];
                let old = span.map(|k| self.amps[k]);
                for (r, k) in span.into_iter().enumerate() {
                    amps[k] = (0..4).map(|col| u[r][col] * old[col]).sum();
                }
            }
        }
        LabeledState {
            labels: self.labels.clone(),
            amps,
        }
    }

    /// Adjoins `fresh` in `|0>` and copies `source` onto it in the
    /// computational basis (a controlled-X, not cloning).
    pub fn coherent_copy(&self, source: RegId, fresh: SystemLabel) -> Result<LabeledState> {
        self.position(source)?;
        let ancilla = LabeledState::basis(vec![fresh], 0)?;
        self.tensor(&ancilla)?.apply_gate(Gate::Cx, &[source, fresh.id])
    }

    /// Reassigns ownership of one register. The amplitudes are untouched;
    /// this is the only way ownership changes.
    pub fn transfer(&self, id: RegId, party: Party) -> Result<LabeledState> {
        let pos = self.position(id)?;
        let mut labels = self.labels.clone();
        labels[pos].party = party;
        Ok(LabeledState {
            labels,
            amps: self.amps.clone(),
        })
    }

    /// Renames one register, keeping amplitudes and order. Used to build
    /// reference states over registers that a protocol run created.
    pub fn relabeled(&self, from: RegId, to: SystemLabel) -> Result<LabeledState> {
        let pos = self.position(from)?;
        if to.id != from && self.labels.iter().any(|l| l.id == to.id) {
            return Err(Error::DuplicateLabel(to.id));
        }
        let mut labels = self.labels.clone();
        labels[pos] = to;
        Ok(LabeledState {
            labels,
            amps: self.amps.clone(),
        })
    }

    /// Same state with labels in the given order.
    pub fn permuted(&self, order: &[RegId]) -> Result<LabeledState> {
        if order.len() != self.labels.len() {
            return Err(Error::DimensionMismatch {
                expected: self.labels.len(),
                got: order.len(),
            });
        }
        let mut old_pos = Vec::with_capacity(order.len());
        for (i, id) in order.iter().enumerate() {
            if order[..i].contains(id) {
                return Err(Error::DuplicateLabel(*id));
            }
            old_pos.push(self.position(*id)?);
        }
        let q = self.labels.len();
        let labels: Vec<SystemLabel> = old_pos.iter().map(|&p| self.labels[p]).collect();
        let mut amps = vec![c(0.0); self.amps.len()];
        for idx in 0..self.amps.len() {
            let mut new_idx = 0usize;
            for (new_p, &old_p) in old_pos.iter().enumerate() {
                if idx & self.bit_of(old_p) != 0 {
                    new_idx |= 1usize << (q - 1 - new_p);
                }
            }
            amps[new_idx] = self.amps[idx];
        }
        Ok(LabeledState { labels, amps })
    }

    /// `<self|other>` after aligning `other` to this label order by id.
    pub fn inner_product(&self, other: &LabeledState) -> Result<Complex64> {
        let aligned = other.permuted(&self.ids())?;
        Ok(self
            .amps
            .iter()
            .zip(aligned.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|<self|other>|`, the fidelity between two pure states.
    pub fn overlap(&self, other: &LabeledState) -> Result<f64> {
        Ok(self.inner_product(other)?.norm())
    }

    /// Splits off a claimed tensor factor, verifying the claim.
    ///
    /// `factor` must be a pure state on a subset of this state's labels
    /// with matching ownership. Projecting onto it must leave a vector of
    /// norm 1 within [`NORM_TOL`]; the overlap doubles as the fidelity
    /// between the reduced state and the factor. Returns the renormalized
    /// remainder and that overlap.
    pub fn factor_out(&self, factor: &LabeledState) -> Result<(LabeledState, f64)> {
        let mut fac_pos = Vec::with_capacity(factor.labels.len());
        for l in &factor.labels {
            let pos = self.position(l.id)?;
            if self.labels[pos].party != l.party {
                return Err(Error::UnknownLabel(l.id));
            }
            fac_pos.push(pos);
        }
        let keep: Vec<usize> = (0..self.labels.len())
            .filter(|p| !fac_pos.contains(p))
            .collect();
        let keep_labels: Vec<SystemLabel> = keep.iter().map(|&p| self.labels[p]).collect();
        let mut rem = vec![c(0.0); 1usize << keep.len()];
        for idx in 0..self.amps.len() {
            let mut f_idx = 0usize;
            for (t, &p) in fac_pos.iter().enumerate() {
                if idx & self.bit_of(p) != 0 {
                    f_idx |= 1usize << (fac_pos.len() - 1 - t);
                }
            }
            let mut k_idx = 0usize;
            for (t, &p) in keep.iter().enumerate() {
                if idx & self.bit_of(p) != 0 {
                    k_idx |= 1usize << (keep.len() - 1 - t);
                }
            }
            rem[k_idx] += factor.amps[f_idx].conj() * self.amps[idx];
        }
        let overlap = rem.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (overlap - 1.0).abs() > NORM_TOL {
            return Err(Error::FactorMismatch(overlap));
        }
        for a in &mut rem {
            *a /= overlap;
        }
        Ok((
            LabeledState {
                labels: keep_labels,
                amps: rem,
            },
            overlap,
        ))
    }

    /// Extracts the bit pattern of `part` (in the given order) from a
    /// full basis index. Used by the reduction routines.
    pub(crate) fn pattern_positions(&self, part: &[RegId]) -> Result<Vec<usize>> {
        let mut seen = Vec::with_capacity(part.len());
        for id in part {
            let pos = self.position(*id)?;
            if seen.contains(&pos) {
                return Err(Error::DuplicateLabel(*id));
            }
            seen.push(pos);
        }
        Ok(seen)
    }

    pub(crate) fn bit_masks(&self, positions: &[usize]) -> Vec<usize> {
        positions.iter().map(|&p| self.bit_of(p)).collect()
    }
}

/// `(|00> + |11>)/sqrt(2)` on two fresh registers, halves owned by
/// Alice and Bob.
pub fn make_bell() -> LabeledState {
    make_bell_with(SystemLabel::fresh(Party::Alice), SystemLabel::fresh(Party::Bob))
}

/// Maximally entangled pair on the given labels.
pub fn make_bell_with(a: SystemLabel, b: SystemLabel) -> LabeledState {
    let s = c(FRAC_1_SQRT_2);
    LabeledState::new(vec![a, b], vec![s, c(0.0), c(0.0), s])
        .expect("two distinct fresh labels form a valid pair")
}

/// `(|000> + |111>)/sqrt(2)` on fresh registers owned by Alice, Bob
/// and Eve.
pub fn make_ghz() -> LabeledState {
    make_ghz_with(
        SystemLabel::fresh(Party::Alice),
        SystemLabel::fresh(Party::Bob),
        SystemLabel::fresh(Party::Eve),
    )
}

/// Three-party cat state on the given labels.
pub fn make_ghz_with(a: SystemLabel, b: SystemLabel, e: SystemLabel) -> LabeledState {
    let s = c(FRAC_1_SQRT_2);
    let z = c(0.0);
    LabeledState::new(vec![a, b, e], vec![s, z, z, z, z, z, z, s])
        .expect("three distinct fresh labels form a valid cat state")
}

/// `cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>` on a fresh register
/// owned by Alice.
pub fn prepare_message(theta: f64, phi: f64) -> LabeledState {
    prepare_message_with(SystemLabel::fresh(Party::Alice), theta, phi)
}

/// Same Bloch-angle state on an explicit label, for building reference
/// states over registers that already exist.
pub fn prepare_message_with(label: SystemLabel, theta: f64, phi: f64) -> LabeledState {
    let amps = vec![
        c((theta / 2.0).cos()),
        Complex64::from_polar((theta / 2.0).sin(), phi),
    ];
    LabeledState::new(vec![label], amps).expect("Bloch angles give a unit vector")
}

/// Haar-random pure state on `num_qubits` fresh Alice registers,
/// drawn from the stream determined by `seed`.
pub fn random_pure_state(num_qubits: usize, seed: u64) -> Result<LabeledState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = (0..num_qubits)
        .map(|_| SystemLabel::fresh(Party::Alice))
        .collect();
    random_pure_state_with(labels, &mut rng)
}

/// Haar-random pure state on explicit labels from a caller-owned stream.
pub fn random_pure_state_with(
    labels: Vec<SystemLabel>,
    rng: &mut impl Rng,
) -> Result<LabeledState> {
    if labels.is_empty() || labels.len() > QUBIT_CAP {
        return Err(Error::SizeCap {
            requested: labels.len(),
            cap: QUBIT_CAP,
        });
    }
    let dim = 1usize << labels.len();
    let mut amps = Vec::with_capacity(dim);
    for _ in 0..dim {
        let (re, im) = gaussian_pair(rng);
        amps.push(Complex64::new(re, im));
    }
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amps {
        *a /= norm;
    }
    LabeledState::new(labels, amps)
}

/// One Box-Muller draw; uniform inputs are shifted away from 0 so the
/// logarithm is finite.
fn gaussian_pair(rng: &mut impl Rng) -> (f64, f64) {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let t = 2.0 * std::f64::consts::PI * u2;
    (r * t.cos(), r * t.sin())
}
