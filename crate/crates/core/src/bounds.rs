//! Closed-form rate bounds for the feedback-assisted erasure channel,
//! the nested undetermined-region curve table, and the martingale
//! concentration experiment behind the upper bound.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::infotheory::per_use_information;
use crate::protocol::ProtocolTrace;

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(Error::InvalidProbability(p));
    }
    Ok(())
}

/// Best known achievable rate: `(1-p)^2` up to the crossover at 1/2,
/// then `(1-p)/(1+2p)`. Continuous, equal to 1/4 at the crossover.
pub fn new_lower_bound(p: f64) -> Result<f64> {
    check_p(p)?;
    if p <= 0.5 {
        Ok((1.0 - p) * (1.0 - p))
    } else {
        Ok((1.0 - p) / (1.0 + 2.0 * p))
    }
}

/// Converse bound from the concentration argument: `(1-p)/(1+p)`.
pub fn new_upper_bound(p: f64) -> Result<f64> {
    check_p(p)?;
    Ok((1.0 - p) / (1.0 + p))
}

/// Previously known bracket: lower `max(1-2p, (1-p)/3)` with crossover
/// at 2/5, upper the two-way-assisted line `1-p`.
pub fn prior_bounds(p: f64) -> Result<(f64, f64)> {
    check_p(p)?;
    Ok(((1.0 - 2.0 * p).max((1.0 - p) / 3.0), 1.0 - p))
}

/// Reference capacities without feedback: the unassisted rate
/// `max(0, 1-2p)` and the two-way-assisted rate `1-p`.
pub fn capacity_reference(p: f64) -> Result<(f64, f64)> {
    check_p(p)?;
    Ok(((1.0 - 2.0 * p).max(0.0), 1.0 - p))
}

/// One row of the curve table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCurvePoint {
    pub p: f64,
    pub q_unassisted: f64,
    pub q2: f64,
    pub prior_lower: f64,
    pub prior_upper: f64,
    pub new_lower: f64,
    pub new_upper: f64,
}

/// Uniform grid of 1001 points covering [0, 1].
pub fn default_grid() -> Vec<f64> {
    (0..=1000).map(|i| i as f64 / 1000.0).collect()
}

/// Evaluates all six curves on the grid. The new undetermined region
/// [new_lower, new_upper] sits inside the previous one at every point.
pub fn figure1_data(grid: &[f64]) -> Result<Vec<BoundCurvePoint>> {
    grid.iter()
        .map(|&p| {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::GridOutOfRange(p));
            }
            let (q_unassisted, q2) = capacity_reference(p)?;
            let (prior_lower, prior_upper) = prior_bounds(p)?;
            Ok(BoundCurvePoint {
                p,
                q_unassisted,
                q2,
                prior_lower,
                prior_upper,
                new_lower: new_lower_bound(p)?,
                new_upper: new_upper_bound(p)?,
            })
        })
        .collect()
}

/// Outcome of the strict-separation sweep between the converse bound
/// and the two-way-assisted line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparationReport {
    pub points: u64,
    /// Smallest value of `q2 - new_upper` on the grid; closed form
    /// `p(1-p)/(1+p)` per point.
    pub min_gap: f64,
    pub all_strict: bool,
}

/// Checks `new_upper(p) < q2(p)` strictly at every grid point. The grid
/// must avoid the endpoints, where the two curves coincide.
pub fn separation_certificate(grid: &[f64]) -> Result<SeparationReport> {
    let mut min_gap = f64::INFINITY;
    let mut all_strict = true;
    for &p in grid {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::GridOutOfRange(p));
        }
        let (_, q2) = capacity_reference(p)?;
        let gap = q2 - new_upper_bound(p)?;
        min_gap = min_gap.min(gap);
        all_strict &= gap > 0.0;
    }
    Ok(SeparationReport {
        points: grid.len() as u64,
        min_gap,
        all_strict,
    })
}

/// Per-step information values fed to the martingale: either the
/// worst-case constant 2, or values harvested from a checkpointed run.
/// Harvested schedules repeat cyclically when a run needs more steps
/// than the source trace had.
#[derive(Debug, Clone, PartialEq)]
pub enum InfoSchedule {
    WorstCase,
    Harvested(Vec<f64>),
}

impl InfoSchedule {
    /// Validated harvested schedule; every value must lie in [0, 2].
    pub fn harvested(values: Vec<f64>) -> Result<InfoSchedule> {
        if values.is_empty() {
            return Err(Error::IncompleteTrace("at least one information value"));
        }
        for &v in &values {
            if !(0.0..=2.0).contains(&v) || !v.is_finite() {
                return Err(Error::InfoOutOfRange(v));
            }
        }
        Ok(InfoSchedule::Harvested(values))
    }

    /// Harvests the per-use information series of a checkpointed trace.
    /// Values a hair above 2 from numerical roundoff are clamped.
    pub fn from_trace(trace: &ProtocolTrace) -> Result<InfoSchedule> {
        let raw = per_use_information(trace)?;
        let mut values = Vec::with_capacity(raw.len());
        for v in raw {
            if !(-1e-6..=2.0 + 1e-6).contains(&v) || !v.is_finite() {
                return Err(Error::InfoOutOfRange(v));
            }
            values.push(v.clamp(0.0, 2.0));
        }
        InfoSchedule::harvested(values)
    }

    fn value(&self, i: usize) -> f64 {
        match self {
            InfoSchedule::WorstCase => 2.0,
            InfoSchedule::Harvested(values) => values[i % values.len()],
        }
    }
}

/// One realization of the bounded-increment process: increments
/// `X_i = (p/2) I_i` on delivery and `-((1-p)/2) I_i` on erasure, with
/// partial sums starting at zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleTrace {
    pub p: f64,
    pub n: u64,
    pub m: u64,
    pub increments: Vec<f64>,
    pub partial_sums: Vec<f64>,
}

impl MartingaleTrace {
    /// Final partial sum `Y_n`.
    pub fn final_sum(&self) -> f64 {
        *self.partial_sums.last().unwrap_or(&0.0)
    }
}

/// Simulates `n` steps of the process. Each step draws erasure with
/// probability `p` and weighs the scheduled information value, making
/// the conditional increment mean zero by construction; `m` is carried
/// as metadata for the message count the schedule refers to.
pub fn martingale_run(
    p: f64,
    n: u64,
    m: u64,
    schedule: &InfoSchedule,
    rng: &mut impl Rng,
) -> Result<MartingaleTrace> {
    check_p(p)?;
    let mut increments = Vec::with_capacity(n as usize);
    let mut partial_sums = Vec::with_capacity(n as usize + 1);
    partial_sums.push(0.0);
    for i in 0..n as usize {
        let info = schedule.value(i);
        if !(0.0..=2.0).contains(&info) {
            return Err(Error::InfoOutOfRange(info));
        }
        let delivered = rng.gen::<f64>() >= p;
        let x = if delivered {
            (p / 2.0) * info
        } else {
            -((1.0 - p) / 2.0) * info
        };
        increments.push(x);
        partial_sums.push(partial_sums[i] + x);
    }
    Ok(MartingaleTrace {
        p,
        n,
        m,
        increments,
        partial_sums,
    })
}

/// Tail comparison against the sub-Gaussian bound, serialized exactly
/// as {p, n, k, trials, empirical_tail, azuma_bound, pass}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AzumaReport {
    pub p: f64,
    pub n: u64,
    pub k: f64,
    pub trials: u64,
    pub empirical_tail: f64,
    pub azuma_bound: f64,
    pub pass: bool,
}

/// Minimum number of traces the tail estimate is considered meaningful
/// for.
pub const MIN_AZUMA_TRACES: usize = 1000;

/// Compares the empirical frequency of `|Y_n| >= k n` against
/// `exp(-k^2 n / 2)`, passing when the frequency stays within three
/// Monte Carlo standard deviations of the bound.
pub fn azuma_tail_check(traces: &[MartingaleTrace], k: f64) -> Result<AzumaReport> {
    if traces.len() < MIN_AZUMA_TRACES {
        return Err(Error::TooFewTraces);
    }
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Config {
            field: "k",
            reason: "must be a positive finite deviation scale".into(),
        });
    }
    let (p, n) = (traces[0].p, traces[0].n);
    if traces.iter().any(|t| t.p != p || t.n != n) {
        return Err(Error::Config {
            field: "traces",
            reason: "all traces must share the same p and n".into(),
        });
    }
    let trials = traces.len() as u64;
    let threshold = k * n as f64;
    let hits = traces
        .iter()
        .filter(|t| t.final_sum().abs() >= threshold)
        .count();
    let empirical_tail = hits as f64 / trials as f64;
    let azuma_bound = (-k * k * n as f64 / 2.0).exp();
    let sigma = (empirical_tail * (1.0 - empirical_tail) / trials as f64).sqrt();
    let pass = empirical_tail <= azuma_bound + 3.0 * sigma;
    Ok(AzumaReport {
        p,
        n,
        k,
        trials,
        empirical_tail,
        azuma_bound,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::run_rng;
    use approx::assert_abs_diff_eq;

    const TOL: f64 = 1e-12;

    #[test]
    fn achievable_rate_matches_both_pieces() {
        assert_abs_diff_eq!(new_lower_bound(0.0).unwrap(), 1.0, epsilon = TOL);
        assert_abs_diff_eq!(new_lower_bound(0.5).unwrap(), 0.25, epsilon = TOL);
        assert_abs_diff_eq!(new_lower_bound(0.75).unwrap(), 0.1, epsilon = TOL);
        assert_abs_diff_eq!(new_lower_bound(1.0).unwrap(), 0.0, epsilon = TOL);
        // The two pieces agree at the crossover.
        let left = (1.0 - 0.5_f64) * (1.0 - 0.5);
        let right = (1.0 - 0.5) / (1.0 + 2.0 * 0.5);
        assert_eq!(left, right);
    }

    #[test]
    fn converse_bound_evaluates() {
        assert_abs_diff_eq!(new_upper_bound(0.0).unwrap(), 1.0, epsilon = TOL);
        assert_abs_diff_eq!(new_upper_bound(1.0 / 3.0).unwrap(), 0.5, epsilon = TOL);
        assert_abs_diff_eq!(new_upper_bound(1.0).unwrap(), 0.0, epsilon = TOL);
    }

    #[test]
    fn prior_bracket_crossover_and_endpoints() {
        let (lo, hi) = prior_bounds(0.4).unwrap();
        assert_abs_diff_eq!(lo, 0.2, epsilon = TOL);
        assert_abs_diff_eq!(hi, 0.6, epsilon = TOL);
        assert_eq!(prior_bounds(0.0).unwrap(), (1.0, 1.0));
        let (lo, hi) = prior_bounds(0.5).unwrap();
        assert_abs_diff_eq!(lo, 1.0 / 6.0, epsilon = TOL);
        assert_abs_diff_eq!(hi, 0.5, epsilon = TOL);
    }

    #[test]
    fn reference_capacities_evaluate() {
        assert_eq!(capacity_reference(0.5).unwrap(), (0.0, 0.5));
        assert_eq!(capacity_reference(0.25).unwrap(), (0.5, 0.75));
        assert_eq!(capacity_reference(1.0).unwrap(), (0.0, 0.0));
        assert_eq!(
            capacity_reference(1.5).unwrap_err(),
            Error::InvalidProbability(1.5)
        );
    }

    #[test]
    fn midpoint_row_matches_twelve_digit_values() {
        let rows = figure1_data(&[0.5]).unwrap();
        let row = rows[0];
        assert_abs_diff_eq!(row.q_unassisted, 0.0, epsilon = TOL);
        assert_abs_diff_eq!(row.q2, 0.5, epsilon = TOL);
        assert_abs_diff_eq!(row.prior_lower, 1.0 / 6.0, epsilon = TOL);
        assert_abs_diff_eq!(row.prior_upper, 0.5, epsilon = TOL);
        assert_abs_diff_eq!(row.new_lower, 0.25, epsilon = TOL);
        assert_abs_diff_eq!(row.new_upper, 1.0 / 3.0, epsilon = TOL);
    }

    #[test]
    fn curves_nest_and_decrease_on_the_default_grid() {
        let rows = figure1_data(&default_grid()).unwrap();
        assert_eq!(rows.len(), 1001);
        for w in rows.windows(2) {
            assert!(w[1].new_lower <= w[0].new_lower + TOL);
            assert!(w[1].new_upper <= w[0].new_upper + TOL);
        }
        for row in &rows {
            assert!(row.q_unassisted <= row.prior_lower + TOL);
            assert!(row.prior_lower <= row.new_lower + TOL);
            assert!(row.new_lower <= row.new_upper + TOL);
            assert!(row.new_upper <= row.prior_upper + TOL);
            assert_eq!(row.prior_upper, row.q2);
            for r in [
                row.q_unassisted,
                row.q2,
                row.prior_lower,
                row.prior_upper,
                row.new_lower,
                row.new_upper,
            ] {
                assert!((0.0..=1.0).contains(&r));
            }
        }
    }

    #[test]
    fn separation_is_strict_inside_the_interval() {
        let grid: Vec<f64> = (1..1000).map(|i| i as f64 / 1000.0).collect();
        let report = separation_certificate(&grid).unwrap();
        assert!(report.all_strict);
        assert!(report.min_gap > 0.0);
        let half = separation_certificate(&[0.5]).unwrap();
        assert_abs_diff_eq!(half.min_gap, 1.0 / 6.0, epsilon = TOL);
        assert_abs_diff_eq!(
            half.min_gap,
            0.5 * (1.0 - 0.5) / (1.0 + 0.5),
            epsilon = TOL
        );
        assert_eq!(
            separation_certificate(&[0.0]).unwrap_err(),
            Error::GridOutOfRange(0.0)
        );
        assert_eq!(
            separation_certificate(&[1.0]).unwrap_err(),
            Error::GridOutOfRange(1.0)
        );
    }

    #[test]
    fn zero_information_keeps_the_sum_at_zero() {
        let schedule = InfoSchedule::harvested(vec![0.0]).unwrap();
        let mut rng = run_rng(3, 0);
        let trace = martingale_run(0.5, 50, 1, &schedule, &mut rng).unwrap();
        assert_eq!(trace.final_sum(), 0.0);
        assert!(trace.increments.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn increments_stay_bounded_and_sums_telescope() {
        let mut rng = run_rng(4, 0);
        let trace = martingale_run(0.3, 200, 1, &InfoSchedule::WorstCase, &mut rng).unwrap();
        assert_eq!(trace.partial_sums[0], 0.0);
        assert_eq!(trace.increments.len(), 200);
        assert_eq!(trace.partial_sums.len(), 201);
        for (i, &x) in trace.increments.iter().enumerate() {
            assert!(x.abs() <= 1.0);
            assert_abs_diff_eq!(
                trace.partial_sums[i + 1] - trace.partial_sums[i],
                x,
                epsilon = TOL
            );
        }
        assert!(trace.final_sum().abs() <= 200.0);
    }

    #[test]
    fn sample_mean_of_the_final_sum_is_near_zero() {
        let n = 200;
        let trials = 500;
        let mut total = 0.0;
        for t in 0..trials {
            let mut rng = run_rng(11, t);
            total += martingale_run(0.5, n, 1, &InfoSchedule::WorstCase, &mut rng)
                .unwrap()
                .final_sum();
        }
        let mean = total / trials as f64;
        // Increments are +-1/2 here, so Var(Y_n) = n/4.
        let se = ((n as f64) / 4.0 / trials as f64).sqrt();
        assert!(mean.abs() <= 5.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn out_of_range_information_is_rejected() {
        assert_eq!(
            InfoSchedule::harvested(vec![1.0, 3.0]).unwrap_err(),
            Error::InfoOutOfRange(3.0)
        );
        assert_eq!(
            InfoSchedule::harvested(vec![-0.5]).unwrap_err(),
            Error::InfoOutOfRange(-0.5)
        );
    }

    #[test]
    fn harvested_schedules_come_from_checkpointed_runs() {
        use crate::protocol::Session;
        use crate::state::{make_bell_with, Party, SystemLabel};
        let pair = make_bell_with(
            SystemLabel::fresh(Party::Alice),
            SystemLabel::fresh(Party::Reference),
        );
        let mut session = Session::scripted([true], 64);
        session.enable_snapshots();
        session.subprotocol2_send(&pair).unwrap();
        let schedule = InfoSchedule::from_trace(session.trace()).unwrap();
        let InfoSchedule::Harvested(values) = &schedule else {
            panic!("expected harvested values");
        };
        assert_eq!(values.len(), 1);
        assert!((0.0..=2.0).contains(&values[0]));
        let mut rng = run_rng(12, 0);
        let trace = martingale_run(0.25, 10, 1, &schedule, &mut rng).unwrap();
        assert_eq!(trace.increments.len(), 10);
    }

    #[test]
    fn tail_stays_under_the_azuma_bound() {
        let trials = 2000;
        let traces: Vec<MartingaleTrace> = (0..trials)
            .map(|t| {
                let mut rng = run_rng(21, t);
                martingale_run(0.5, 100, 1, &InfoSchedule::WorstCase, &mut rng).unwrap()
            })
            .collect();
        let report = azuma_tail_check(&traces, 0.2).unwrap();
        assert!(report.pass, "tail {report:?}");
        assert_abs_diff_eq!(report.azuma_bound, (-2.0_f64).exp(), epsilon = TOL);
        assert_eq!(report.trials, 2000);
        // Increments are capped at 1/2 here, so a deviation scale close
        // to 1 can never be reached.
        let report = azuma_tail_check(&traces, 0.9).unwrap();
        assert_eq!(report.empirical_tail, 0.0);
        assert!(report.pass);
    }

    #[test]
    fn short_trace_sets_are_rejected() {
        let mut rng = run_rng(22, 0);
        let traces: Vec<MartingaleTrace> = (0..10)
            .map(|_| martingale_run(0.5, 20, 1, &InfoSchedule::WorstCase, &mut rng).unwrap())
            .collect();
        assert_eq!(azuma_tail_check(&traces, 0.2).unwrap_err(), Error::TooFewTraces);
    }
}
