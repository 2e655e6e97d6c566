//! Acceptance gate: one test per stated delivery check, each printing
//! a single PASS/FAIL line. Expensive Monte Carlo fixtures are shared
//! across checks through lazily initialized statics.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use erasurelab_core::{
    azuma_tail_check, default_grid, distance_fidelity_sweep, fannes_sweep, figure1_data,
    figure_csv, lemma1_sweep, martingale_run, run_direct_transfer, run_protocol,
    run_protocol_indexed, run_rng, run_stats_csv, sig12, theorem1_audit, to_json, ChannelConfig,
    EntropyInequality, InfoSchedule, MartingaleTrace, Party, ProtocolKind, RunReport, Session,
    Strategy, SystemLabel, DEFAULT_MAX_RETRANSMITS, PART_PROFILES, SLACK_TOL,
};

const FIDELITY_TOL: f64 = 1e-9;

fn report_line(index: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("acceptance {index:02} {name}: {verdict} ({detail})");
    assert!(pass, "acceptance {index:02} {name}: {detail}");
}

/// Eight exactness runs: both subprotocols at four erasure rates, one
/// thousand messages each.
struct ExactRuns {
    runs: Vec<(f64, ProtocolKind, RunReport)>,
    elapsed: Duration,
}

fn exact_runs() -> &'static ExactRuns {
    static RUNS: OnceLock<ExactRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let start = Instant::now();
        let mut runs = Vec::new();
        let mut idx = 0;
        for &p in &[0.0, 0.25, 0.5, 0.75] {
            for strategy in [Strategy::Sub1, Strategy::Sub2] {
                let cfg = ChannelConfig::new(p, DEFAULT_MAX_RETRANSMITS, 58_101).unwrap();
                let report = run_protocol_indexed(&cfg, 1_000, strategy, idx).unwrap();
                runs.push((p, strategy.resolve(p), report));
                idx += 1;
            }
        }
        ExactRuns {
            runs,
            elapsed: start.elapsed(),
        }
    })
}

/// The two production-scale rate runs shared by the rate and
/// coefficient checks.
struct BigRuns {
    sub2_low: RunReport,
    sub1_high: RunReport,
    elapsed: Duration,
}

fn big_runs() -> &'static BigRuns {
    static RUNS: OnceLock<BigRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let start = Instant::now();
        let cfg = ChannelConfig::new(0.25, DEFAULT_MAX_RETRANSMITS, 20_250_822).unwrap();
        let sub2_low = run_protocol(&cfg, 100_000, Strategy::Sub2).unwrap();
        let cfg = ChannelConfig::new(0.75, DEFAULT_MAX_RETRANSMITS, 20_250_823).unwrap();
        let sub1_high = run_protocol(&cfg, 100_000, Strategy::Sub1).unwrap();
        BigRuns {
            sub2_low,
            sub1_high,
            elapsed: start.elapsed(),
        }
    })
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn c01_every_decoded_message_is_exact() {
    let fixture = exact_runs();
    let mut worst = f64::INFINITY;
    for (_, _, report) in &fixture.runs {
        worst = worst.min(report.min_fidelity);
        for record in &report.trace.per_message {
            assert!(record.fidelity <= 1.0 + FIDELITY_TOL);
        }
    }
    let in_time = fixture.elapsed < Duration::from_secs(60);
    let pass = worst >= 1.0 - FIDELITY_TOL && in_time;
    report_line(
        1,
        "protocol exactness",
        pass,
        &format!(
            "min fidelity {worst:.12} over 8x1000 messages, {:.1?}",
            fixture.elapsed
        ),
    );
}

#[test]
fn c02_empirical_rates_match_closed_forms() {
    let fixture = big_runs();
    let rate2 = fixture.sub2_low.stats.empirical_rate;
    let rate1 = fixture.sub1_high.stats.empirical_rate;
    let in_time = fixture.elapsed < Duration::from_secs(300);
    let pass = (rate2 - 0.5625).abs() <= 0.01 && (rate1 - 0.1).abs() <= 0.005 && in_time;
    report_line(
        2,
        "rate reproduction",
        pass,
        &format!(
            "p=0.25 dense {rate2:.4} vs 0.5625, p=0.75 retransmit {rate1:.4} vs 0.1000, {:.1?}",
            fixture.elapsed
        ),
    );
}

#[test]
fn c03_per_message_means_match_coefficients() {
    let fixture = big_runs();
    let sub1 = &fixture.sub1_high.trace.per_message;
    let sub2 = &fixture.sub2_low.trace.per_message;

    let mut checks: Vec<(String, bool)> = Vec::new();
    let mut check = |name: &str, mean: f64, se: f64, coeff: f64| {
        let ok = (mean - coeff).abs() <= 5.0 * se;
        checks.push((format!("{name} {mean:.4} vs {coeff:.4} (se {se:.2e})"), ok));
    };

    let (mean, se) = mean_and_se(sub1.iter().map(|r| r.direct_uses as f64));
    check("sub1 uses", mean, se, 2.0 / (1.0 - 0.75));
    let (mean, se) = mean_and_se(sub1.iter().map(|r| f64::from(r.ghz)));
    check("sub1 cat states", mean, se, 2.0 * 0.75);
    let (mean, se) = mean_and_se(sub2.iter().map(|r| f64::from(r.residual_be)));
    check("sub2 receiver-environment pairs", mean, se, 1.0 / (1.0 - 0.25) - 1.0);
    let (mean, se) = mean_and_se(sub2.iter().map(|r| r.direct_uses as f64));
    check("sub2 uses", mean, se, 1.0 / (1.0 - 0.25));

    let pass = checks.iter().all(|(_, ok)| *ok);
    let detail: Vec<String> = checks.into_iter().map(|(s, _)| s).collect();
    report_line(3, "resource coefficients", pass, &detail.join("; "));
}

#[test]
fn c04_entanglement_bookkeeping_is_exact() {
    let fixture = exact_runs();
    let mut worst: f64 = 0.0;
    for (_, _, report) in &fixture.runs {
        worst = worst.max((report.bookkeeping_fidelity - 1.0).abs());
        for record in &report.trace.per_message {
            assert!((record.bookkeeping_fidelity - 1.0).abs() <= FIDELITY_TOL);
        }
    }
    let pass = worst <= FIDELITY_TOL;
    report_line(
        4,
        "entanglement bookkeeping",
        pass,
        &format!("max |product fidelity - 1| = {worst:.2e} over 8 runs"),
    );
}

#[test]
fn c05_entropy_inequalities_have_no_violations() {
    let start = Instant::now();
    let mut total_violations = 0;
    let mut min_slack = f64::INFINITY;
    for (w, which) in EntropyInequality::ALL.into_iter().enumerate() {
        for (pr, profile) in PART_PROFILES.into_iter().enumerate() {
            let seed = 1_009 + 97 * w as u64 + 13 * pr as u64;
            let report = lemma1_sweep(which, profile, 10_000, seed).unwrap();
            total_violations += report.violations;
            min_slack = min_slack.min(report.min_slack);
            assert_eq!(report.samples, 10_000);
        }
    }
    let elapsed = start.elapsed();
    let in_time = elapsed < Duration::from_secs(300);
    let pass = total_violations == 0 && min_slack >= -SLACK_TOL && in_time;
    report_line(
        5,
        "tripartite inequality sweep",
        pass,
        &format!(
            "12x10000 samples, {total_violations} violations, min slack {min_slack:.2e}, {elapsed:.1?}"
        ),
    );
}

#[test]
fn c06_continuity_and_distance_relations_hold() {
    let fannes = fannes_sweep(1_000, 2_027).unwrap();
    let distance = distance_fidelity_sweep(1_000, 2_029).unwrap();
    let pass = fannes.violations == 0 && distance.violations == 0;
    report_line(
        6,
        "continuity and distance steps",
        pass,
        &format!(
            "continuity min slack {:.2e}, distance min slack {:.2e}, 1000 pairs each",
            fannes.min_slack, distance.min_slack
        ),
    );
}

#[test]
fn c07_curve_table_is_exact_nested_and_separated() {
    let rows = figure1_data(&default_grid()).unwrap();
    let mid = rows[500];
    let expected = [
        (mid.q_unassisted, 0.0),
        (mid.q2, 0.5),
        (mid.prior_lower, 1.0 / 6.0),
        (mid.prior_upper, 0.5),
        (mid.new_lower, 0.25),
        (mid.new_upper, 1.0 / 3.0),
    ];
    let twelve_digits = expected
        .iter()
        .all(|&(got, want)| sig12(got) == sig12(want) && (got - want).abs() <= 1e-12);
    let nested = rows.iter().all(|r| {
        r.q_unassisted <= r.prior_lower + 1e-12
            && r.prior_lower <= r.new_lower + 1e-12
            && r.new_lower <= r.new_upper + 1e-12
            && r.new_upper <= r.prior_upper + 1e-12
            && r.prior_upper == r.q2
    });
    let strict = rows
        .iter()
        .filter(|r| r.p > 0.0 && r.p < 1.0)
        .all(|r| r.new_upper < r.q2);
    let pass = twelve_digits && nested && strict && rows.len() == 1001;
    report_line(
        7,
        "bound curves",
        pass,
        &format!(
            "midpoint row exact to 12 digits: {twelve_digits}, nesting at 1001 points: {nested}, strict separation: {strict}"
        ),
    );
}

#[test]
fn c08_concentration_experiment_respects_the_tail_bound() {
    let trials = 10_000;
    let traces: Vec<MartingaleTrace> = (0..trials)
        .map(|t| {
            let mut rng = run_rng(404, t);
            martingale_run(0.5, 100, 1, &InfoSchedule::WorstCase, &mut rng).unwrap()
        })
        .collect();
    let bounded = traces
        .iter()
        .all(|t| t.increments.iter().all(|x| x.abs() <= 1.0));
    let (mean, _) = mean_and_se(traces.iter().map(|t| t.final_sum()));
    // Increments are +-1/2 at these parameters, so Var(Y_n) = n/4.
    let sigma_mean = (100.0 / 4.0 / trials as f64).sqrt();
    let centered = mean.abs() <= 5.0 * sigma_mean;
    let tail = azuma_tail_check(&traces, 0.2).unwrap();
    let bound_value = (tail.azuma_bound - 0.135_335_283_236_612_7).abs() <= 1e-9;
    let pass = tail.pass && bounded && centered && bound_value;
    report_line(
        8,
        "tail concentration",
        pass,
        &format!(
            "tail {:.4} vs bound {:.4}, mean Y_n {mean:.4} ({:.1} sigma), increments bounded: {bounded}",
            tail.empirical_tail,
            tail.azuma_bound,
            mean.abs() / sigma_mean
        ),
    );
}

#[test]
fn c09_lossless_audits_meet_the_exact_bound() {
    let cfg = ChannelConfig::new(0.0, DEFAULT_MAX_RETRANSMITS, 77).unwrap();
    let direct = run_direct_transfer(&cfg, 1).unwrap();
    let direct_report = theorem1_audit(&direct.trace, 1).unwrap();

    let mut session_reports = Vec::new();
    for i in 0..16_u64 {
        for kind in [ProtocolKind::Sub1, ProtocolKind::Sub2] {
            let mut rng = run_rng(78, i);
            let psi = erasurelab_core::random_pure_state_with(
                vec![SystemLabel::fresh(Party::Alice)],
                &mut rng,
            )
            .unwrap();
            let script = if kind == ProtocolKind::Sub1 {
                vec![true, true]
            } else {
                vec![true]
            };
            let mut session = Session::scripted(script, DEFAULT_MAX_RETRANSMITS);
            session.enable_snapshots();
            match kind {
                ProtocolKind::Sub1 => session.subprotocol1_send(&psi).unwrap(),
                _ => session.subprotocol2_send(&psi).unwrap(),
            };
            session_reports.push(theorem1_audit(session.trace(), 1).unwrap());
        }
    }

    let mut pass = true;
    // One message: the zero-error delivered-sum bound is 2m - 2 = 0.
    pass &= direct_report.epsilon == 0.0;
    pass &= (direct_report.sum_delivered - 2.0).abs() <= FIDELITY_TOL;
    pass &= direct_report.sum_delivered >= 0.0 && direct_report.pass;
    let mut min_sum = f64::INFINITY;
    for r in &session_reports {
        pass &= r.epsilon <= 1e-12;
        pass &= r.uses <= 4;
        pass &= r.sum_delivered >= -SLACK_TOL && r.pass;
        min_sum = min_sum.min(r.sum_delivered);
    }
    report_line(
        9,
        "small lossless audits",
        pass,
        &format!(
            "single pair-half carries {:.6}; 32 one-message runs, min delivered sum {min_sum:.3e} >= 0",
            direct_report.sum_delivered
        ),
    );
}

#[test]
fn c10_artifacts_are_byte_identical_across_repeats() {
    let cfg = ChannelConfig::new(0.3, DEFAULT_MAX_RETRANSMITS, 31_337).unwrap();
    let stats_a = run_protocol(&cfg, 200, Strategy::Auto).unwrap().stats;
    let stats_b = run_protocol(&cfg, 200, Strategy::Auto).unwrap().stats;
    let csv_runs = run_stats_csv(std::slice::from_ref(&stats_a))
        == run_stats_csv(std::slice::from_ref(&stats_b));

    let figure_a = figure_csv(&figure1_data(&default_grid()).unwrap());
    let figure_b = figure_csv(&figure1_data(&default_grid()).unwrap());
    let csv_figure = figure_a == figure_b;

    let sweep_a = to_json(&fannes_sweep(50, 5).unwrap());
    let sweep_b = to_json(&fannes_sweep(50, 5).unwrap());
    let json_sweep = sweep_a == sweep_b;

    let azuma = |_| {
        let traces: Vec<MartingaleTrace> = (0..1_000)
            .map(|t| {
                let mut rng = run_rng(606, t);
                martingale_run(0.5, 50, 1, &InfoSchedule::WorstCase, &mut rng).unwrap()
            })
            .collect();
        to_json(&azuma_tail_check(&traces, 0.3).unwrap())
    };
    let json_azuma = azuma(0) == azuma(1);

    let pass = csv_runs && csv_figure && json_sweep && json_azuma;
    report_line(
        10,
        "deterministic artifacts",
        pass,
        &format!(
            "stats csv: {csv_runs}, curve csv: {csv_figure}, sweep json: {json_sweep}, tail json: {json_azuma}"
        ),
    );
}
