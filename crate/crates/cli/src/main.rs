//! Command-line front end: closed-form rate tables, seeded protocol
//! simulation, inequality verification sweeps, curve-table emission,
//! and the concentration experiment. Identical invocations with
//! identical seeds produce byte-identical artifacts.

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use erasurelab_core as core;
use erasurelab_core::{
    azuma_tail_check, default_grid, ebit_supply, figure1_data, figure_csv, martingale_run,
    net_rate, new_lower_bound, run_protocol, run_rng, run_stats_csv, sub1_inequality,
    sub2_inequality, theorem1_audit, to_json, AuditReport, ChannelConfig, EntropyInequality,
    InequalityReport, InfoSchedule, MartingaleTrace, NamedCheck, ProtocolKind, RunStats, Session,
    Strategy, SuiteSummary, MIN_AZUMA_TRACES, PART_PROFILES,
};

/// Exact simulator and analysis toolkit for qubit erasure channels
/// with classical feedback.
#[derive(Parser)]
#[command(name = "erasurelab", version, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form rates, optionally next to Monte Carlo estimates.
    Rates(RatesArgs),
    /// Run a protocol over a sampled channel and emit run statistics.
    Simulate(SimulateArgs),
    /// Sweep an inequality suite and report violations.
    Verify(VerifyArgs),
    /// Emit the bound-curve table as CSV.
    Bounds(BoundsArgs),
    /// Run the bounded-increment concentration experiment.
    Martingale(MartingaleArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Sub1,
    Sub2,
    Auto,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Strategy {
        match s {
            StrategyArg::Sub1 => Strategy::Sub1,
            StrategyArg::Sub2 => Strategy::Sub2,
            StrategyArg::Auto => Strategy::Auto,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Lemma1,
    Fannes,
    Distance,
    Theorem1,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScheduleArg {
    /// Constant information value 2 every step.
    WorstCase,
    /// Values harvested from a small checkpointed run.
    Harvested,
}

#[derive(Args)]
struct RatesArgs {
    /// Erasure probability; repeat for several table rows.
    #[arg(long = "p", required = true, num_args = 1..)]
    p: Vec<f64>,
    #[arg(long, value_enum, default_value = "auto")]
    strategy: StrategyArg,
    /// Also simulate this many messages per row.
    #[arg(long, requires = "seed")]
    messages: Option<u64>,
    /// Base seed for the optional simulation.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Erasure probability.
    #[arg(long, conflicts_with = "config")]
    p: Option<f64>,
    #[arg(long)]
    messages: u64,
    #[arg(long, value_enum, default_value = "auto")]
    strategy: StrategyArg,
    /// Seed for channel outcomes and message content.
    #[arg(long, conflicts_with = "config")]
    seed: Option<u64>,
    /// TOML channel config (p, seed, optional max_retransmits),
    /// replacing the --p and --seed flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    /// Random samples per check.
    #[arg(long)]
    samples: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    /// Number of uniform grid points on [0, 1].
    #[arg(long, default_value_t = 1001)]
    grid_points: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MartingaleArgs {
    #[arg(long)]
    p: f64,
    /// Steps per trial.
    #[arg(long)]
    n: u64,
    /// Deviation scale; the tail event is |Y_n| >= k n.
    #[arg(long)]
    k: f64,
    #[arg(long)]
    trials: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value = "worst-case")]
    schedule: ScheduleArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Invalid argument values detected past clap's structural checks.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    init_thread_pool()?;
    match cli.command {
        Command::Rates(args) => cmd_rates(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Martingale(args) => cmd_martingale(args),
    }
}

/// Applies the optional ERASURELAB_THREADS cap before any parallel
/// section runs. Aggregates stay deterministic at any thread count;
/// the cap only limits concurrency.
fn init_thread_pool() -> Result<()> {
    if let Ok(raw) = std::env::var("ERASURELAB_THREADS") {
        let n: usize = raw
            .parse()
            .map_err(|_| usage(format!("ERASURELAB_THREADS must be a positive integer, got {raw:?}")))?;
        if n == 0 {
            return Err(usage("ERASURELAB_THREADS must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("thread pool already initialized")?;
    }
    Ok(())
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, content)
            .with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(usage(format!("probability {p} is outside [0, 1]")));
    }
    Ok(())
}

/// Closed-form net rate of one strategy at one erasure probability.
fn closed_form_rate(strategy: Strategy, p: f64) -> Result<f64> {
    let rate = match strategy {
        Strategy::Auto => new_lower_bound(p)?,
        Strategy::Sub1 => net_rate(&sub1_inequality(p)?, &ebit_supply(p)?)?,
        Strategy::Sub2 => net_rate(&sub2_inequality(p)?, &ebit_supply(p)?)?,
    };
    Ok(rate)
}

fn cmd_rates(args: RatesArgs) -> Result<Outcome> {
    for &p in &args.p {
        check_probability(p)?;
        if p == 1.0 && args.strategy != StrategyArg::Auto {
            return Err(usage("p = 1 delivers nothing; no per-strategy rate exists"));
        }
    }
    if args.messages == Some(0) {
        return Err(usage("--messages must be at least 1"));
    }
    let strategy: Strategy = args.strategy.into();
    let simulate = args.messages.map(|m| (m, args.seed.unwrap_or(0)));
    let mut out = String::new();
    out.push_str(if simulate.is_some() {
        "p,strategy,closed_form,empirical_rate\n"
    } else {
        "p,strategy,closed_form\n"
    });
    for (i, &p) in args.p.iter().enumerate() {
        let closed = closed_form_rate(strategy, p)?;
        let kind = strategy.resolve(p);
        match simulate {
            None => out.push_str(&format!(
                "{},{},{}\n",
                core::sig12(p),
                kind.as_str(),
                core::sig12(closed)
            )),
            Some((messages, seed)) => {
                let cfg = ChannelConfig::new(p, core::DEFAULT_MAX_RETRANSMITS, seed)?;
                let report = core::run_protocol_indexed(&cfg, messages, strategy, i as u64)?;
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    core::sig12(p),
                    kind.as_str(),
                    core::sig12(closed),
                    core::sig12(report.stats.empirical_rate)
                ));
            }
        }
    }
    emit(&args.out, &out)?;
    Ok(Outcome::Pass)
}

/// Everything a simulation run reports besides the raw trace.
#[derive(Serialize)]
struct SimulateArtifact {
    stats: RunStats,
    min_fidelity: f64,
    bookkeeping_fidelity: f64,
    final_pool: i64,
    ledger: core::ResourceLedger,
}

fn cmd_simulate(args: SimulateArgs) -> Result<Outcome> {
    let cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            ChannelConfig::from_toml_str(&text).map_err(|e| usage(e.to_string()))?
        }
        None => {
            let p = args.p.ok_or_else(|| usage("either --p or --config is required"))?;
            let seed = args
                .seed
                .ok_or_else(|| usage("either --seed or --config is required"))?;
            check_probability(p)?;
            ChannelConfig::new(p, core::DEFAULT_MAX_RETRANSMITS, seed)
                .map_err(|e| usage(e.to_string()))?
        }
    };
    if cfg.p == 1.0 {
        return Err(usage("p = 1 delivers nothing; simulation cannot progress"));
    }
    if args.messages == 0 {
        return Err(usage("--messages must be at least 1"));
    }
    let report = run_protocol(&cfg, args.messages, args.strategy.into())?;
    let artifact = SimulateArtifact {
        stats: report.stats.clone(),
        min_fidelity: report.min_fidelity,
        bookkeeping_fidelity: report.bookkeeping_fidelity,
        final_pool: report.final_pool,
        ledger: report.ledger,
    };
    let content = match args.format {
        Format::Json => to_json(&artifact),
        Format::Csv => run_stats_csv(std::slice::from_ref(&report.stats)),
    };
    emit(&args.out, &content)?;
    if report.min_fidelity >= 1.0 - 1e-9 {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::Fail)
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<Outcome> {
    if args.samples == 0 {
        return Err(usage("--samples must be at least 1"));
    }
    let (content, pass) = match args.suite {
        Suite::Lemma1 => verify_lemma1(args.samples, args.seed)?,
        Suite::Fannes => verify_pair_sweep("fannes", core::fannes_pair_gap, args.samples, args.seed)?,
        Suite::Distance => {
            verify_pair_sweep("distance", core::distance_pair_gap, args.samples, args.seed)?
        }
        Suite::Theorem1 => verify_theorem1(args.samples, args.seed)?,
    };
    emit(&args.out, &content)?;
    Ok(if pass { Outcome::Pass } else { Outcome::Fail })
}

/// Sweeps all four inequalities over all part-size profiles. Samples
/// are drawn from per-index streams, so parallel evaluation collects
/// into index order before aggregating.
fn verify_lemma1(samples: u64, seed: u64) -> Result<(String, bool)> {
    let mut checks = Vec::new();
    for which in EntropyInequality::ALL {
        for profile in PART_PROFILES {
            let slacks: Vec<f64> = (0..samples)
                .into_par_iter()
                .map(|i| core::lemma1_sample_slack(which, profile, seed, i))
                .collect::<core::Result<_>>()?;
            checks.push(NamedCheck {
                name: format!(
                    "{}/{}-{}-{}",
                    which.as_str(),
                    profile.0,
                    profile.1,
                    profile.2
                ),
                result: InequalityReport::from_slacks(&slacks),
            });
        }
    }
    let pass = checks.iter().all(|c| c.result.violations == 0);
    let summary = SuiteSummary {
        suite: "lemma1".into(),
        seed,
        pass,
        checks,
    };
    Ok((to_json(&summary), pass))
}

fn verify_pair_sweep(
    name: &str,
    gap: fn(u64, u64) -> core::Result<f64>,
    samples: u64,
    seed: u64,
) -> Result<(String, bool)> {
    let slacks: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| gap(seed, i))
        .collect::<core::Result<_>>()?;
    let report = InequalityReport::from_slacks(&slacks);
    let pass = report.violations == 0;
    let summary = SuiteSummary {
        suite: name.into(),
        seed,
        pass,
        checks: vec![NamedCheck {
            name: name.into(),
            result: report,
        }],
    };
    Ok((to_json(&summary), pass))
}

/// Audits small lossless checkpointed runs: fixed direct transfers of
/// one and two pair halves, plus per-sample randomized single-message
/// runs of both subprotocols. Each randomized check reports the audit
/// with the least margin over its delivered-sum bound.
fn verify_theorem1(samples: u64, seed: u64) -> Result<(String, bool)> {
    let mut checks: Vec<NamedCheck<AuditReport>> = Vec::new();
    let cfg = ChannelConfig::new(0.0, core::DEFAULT_MAX_RETRANSMITS, seed)?;
    for m in [1_u64, 2] {
        let run = core::run_direct_transfer(&cfg, m)?;
        checks.push(NamedCheck {
            name: format!("direct-{m}"),
            result: theorem1_audit(&run.trace, m)?,
        });
    }
    for (name, kind) in [("sub1-random", ProtocolKind::Sub1), ("sub2-random", ProtocolKind::Sub2)] {
        let audits: Vec<AuditReport> = (0..samples)
            .into_par_iter()
            .map(|i| audit_single_message(kind, seed, i))
            .collect::<core::Result<_>>()?;
        let worst = audits
            .iter()
            .copied()
            .reduce(|best, next| {
                let margin =
                    |r: &AuditReport| r.sum_delivered - r.delivered_lower_bound;
                if margin(&next) < margin(&best) {
                    next
                } else {
                    best
                }
            })
            .expect("samples >= 1");
        let all_pass = audits.iter().all(|r| r.pass);
        checks.push(NamedCheck {
            name: name.into(),
            result: AuditReport {
                pass: all_pass,
                ..worst
            },
        });
    }
    let pass = checks.iter().all(|c| c.result.pass);
    let summary = SuiteSummary {
        suite: "theorem1".into(),
        seed,
        pass,
        checks,
    };
    Ok((to_json(&summary), pass))
}

/// One lossless single-message run with a random message, checkpointed
/// and audited. Stream `index` of the seed fixes the message content.
fn audit_single_message(kind: ProtocolKind, seed: u64, index: u64) -> core::Result<AuditReport> {
    let mut rng = run_rng(seed, index);
    let psi = core::random_pure_state_with(
        vec![core::SystemLabel::fresh(core::Party::Alice)],
        &mut rng,
    )?;
    let script = match kind {
        ProtocolKind::Sub1 => vec![true, true],
        _ => vec![true],
    };
    let mut session = Session::scripted(script, core::DEFAULT_MAX_RETRANSMITS);
    session.enable_snapshots();
    match kind {
        ProtocolKind::Sub1 => session.subprotocol1_send(&psi)?,
        _ => session.subprotocol2_send(&psi)?,
    };
    theorem1_audit(session.trace(), 1)
}

fn cmd_bounds(args: BoundsArgs) -> Result<Outcome> {
    if args.grid_points < 2 {
        return Err(usage("--grid-points must be at least 2"));
    }
    let grid: Vec<f64> = if args.grid_points == 1001 {
        default_grid()
    } else {
        let last = (args.grid_points - 1) as f64;
        (0..args.grid_points).map(|i| i as f64 / last).collect()
    };
    let rows = figure1_data(&grid)?;
    emit(&args.out, &figure_csv(&rows))?;
    Ok(Outcome::Pass)
}

fn cmd_martingale(args: MartingaleArgs) -> Result<Outcome> {
    check_probability(args.p)?;
    if args.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    if !(args.k > 0.0) || !args.k.is_finite() {
        return Err(usage("--k must be a positive finite number"));
    }
    if (args.trials as usize) < MIN_AZUMA_TRACES {
        return Err(usage(format!(
            "--trials must be at least {MIN_AZUMA_TRACES} for a meaningful tail estimate"
        )));
    }
    let schedule = match args.schedule {
        ScheduleArg::WorstCase => InfoSchedule::WorstCase,
        ScheduleArg::Harvested => harvest_schedule()?,
    };
    let traces: Vec<MartingaleTrace> = (0..args.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = run_rng(args.seed, t);
            martingale_run(args.p, args.n, 1, &schedule, &mut rng)
        })
        .collect::<core::Result<_>>()?;
    let report = azuma_tail_check(&traces, args.k)?;
    emit(&args.out, &to_json(&report))?;
    Ok(if report.pass { Outcome::Pass } else { Outcome::Fail })
}

/// Information values for the harvested schedule, taken from one
/// lossless checkpointed run of each subprotocol on a message that is
/// half of a shared pair.
fn harvest_schedule() -> Result<InfoSchedule> {
    let mut values = Vec::new();
    for kind in [ProtocolKind::Sub1, ProtocolKind::Sub2] {
        let pair = core::make_bell_with(
            core::SystemLabel::fresh(core::Party::Alice),
            core::SystemLabel::fresh(core::Party::Reference),
        );
        let script = match kind {
            ProtocolKind::Sub1 => vec![true, true],
            _ => vec![true],
        };
        let mut session = Session::scripted(script, core::DEFAULT_MAX_RETRANSMITS);
        session.enable_snapshots();
        match kind {
            ProtocolKind::Sub1 => session.subprotocol1_send(&pair)?,
            _ => session.subprotocol2_send(&pair)?,
        };
        let InfoSchedule::Harvested(mut vals) = InfoSchedule::from_trace(session.trace())? else {
            unreachable!("from_trace always harvests");
        };
        values.append(&mut vals);
    }
    Ok(InfoSchedule::harvested(values)?)
}
