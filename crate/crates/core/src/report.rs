//! Deterministic text emission: fixed column orders, fixed float
//! formatting at 12 significant digits, '\n' line endings and no
//! locale dependence, so identical inputs yield byte-identical files.

use serde::Serialize;

use crate::bounds::BoundCurvePoint;
use crate::protocol::RunStats;

/// Formats a float with 12 significant digits in scientific notation.
pub fn sig12(x: f64) -> String {
    format!("{:.11e}", x)
}

/// Header of the curve table.
pub const FIGURE_CSV_HEADER: &str =
    "p,q_unassisted,q2,prior_lower,prior_upper,new_lower,new_upper";

/// Renders the curve table as CSV, one row per grid point.
pub fn figure_csv(rows: &[BoundCurvePoint]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(FIGURE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let cols = [
            r.p,
            r.q_unassisted,
            r.q2,
            r.prior_lower,
            r.prior_upper,
            r.new_lower,
            r.new_upper,
        ];
        let row: Vec<String> = cols.iter().map(|&x| sig12(x)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Header of the run-statistics table.
pub const STATS_CSV_HEADER: &str =
    "p,strategy,messages,channel_uses,empirical_rate,mean_fidelity,seed";

/// Renders run statistics as CSV, one row per run.
pub fn run_stats_csv(rows: &[RunStats]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(STATS_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            sig12(r.p),
            r.strategy,
            r.messages,
            r.channel_uses,
            sig12(r.empirical_rate),
            sig12(r.mean_fidelity),
            r.seed
        ));
    }
    out
}

/// One named check inside a verification summary.
#[derive(Debug, Clone, Serialize)]
pub struct NamedCheck<T: Serialize> {
    pub name: String,
    pub result: T,
}

/// Verification run over one suite, with checks in a fixed order.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteSummary<T: Serialize> {
    pub suite: String,
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<NamedCheck<T>>,
}

/// Pretty JSON with a trailing newline. Struct fields serialize in
/// declaration order, so output bytes are a pure function of the
/// value.
pub fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value)
        .unwrap_or_else(|e| format!("{{\"serialization_error\":\"{e}\"}}"));
    s.push('\n');
    s
}
