//! Exact simulator and analysis toolkit for qubit erasure channels with
//! classical feedback.

pub mod bounds;
pub mod channel;
pub mod density;
pub mod error;
pub mod infotheory;
pub mod ledger;
pub mod protocol;
pub mod report;
pub mod state;

pub use bounds::{
    azuma_tail_check, capacity_reference, default_grid, figure1_data, martingale_run,
    new_lower_bound, new_upper_bound, prior_bounds, separation_certificate, AzumaReport,
    BoundCurvePoint, InfoSchedule, MartingaleTrace, SeparationReport, MIN_AZUMA_TRACES,
};
pub use channel::{
    expected_uses_per_success, run_rng, ChannelConfig, ErasureChannel, TransmitOutcome,
    DEFAULT_MAX_RETRANSMITS,
};
pub use density::{fidelity, trace_distance, DensityOp};
pub use error::{Error, Result};
pub use infotheory::{
    distance_fidelity_sweep, distance_pair_gap, fannes_gap, fannes_pair_gap, fannes_sweep,
    fidelity_distance_gap, lemma1_sample_slack, lemma1_slack, lemma1_sweep, per_use_information,
    random_tripartite, theorem1_audit, AuditReport, EntropyInequality, InequalityReport,
    TripartiteSample, FANNES_WINDOW, PART_PROFILES, SLACK_TOL,
};
pub use ledger::{
    ebit_supply, ledger_reconcile, net_rate, sub1_inequality, sub2_inequality, ResourceInequality,
    ResourceLedger, ResourceVector,
};
pub use report::{
    figure_csv, run_stats_csv, sig12, to_json, NamedCheck, SuiteSummary, FIGURE_CSV_HEADER,
    STATS_CSV_HEADER,
};
pub use protocol::{
    bell_measure_decode, run_direct_transfer, run_protocol, run_protocol_indexed, DirectRun,
    FidelityReport, MessageOutcome, PerMessage, ProtocolKind, ProtocolTrace, RunReport, RunStats,
    Session, Snapshot, Strategy,
};
pub use state::{
    make_bell, make_bell_with, make_ghz, make_ghz_with, prepare_message, prepare_message_with,
    random_pure_state, random_pure_state_with, Gate, LabeledState, Party, RegId, SystemLabel,
    NORM_TOL, QUBIT_CAP,
};
