//! Experiment driver for the surface-aided positioning bounds: sweep
//! evaluation with CSV output and a text summarizer for the results.

pub mod report;
pub mod sweep;

pub use report::{report_summary, summarize_text, ReportError};
pub use sweep::{
    default_snr_grid, evaluate_sweep, run_sweep, PhaseMode, SweepError, SweepKind, SweepOutcome,
    SweepRow, SweepSpec, CSV_HEADER,
};
