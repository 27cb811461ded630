//! Experiment runners and machine-readable reports.
//!
//! All randomness is derived from a master seed through per-cell keys, so
//! reports are byte-identical across runs and thread counts.

pub mod attack;
pub mod benchmark;
pub mod concentration;
pub mod rejection;
pub mod report;
pub mod structure;

pub use report::{Cell, ExperimentReport, ReportFormat};

/// sqrt(p(1−p)/n)
pub fn binomial_se(p: f64, trials: usize) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / trials as f64).max(0.0).sqrt()
}
