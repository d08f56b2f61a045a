//! Detection metrics, calibration, FLOPs and the pair-coverage bound.

mod calibration;
mod coverage;
mod flops;
mod metrics;

pub use calibration::{calibration_curve, CalibrationBin, CalibrationCurve};
pub use coverage::{
    coverage_bound, coverage_bound_exact, coverage_bound_with, coverage_mc, coverage_mc_curve,
    CoverageBound, ExactCoverageBound, S2Form,
};
pub use flops::{baseline_complexity, flops_dnn, ComplexityDescriptor, FlopsBreakdown};
pub use metrics::{compute_auc, compute_metrics, compute_metrics_with_scores, detect, Detection, MetricsReport};
