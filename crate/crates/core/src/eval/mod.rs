//! Evaluation tools: demands, the `OPT` oracle, congestion reports,
//! performance ratios and tail-frequency checks.

pub mod chernoff;
pub mod demand;
pub mod opt;
pub mod perf;
pub mod report;

pub use chernoff::{chernoff_check, ChernoffReport};
pub use demand::{demands, random_permutation, validate_permutation, DemandKind, DemandMatrix};
pub use opt::{
    opt_congestion, opt_lower_bound_degree, opt_or_lower_bound, OptConfig, OptMethod, OptResult,
};
pub use perf::{performance_ratio, PerformanceReport};
pub use report::{CongestionReport, LinkCongestion};
