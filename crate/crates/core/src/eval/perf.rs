//! Performance-ratio estimation over a finite demand suite.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::demand::DemandMatrix;
use super::opt::{opt_congestion, OptConfig};
use super::report::{ratio, CongestionReport};
use crate::error::Result;
use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub cong: f64,
    pub opt: f64,
    pub ratio: f64,
}

/// `max_D CONG(D, r) / OPT(D)` over a suite. This is a lower estimate of the
/// true supremum over all demands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub ratio: f64,
    pub witness: Option<usize>,
    pub entries: Vec<SuiteEntry>,
    pub lower_estimate: bool,
}

/// `congestion` evaluates the policy under test on one demand matrix; `OPT`
/// is solved exactly on `g`.
pub fn performance_ratio<F>(
    g: &Graph,
    suite: &[DemandMatrix],
    congestion: F,
    config: &OptConfig,
) -> Result<PerformanceReport>
where
    F: Fn(&DemandMatrix) -> Result<CongestionReport> + Sync,
{
    let entries = suite
        .par_iter()
        .map(|d| {
            let cong = congestion(d)?.max;
            let opt = opt_congestion(g, d, config)?.value;
            Ok(SuiteEntry {
                cong,
                opt,
                ratio: ratio(cong, opt)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0.0;
    let mut witness = None;
    for (i, e) in entries.iter().enumerate() {
        if witness.is_none() || e.ratio > best {
            best = e.ratio;
            witness = Some(i);
        }
    }
    Ok(PerformanceReport {
        ratio: best,
        witness,
        entries,
        lower_estimate: true,
    })
}
