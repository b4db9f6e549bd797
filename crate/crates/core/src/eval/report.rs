use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Load on one link (all parallel edges between `u` and `v`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkCongestion {
    pub u: usize,
    pub v: usize,
    pub capacity: f64,
    pub load: f64,
    pub congestion: f64,
}

/// Per-link congestion with its maximum, optionally compared with `OPT`.
///
/// Loops never appear: they carry no traffic between vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongestionReport {
    pub links: Vec<LinkCongestion>,
    pub max: f64,
    pub argmax: Option<(usize, usize)>,
    pub opt: Option<f64>,
    pub ratio: Option<f64>,
}

impl CongestionReport {
    /// `loads` is indexed by link id of `g`.
    pub fn from_loads(g: &Graph, loads: &[f64]) -> Self {
        let links: Vec<LinkCongestion> = g
            .links()
            .iter()
            .zip(loads)
            .map(|(l, &load)| LinkCongestion {
                u: l.u,
                v: l.v,
                capacity: l.cap,
                load,
                congestion: load / l.cap,
            })
            .collect();
        let mut max = 0.0;
        let mut argmax = None;
        for l in &links {
            if l.congestion > max {
                max = l.congestion;
                argmax = Some((l.u, l.v));
            }
        }
        Self {
            links,
            max,
            argmax,
            opt: None,
            ratio: None,
        }
    }

    pub fn congestion_of(&self, u: usize, v: usize) -> Option<f64> {
        let (u, v) = (u.min(v), u.max(v));
        self.links
            .iter()
            .find(|l| l.u == u && l.v == v)
            .map(|l| l.congestion)
    }

    /// Attaches `OPT` and the ratio `CONG / OPT` (zero when both vanish).
    pub fn with_opt(mut self, opt: f64) -> Result<Self> {
        self.ratio = Some(ratio(self.max, opt)?);
        self.opt = Some(opt);
        Ok(self)
    }
}

pub(crate) fn ratio(cong: f64, opt: f64) -> Result<f64> {
    if opt > 0.0 {
        Ok(cong / opt)
    } else if cong <= 1e-12 {
        Ok(0.0)
    } else {
        Err(Error::ZeroOptimum(cong))
    }
}
