//! Optimal demand-aware congestion.
//!
//! `OPT(D)` is the optimum of the min-congestion multicommodity flow LP.
//! Commodities are aggregated by source: for each source `s` one flow ships
//! `Σ_j D_sj` out of `s` and delivers `D_sj` at every `j`. Each link carries a
//! pair of nonnegative directed variables per source, and the capacity row is
//! `Σ_s (f⁺ + f⁻) <= θ · c(e)`. This has the same optimum as the per-pair
//! formulation with `n` times fewer variables.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use super::demand::DemandMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptConfig {
    pub tol: f64,
    pub max_n: usize,
    pub max_links: usize,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_n: 24,
            max_links: 80,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptMethod {
    LpExact,
    DegreeLowerBound,
}

/// Net flow of one source's aggregated commodity, signed by the link's
/// `u < v` orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceFlow {
    pub source: usize,
    pub link_flow: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub value: f64,
    pub method: OptMethod,
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Vec<SourceFlow>>,
}

impl OptResult {
    /// Re-checks the certificate: conservation residual and the congestion
    /// it actually achieves. Returns `(max residual, achieved congestion)`.
    pub fn verify(&self, g: &Graph, d: &DemandMatrix) -> Result<(f64, f64)> {
        let cert = self.certificate.as_ref().ok_or_else(|| {
            Error::InvalidParameter("lower-bound results carry no certificate".into())
        })?;
        let n = g.n();
        let mut residual: f64 = 0.0;
        let mut load = vec![0.0; g.link_count()];
        for sf in cert {
            let mut net_out = vec![0.0; n];
            for (id, link) in g.links().iter().enumerate() {
                let f = sf.link_flow[id];
                net_out[link.u] += f;
                net_out[link.v] -= f;
                load[id] += f.abs();
            }
            for (x, out) in net_out.iter().enumerate() {
                let want = if x == sf.source {
                    d.row_sum(x)
                } else {
                    -d.get(sf.source, x)
                };
                residual = residual.max((out - want).abs());
            }
        }
        let achieved = g
            .links()
            .iter()
            .zip(&load)
            .map(|(l, f)| f / l.cap)
            .fold(0.0, f64::max);
        Ok((residual, achieved))
    }
}

/// `max_i max(Σ_z D_iz, Σ_z D_zi) / d_i`, with `d_i` over real links.
pub fn opt_lower_bound_degree(g: &Graph, d: &DemandMatrix) -> Result<f64> {
    d.require_size(g.n())?;
    Ok((0..g.n())
        .map(|i| {
            let deg = g.link_degree(i);
            if deg > 0.0 {
                d.row_sum(i).max(d.col_sum(i)) / deg
            } else if d.row_sum(i) + d.col_sum(i) > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max))
}

/// Solves the min-congestion LP exactly.
pub fn opt_congestion(g: &Graph, d: &DemandMatrix, config: &OptConfig) -> Result<OptResult> {
    g.require_connected()?;
    d.require_size(g.n())?;
    if g.n() > config.max_n || g.link_count() > config.max_links {
        return Err(Error::LpBudget {
            n: g.n(),
            edges: g.link_count(),
            max_n: config.max_n,
            max_edges: config.max_links,
        });
    }
    let n = g.n();
    let sources: Vec<usize> = (0..n).filter(|&s| d.row_sum(s) > 0.0).collect();
    if sources.is_empty() {
        return Ok(OptResult {
            value: 0.0,
            method: OptMethod::LpExact,
            tol: config.tol,
            certificate: Some(Vec::new()),
        });
    }

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let theta = lp.add_var(1.0, (0.0, f64::INFINITY));
    let m = g.link_count();
    // vars[s][id] = (u -> v, v -> u)
    let vars: Vec<Vec<_>> = sources
        .iter()
        .map(|_| {
            (0..m)
                .map(|_| {
                    (
                        lp.add_var(0.0, (0.0, f64::INFINITY)),
                        lp.add_var(0.0, (0.0, f64::INFINITY)),
                    )
                })
                .collect()
        })
        .collect();

    for (si, &s) in sources.iter().enumerate() {
        // The source row is implied by the others.
        for x in (0..n).filter(|&x| x != s) {
            let terms: Vec<_> = g
                .neighbors(x)
                .iter()
                .flat_map(|&(_, id)| {
                    let (fwd, bwd) = vars[si][id];
                    let sign = if g.links()[id].u == x { 1.0 } else { -1.0 };
                    [(fwd, sign), (bwd, -sign)]
                })
                .collect();
            lp.add_constraint(terms.as_slice(), ComparisonOp::Eq, -d.get(s, x));
        }
    }
    for (id, link) in g.links().iter().enumerate() {
        let mut terms: Vec<_> = vars
            .iter()
            .flat_map(|per_source| [(per_source[id].0, 1.0), (per_source[id].1, 1.0)])
            .collect();
        terms.push((theta, -link.cap));
        lp.add_constraint(terms.as_slice(), ComparisonOp::Le, 0.0);
    }

    let solution = lp
        .solve()
        .map_err(|e| Error::Lp(e.to_string()))?
        .into_solution()
        .map_err(|e| Error::Lp(format!("{:?}", e.termination_reason())))?;
    let certificate = sources
        .iter()
        .enumerate()
        .map(|(si, &s)| SourceFlow {
            source: s,
            link_flow: vars[si]
                .iter()
                .map(|&(f, b)| solution.var_value(f) - solution.var_value(b))
                .collect(),
        })
        .collect();
    Ok(OptResult {
        value: solution.objective(),
        method: OptMethod::LpExact,
        tol: config.tol,
        certificate: Some(certificate),
    })
}

/// The LP optimum when the instance fits the budget, otherwise the degree
/// lower bound (marked as such).
pub fn opt_or_lower_bound(g: &Graph, d: &DemandMatrix, config: &OptConfig) -> Result<OptResult> {
    match opt_congestion(g, d, config) {
        Err(Error::LpBudget { .. }) => Ok(OptResult {
            value: opt_lower_bound_degree(g, d)?,
            method: OptMethod::DegreeLowerBound,
            tol: config.tol,
            certificate: None,
        }),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::demand::{demands, DemandKind};
    use crate::generators::{complete, cycle, grid};
    use crate::graph::{build_graph, Capacity};

    fn cfg() -> OptConfig {
        OptConfig::default()
    }

    #[test]
    fn single_edge() {
        let g = complete(2).unwrap();
        let d = DemandMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let r = opt_congestion(&g, &d, &cfg()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn c4_opposite_pair_splits() {
        let g = cycle(4).unwrap();
        let mut d = DemandMatrix::zeros(4);
        d.set(0, 2, 1.0).unwrap();
        let r = opt_congestion(&g, &d, &cfg()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-6, "{}", r.value);
        let (res, achieved) = r.verify(&g, &d).unwrap();
        assert!(res < 1e-6);
        assert!(achieved <= r.value + 1e-6);
    }

    #[test]
    fn adjacency_demand_needs_two() {
        for g in [complete(4).unwrap(), cycle(5).unwrap()] {
            let d = demands(&g, &DemandKind::Adjacency).unwrap();
            let r = opt_congestion(&g, &d, &cfg()).unwrap();
            assert!((r.value - 2.0).abs() < 1e-6, "{}", r.value);
            assert!((opt_lower_bound_degree(&g, &d).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_demand() {
        let g = cycle(5).unwrap();
        let d = DemandMatrix::zeros(5);
        assert_eq!(opt_congestion(&g, &d, &cfg()).unwrap().value, 0.0);
        assert_eq!(opt_lower_bound_degree(&g, &d).unwrap(), 0.0);
    }

    #[test]
    fn degree_bound_arithmetic() {
        let one = Capacity::from_integer(1);
        let g = build_graph(&[(0, 1, one), (0, 2, one)]).unwrap();
        let mut d = DemandMatrix::zeros(3);
        d.set(0, 1, 5.0).unwrap();
        assert!(opt_lower_bound_degree(&g, &d).unwrap() >= 2.5);
    }

    #[test]
    fn budget_enforced_and_fallback_marked() {
        let g = grid(5, 5).unwrap();
        let d = demands(&g, &DemandKind::Adjacency).unwrap();
        assert!(matches!(
            opt_congestion(&g, &d, &cfg()),
            Err(Error::LpBudget { .. })
        ));
        let r = opt_or_lower_bound(&g, &d, &cfg()).unwrap();
        assert_eq!(r.method, OptMethod::DegreeLowerBound);
        assert!(r.certificate.is_none());
    }

    #[test]
    fn capacities_scale_the_optimum() {
        let g = build_graph(&[(0, 1, Capacity::from_integer(4))]).unwrap();
        let d = DemandMatrix::from_rows(&[vec![0.0, 2.0], vec![1.0, 0.0]]).unwrap();
        let r = opt_congestion(&g, &d, &cfg()).unwrap();
        assert!((r.value - 0.75).abs() < 1e-6);
    }
}
