//! Step-by-step congestion of the sequential scheme and of the plain walk.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::policy::SequentialTrace;
use crate::error::{Error, Result};
use crate::eval::demand::DemandMatrix;
use crate::graph::Graph;
use crate::spectral::TransitionMatrix;

fn to_congestion(g: &Graph, traf: &mut DMatrix<f64>) {
    let n = g.n();
    for x in 0..n {
        for y in 0..n {
            traf[(x, y)] = if x != y && g.link_between(x, y).is_some() {
                traf[(x, y)] / g.capacity(x, y)
            } else {
                0.0
            };
        }
    }
}

/// `CONG_D^{(s)}(x, y) = TRAF_D^{(s)}(x, y) / c(x, y)` for `s = 1 .. 2k`,
/// where `TRAF_D^{(s)} = Σ_ij (D_ij v_ij^{(s-1)}) * M_ij^{(s)}`. Loop
/// entries are zero.
pub fn sequential_congestion(
    g: &Graph,
    d: &DemandMatrix,
    traces: &BTreeMap<(usize, usize), SequentialTrace>,
) -> Result<Vec<DMatrix<f64>>> {
    let n = g.n();
    d.require_size(n)?;
    let steps = traces.values().next().map_or(0, |t| t.steps());
    let mut out = vec![DMatrix::zeros(n, n); steps];
    for (i, j, dij) in d.entries() {
        let t = traces
            .get(&(i, j))
            .ok_or_else(|| Error::TraceMismatch(format!("no trace for pair ({i}, {j})")))?;
        if t.steps() != steps || t.vectors.iter().any(|v| v.len() != n) {
            return Err(Error::TraceMismatch(format!(
                "trace ({i}, {j}) does not fit a graph on {n} vertices with {steps} steps"
            )));
        }
        for (s, op) in t.operators.iter().enumerate() {
            let m = op.matrix();
            if m.nrows() != n {
                return Err(Error::TraceMismatch(
                    "operator size differs from graph".into(),
                ));
            }
            for x in 0..n {
                let vx = dij * t.vectors[s][x];
                if vx != 0.0 {
                    for y in 0..n {
                        out[s][(x, y)] += vx * m[(x, y)];
                    }
                }
            }
        }
    }
    for traf in &mut out {
        to_congestion(g, traf);
    }
    Ok(out)
}

/// `RW-CONG_v^{(s)}(x, y) = (v A^{s-1})_x A_xy / c(x, y)` for `s = 1 .. steps`.
pub fn rw_congestion(v: &[f64], g: &Graph, steps: usize) -> Result<Vec<DMatrix<f64>>> {
    let n = g.n();
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.len(),
        });
    }
    if let Some((index, &value)) = v.iter().enumerate().find(|(_, x)| !(**x >= 0.0)) {
        return Err(Error::NegativeEntry { index, value });
    }
    let a = TransitionMatrix::new(g)?;
    let mut cur = v.to_vec();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut traf = DMatrix::zeros(n, n);
        for x in 0..n {
            for &(y, _) in g.neighbors(x) {
                traf[(x, y)] = cur[x] * a.get(x, y);
            }
        }
        to_congestion(g, &mut traf);
        out.push(traf);
        cur = a.apply(&cur)?;
    }
    Ok(out)
}

/// Largest entry over all steps, with the (1-based) step attaining it first.
pub fn peak_step(per_step: &[DMatrix<f64>]) -> (f64, usize) {
    let mut best = (0.0, 1);
    for (s, m) in per_step.iter().enumerate() {
        let v = m.max();
        if v > best.0 {
            best = (v, s + 1);
        }
    }
    best
}
