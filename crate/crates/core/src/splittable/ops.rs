//! Dense matrix operators used to invert random-walk steps.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::spectral::{TransitionMatrix, STOCHASTIC_TOL};

/// A right-stochastic `n x n` operator applied at one step of the
/// sequential scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOperator(pub DMatrix<f64>);

impl StepOperator {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn max_row_sum_error(&self) -> f64 {
        self.0
            .row_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_right_stochastic(&self) -> bool {
        self.0.iter().all(|&x| x >= 0.0) && self.max_row_sum_error() <= STOCHASTIC_TOL
    }

    pub fn respects(&self, g: &Graph) -> bool {
        respects(&self.0, g)
    }

    /// `v M`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        vec_mat(v, &self.0)
    }
}

pub(crate) fn respects(m: &DMatrix<f64>, g: &Graph) -> bool {
    let n = m.nrows();
    (0..n).all(|x| (0..n).all(|y| m[(x, y)] == 0.0 || g.is_step(x, y)))
}

pub(crate) fn vec_mat(v: &[f64], m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if v.len() != m.nrows() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: v.len(),
        });
    }
    let mut out = vec![0.0; m.ncols()];
    for (x, &vx) in v.iter().enumerate() {
        if vx != 0.0 {
            for (y, o) in out.iter_mut().enumerate() {
                *o += vx * m[(x, y)];
            }
        }
    }
    Ok(out)
}

fn check_nonnegative(v: &[f64]) -> Result<()> {
    match v.iter().enumerate().find(|(_, x)| !(**x >= 0.0)) {
        Some((index, &value)) => Err(Error::NegativeEntry { index, value }),
        None => Ok(()),
    }
}

/// Divides each row by its sum; a zero row `x` falls back to the walk row
/// `A_x`.
pub fn row_norm(m: &DMatrix<f64>, g: &Graph) -> Result<DMatrix<f64>> {
    let n = g.n();
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.nrows().max(m.ncols()),
        });
    }
    if let Some((index, &value)) = m.iter().enumerate().find(|(_, x)| !(**x >= 0.0)) {
        return Err(Error::NegativeEntry { index, value });
    }
    let mut out = m.clone();
    for x in 0..n {
        let sum: f64 = m.row(x).sum();
        if sum != 0.0 {
            out.row_mut(x).iter_mut().for_each(|e| *e /= sum);
        } else {
            let d = g.degree(x);
            out.row_mut(x).fill(0.0);
            for &(y, id) in g.neighbors(x) {
                out[(x, y)] = g.links()[id].cap / d;
            }
            out[(x, x)] = g.self_loop_f64(x) / d;
        }
    }
    Ok(out)
}

/// `(v * M)_xy = v_x M_xy`.
pub fn pointwise_mul(v: &[f64], m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if v.len() != m.nrows() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: v.len(),
        });
    }
    let mut out = m.clone();
    for (x, &vx) in v.iter().enumerate() {
        out.row_mut(x).iter_mut().for_each(|e| *e *= vx);
    }
    Ok(out)
}

/// `row_norm((v * A)^T)`: right stochastic, supported on `g`, and undoes one
/// walk step from `v`, i.e. `v A M = v`.
pub fn reverse_operator(v: &[f64], a: &TransitionMatrix, g: &Graph) -> Result<StepOperator> {
    check_nonnegative(v)?;
    let flow = pointwise_mul(v, a.matrix())?;
    Ok(StepOperator(row_norm(&flow.transpose(), g)?))
}
