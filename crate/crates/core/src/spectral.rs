//! Random-walk operator, stationary distribution and spectral quantities.
//!
//! The transition matrix of a capacitated graph is `A_xy = c(x, y) / d_x`
//! (a loop at `x` contributes `A_xx`). It is similar to the symmetric matrix
//! `D^{1/2} A D^{-1/2}`, so its spectrum is real and is obtained with a dense
//! symmetric eigensolver.

use std::ops::Deref;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Eigenvalues within this distance of `±1` are reported as exactly `±1`.
pub const EIGEN_TOL: f64 = 1e-10;

/// Tolerance for row sums and probability mass.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// A nonnegative row vector indexed by vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DistributionVector(Vec<f64>);

impl DistributionVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0) || !v.is_finite())
        {
            return Err(Error::NegativeEntry { index, value });
        }
        Ok(Self(values))
    }

    /// Point mass at `x`.
    pub fn unit(n: usize, x: usize) -> Self {
        let mut v = vec![0.0; n];
        v[x] = 1.0;
        Self(v)
    }

    pub fn mass(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn is_probability(&self) -> bool {
        (self.mass() - 1.0).abs() <= STOCHASTIC_TOL
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl Deref for DistributionVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// `A_xy = c(x, y) / d_x`, including loops.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    matrix: DMatrix<f64>,
}

impl TransitionMatrix {
    pub fn new(g: &Graph) -> Result<Self> {
        let n = g.n();
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut matrix = DMatrix::zeros(n, n);
        for x in 0..n {
            let d = g.degree(x);
            if d <= 0.0 {
                // Isolated vertex: the graph is disconnected.
                return Err(Error::Disconnected);
            }
            for &(y, id) in g.neighbors(x) {
                matrix[(x, y)] = g.links()[id].cap / d;
            }
            matrix[(x, x)] = g.self_loop_f64(x) / d;
        }
        Ok(Self { matrix })
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.matrix[(x, y)]
    }

    /// `v A`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
        let mut out = vec![0.0; n];
        for (x, &vx) in v.iter().enumerate() {
            if vx == 0.0 {
                continue;
            }
            for (y, o) in out.iter_mut().enumerate() {
                *o += vx * self.matrix[(x, y)];
            }
        }
        Ok(out)
    }

    pub fn max_row_sum_error(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Nonzero only on links of `g` and on loops that `g` carries.
    pub fn respects(&self, g: &Graph) -> bool {
        let n = self.n();
        (0..n).all(|x| (0..n).all(|y| self.matrix[(x, y)] == 0.0 || g.is_step(x, y)))
    }
}

/// `π_x = d_x / Σ_y d_y`.
pub fn stationary_distribution(g: &Graph) -> Result<DistributionVector> {
    if g.n() == 0 {
        return Err(Error::EmptyGraph);
    }
    let total = g.total_degree();
    if total <= 0.0 {
        return Err(Error::Disconnected);
    }
    DistributionVector::new(g.degrees().iter().map(|d| d / total).collect())
}

/// Eigenvalues of the walk, in descending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub lambda2: f64,
    pub lambda_n: f64,
    /// `max(λ₂, |λₙ|)`.
    pub lambda: f64,
}

pub fn spectral(g: &Graph) -> Result<Spectrum> {
    g.require_connected()?;
    let n = g.n();
    let sqrt_d: Vec<f64> = g.degrees().iter().map(|d| d.sqrt()).collect();
    let mut s = DMatrix::zeros(n, n);
    for x in 0..n {
        for &(y, id) in g.neighbors(x) {
            s[(x, y)] = g.links()[id].cap / (sqrt_d[x] * sqrt_d[y]);
        }
        s[(x, x)] = g.self_loop_f64(x) / g.degree(x);
    }
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(s)
        .eigenvalues
        .iter()
        .map(|&l| snap_eigenvalue(l))
        .collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    let (lambda2, lambda_n) = if n == 1 {
        (0.0, 0.0)
    } else {
        (eigenvalues[1], eigenvalues[n - 1])
    };
    Ok(Spectrum {
        lambda: lambda2.max(lambda_n.abs()),
        eigenvalues,
        lambda2,
        lambda_n,
    })
}

fn snap_eigenvalue(l: f64) -> f64 {
    if (l - 1.0).abs() <= EIGEN_TOL || l > 1.0 {
        1.0
    } else if (l + 1.0).abs() <= EIGEN_TOL || l < -1.0 {
        -1.0
    } else {
        l
    }
}

/// Spectral summary of the graph a walk runs on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralProfile {
    pub pi: DistributionVector,
    pub pi_min: f64,
    pub pi_max: f64,
    pub lambda2: f64,
    pub lambda_n: f64,
    pub lambda: f64,
    /// `min(λ(G), λ(G'))` with `G'` the lazy graph.
    pub lambda_bar: f64,
    pub lazified: bool,
    /// Walk length: smallest `k >= 1` with `λ̄^k <= π_min / 2`.
    pub k: usize,
}

impl SpectralProfile {
    pub fn report(&self) -> SpectralReport {
        SpectralReport {
            lambda2: self.lambda2,
            lambda_n: self.lambda_n,
            lambda: self.lambda,
            lambda_bar: self.lambda_bar,
            lazified: self.lazified,
            pi_min: self.pi_min,
            pi_max: self.pi_max,
            k: self.k,
        }
    }
}

/// The serialized spectral report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub lambda2: f64,
    #[serde(rename = "lambdaN")]
    pub lambda_n: f64,
    pub lambda: f64,
    pub lambda_bar: f64,
    pub lazified: bool,
    pub pi_min: f64,
    pub pi_max: f64,
    pub k: usize,
}

/// Compares the walk on `g` with the lazy walk `(I + A) / 2` and keeps the
/// graph with strictly smaller generalized second eigenvalue.
pub fn lazify_if_needed(g: &Graph) -> Result<(Graph, SpectralProfile)> {
    g.require_connected()?;
    let plain = spectral(g)?;
    let lazy_graph = g.lazy()?;
    let lazy = spectral(&lazy_graph)?;
    let (chosen, spectrum, lazified) = if lazy.lambda < plain.lambda {
        (lazy_graph, lazy, true)
    } else {
        (g.clone(), plain, false)
    };
    let pi = stationary_distribution(&chosen)?;
    let (pi_min, pi_max) = (pi.min(), pi.max());
    let lambda_bar = spectrum.lambda;
    let k = mixing_steps(lambda_bar, pi_min)?;
    let profile = SpectralProfile {
        pi,
        pi_min,
        pi_max,
        lambda2: spectrum.lambda2,
        lambda_n: spectrum.lambda_n,
        lambda: spectrum.lambda,
        lambda_bar,
        lazified,
        k,
    };
    Ok((chosen, profile))
}

/// Smallest integer `k >= 1` with `λ̄^k <= π_min / 2`.
pub fn mixing_steps(lambda_bar: f64, pi_min: f64) -> Result<usize> {
    if !(lambda_bar < 1.0) || lambda_bar.is_nan() {
        return Err(Error::NoMixing(lambda_bar));
    }
    if !(pi_min > 0.0 && pi_min <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "pi_min must lie in (0, 1], got {pi_min}"
        )));
    }
    if lambda_bar <= 0.0 {
        return Ok(1);
    }
    let target = pi_min / 2.0;
    let mut k = ((target.ln() / lambda_bar.ln()).ceil() as usize).max(1);
    while k > 1 && lambda_bar.powi(k as i32 - 1) <= target {
        k -= 1;
    }
    while lambda_bar.powi(k as i32) > target {
        k += 1;
    }
    Ok(k)
}

/// `v A^steps`.
pub fn walk_power(v: &[f64], a: &TransitionMatrix, steps: usize) -> Result<DistributionVector> {
    let mut cur = v.to_vec();
    if cur.len() != a.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            got: cur.len(),
        });
    }
    for _ in 0..steps {
        cur = a.apply(&cur)?;
    }
    DistributionVector::new(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{complete, cycle, grid, hypercube, random_regular};
    use crate::graph::{build_graph, Capacity};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn stationary_examples() {
        let pi = stationary_distribution(&cycle(4).unwrap()).unwrap();
        assert!(pi.iter().all(|&p| close(p, 0.25, 1e-15)));

        let one = Capacity::from_integer(1);
        let star = build_graph(&[(0, 1, one), (0, 2, one), (0, 3, one)]).unwrap();
        let pi = stationary_distribution(&star).unwrap();
        assert!(close(pi[0], 0.5, 1e-15));
        assert!(pi[1..].iter().all(|&p| close(p, 1.0 / 6.0, 1e-15)));

        let path = build_graph(&[(0, 1, Capacity::from_integer(2)), (1, 2, one)]).unwrap();
        let pi = stationary_distribution(&path).unwrap();
        let want = [2.0 / 6.0, 3.0 / 6.0, 1.0 / 6.0];
        for (p, w) in pi.iter().zip(want) {
            assert!(close(*p, w, 1e-15));
        }
    }

    #[test]
    fn empty_graph_rejected() {
        let g = Graph::new(0, &[]).unwrap();
        assert!(matches!(
            stationary_distribution(&g),
            Err(Error::EmptyGraph)
        ));
    }

    // Closed-form spectra: K_n has {1, -1/(n-1) x (n-1)}, C_n has cos(2πj/n).
    #[test]
    fn complete_graph_spectrum() {
        let s = spectral(&complete(4).unwrap()).unwrap();
        assert!(close(s.eigenvalues[0], 1.0, 1e-12));
        for &l in &s.eigenvalues[1..] {
            assert!(close(l, -1.0 / 3.0, 1e-10));
        }
        assert!(close(s.lambda, 1.0 / 3.0, 1e-10));
    }

    #[test]
    fn cycle_and_k2_spectrum() {
        let s = spectral(&cycle(4).unwrap()).unwrap();
        let want = [1.0, 0.0, 0.0, -1.0];
        for (l, w) in s.eigenvalues.iter().zip(want) {
            assert!(close(*l, w, 1e-10), "{:?}", s.eigenvalues);
        }
        assert_eq!(s.lambda, 1.0);

        let k2 = complete(2).unwrap();
        let s = spectral(&k2).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, -1.0]);
        assert_eq!(s.lambda, 1.0);
    }

    #[test]
    fn spectrum_matches_cosines_on_c7() {
        let s = spectral(&cycle(7).unwrap()).unwrap();
        let mut want: Vec<f64> = (0..7)
            .map(|j| (2.0 * std::f64::consts::PI * j as f64 / 7.0).cos())
            .collect();
        want.sort_by(|a, b| b.total_cmp(a));
        for (l, w) in s.eigenvalues.iter().zip(want) {
            assert!(close(*l, w, 1e-10));
        }
    }

    #[test]
    fn disconnected_rejected() {
        let one = Capacity::from_integer(1);
        let g = Graph::new(4, &[(0, 1, one), (2, 3, one)]).unwrap();
        assert!(matches!(spectral(&g), Err(Error::Disconnected)));
        assert!(matches!(lazify_if_needed(&g), Err(Error::Disconnected)));
    }

    #[test]
    fn lazification_choices() {
        let (g, p) = lazify_if_needed(&cycle(4).unwrap()).unwrap();
        assert!(p.lazified && g.has_self_loops());
        assert!(close(p.lambda_bar, 0.5, 1e-10));

        let (g, p) = lazify_if_needed(&complete(4).unwrap()).unwrap();
        assert!(!p.lazified && !g.has_self_loops());
        assert!(close(p.lambda_bar, 1.0 / 3.0, 1e-10));

        // Lazy K2 has eigenvalues {1, 0}.
        let (_, p) = lazify_if_needed(&complete(2).unwrap()).unwrap();
        assert!(p.lazified);
        assert!(p.lambda_bar.abs() < 1e-10);
        assert_eq!(p.k, 1);
    }

    #[test]
    fn mixing_step_examples() {
        assert_eq!(mixing_steps(0.5, 1.0 / 8.0).unwrap(), 4);
        assert_eq!(mixing_steps(0.9, 0.01).unwrap(), 51);
        assert_eq!(mixing_steps(0.0, 0.5).unwrap(), 1);
        assert!(matches!(mixing_steps(1.0, 0.5), Err(Error::NoMixing(_))));
        assert!(mixing_steps(0.5, 0.0).is_err());
    }

    #[test]
    fn mixing_steps_is_minimal() {
        for &(l, p) in &[
            (0.3, 0.1),
            (0.77, 1.0 / 16.0),
            (2.0 / 3.0, 0.125),
            (0.99, 0.001),
        ] {
            let k = mixing_steps(l, p).unwrap();
            assert!(l.powi(k as i32) <= p / 2.0);
            assert!(k == 1 || l.powi(k as i32 - 1) > p / 2.0);
        }
    }

    #[test]
    fn walk_power_examples() {
        let g = complete(2).unwrap().lazy().unwrap();
        let a = TransitionMatrix::new(&g).unwrap();
        let v = walk_power(&[1.0, 0.0], &a, 1).unwrap();
        assert!(close(v[0], 0.5, 1e-15) && close(v[1], 0.5, 1e-15));
        assert_eq!(
            walk_power(&[0.3, 0.7], &a, 0).unwrap().to_vec(),
            vec![0.3, 0.7]
        );

        let g = grid(3, 3).unwrap();
        let a = TransitionMatrix::new(&g).unwrap();
        let pi = stationary_distribution(&g).unwrap();
        let out = walk_power(&pi, &a, 5).unwrap();
        for (x, y) in out.iter().zip(pi.iter()) {
            assert!(close(*x, *y, 1e-12));
        }
        assert!(matches!(
            walk_power(&[1.0], &a, 1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn transition_rows_and_support() {
        for g in [
            hypercube(3).unwrap(),
            random_regular(10, 3, 4).unwrap(),
            grid(2, 5).unwrap().lazy().unwrap(),
        ] {
            let a = TransitionMatrix::new(&g).unwrap();
            assert!(a.max_row_sum_error() <= STOCHASTIC_TOL);
            assert!(a.respects(&g));
        }
    }
}
