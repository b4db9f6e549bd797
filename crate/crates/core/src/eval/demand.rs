//! Demand matrices and the standard demand families.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seed::SeedTree;
use crate::spectral::stationary_distribution;

/// Nonnegative `n x n` matrix with zero diagonal; `D_ij` is the traffic from
/// `i` to `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DemandMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        for i in 0..n {
            for j in 0..n {
                let v = data[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidDemand(format!(
                        "entry ({i}, {j}) = {v} must be finite and nonnegative"
                    )));
                }
                if i == j && v != 0.0 {
                    return Err(Error::InvalidDemand(format!(
                        "nonzero self-demand {v} at vertex {i}"
                    )));
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: r.len(),
            });
        }
        Self::new(n, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        if !value.is_finite() || value < 0.0 || (i == j && value != 0.0) {
            return Err(Error::InvalidDemand(format!(
                "cannot set ({i}, {j}) to {value}"
            )));
        }
        self.data[i * self.n + j] = value;
        Ok(())
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> f64 {
        (0..self.n).map(|i| self.get(i, j)).sum()
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let data = (0..n * n).map(|k| self.data[(k % n) * n + k / n]).collect();
        Self { n, data }
    }

    /// Nonzero entries `(i, j, D_ij)` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(move |(k, &v)| (k / self.n, k % self.n, v))
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn require_size(&self, n: usize) -> Result<()> {
        if self.n == n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: n,
                got: self.n,
            })
        }
    }

    /// CSV with a mandatory header row (its contents are ignored) followed by
    /// `n` rows of `n` values; or JSON, either `[[..], ..]` or
    /// `{"n": .., "demands": [[..], ..]}`.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim_start();
        if t.starts_with('{') || t.starts_with('[') {
            Self::from_json_str(text)
        } else {
            Self::from_csv_str(text)
        }
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (lineno, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Parse {
                line: lineno + 2,
                msg: e.to_string(),
            })?;
            let row = record
                .iter()
                .map(|f| {
                    f.parse::<f64>().map_err(|_| Error::Parse {
                        line: lineno + 2,
                        msg: format!("bad number `{f}`"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let rows_value = match &value {
            Value::Array(_) => &value,
            Value::Object(obj) => obj.get("demands").ok_or_else(|| Error::Parse {
                line: 0,
                msg: "missing field `demands`".into(),
            })?,
            _ => {
                return Err(Error::Parse {
                    line: 0,
                    msg: "expected an array or object".into(),
                })
            }
        };
        let rows: Vec<Vec<f64>> = serde_json::from_value(rows_value.clone())?;
        let m = Self::from_rows(&rows)?;
        if let Some(n) = value.get("n").and_then(Value::as_u64) {
            m.require_size(n as usize)?;
        }
        Ok(m)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = (0..self.n)
            .map(|j| j.to_string())
            .collect::<Vec<_>>()
            .join(",");
        out.push('\n');
        for i in 0..self.n {
            let row: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Checks that `sigma` is a bijection on `0..sigma.len()`.
pub fn validate_permutation(sigma: &[usize]) -> Result<()> {
    let n = sigma.len();
    let mut seen = vec![false; n];
    for (i, &s) in sigma.iter().enumerate() {
        if s >= n {
            return Err(Error::NotAPermutation(format!(
                "sigma({i}) = {s} is out of range for n = {n}"
            )));
        }
        if std::mem::replace(&mut seen[s], true) {
            return Err(Error::NotAPermutation(format!("{s} appears twice")));
        }
    }
    Ok(())
}

/// Uniformly random permutation from the labeled stream.
pub fn random_permutation(n: usize, seeds: &SeedTree, index: u64) -> Vec<usize> {
    let mut sigma: Vec<usize> = (0..n).collect();
    sigma.shuffle(&mut seeds.rng("permutation", index));
    sigma
}

#[derive(Debug, Clone, PartialEq)]
pub enum DemandKind {
    /// One unit from `i` to `sigma(i)`; fixed points send nothing.
    Permutation(Vec<usize>),
    /// One unit from every vertex to each of its neighbors.
    Adjacency,
    /// `volume` between every ordered pair.
    UniformAllPairs(f64),
    /// `π_x / π_max` from `x` to `sigma(x)`.
    Canonical(Vec<usize>),
    /// Each off-diagonal entry is present with probability `density` and
    /// uniform in `(0, 1]` when present.
    Random { seed: u64, density: f64 },
}

pub fn demands(g: &Graph, kind: &DemandKind) -> Result<DemandMatrix> {
    let n = g.n();
    let mut d = DemandMatrix::zeros(n);
    match kind {
        DemandKind::Permutation(sigma) | DemandKind::Canonical(sigma) => {
            if sigma.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: sigma.len(),
                });
            }
            validate_permutation(sigma)?;
            let weights: Vec<f64> = if matches!(kind, DemandKind::Canonical(_)) {
                let pi = stationary_distribution(g)?;
                let pi_max = pi.max();
                pi.iter().map(|p| p / pi_max).collect()
            } else {
                vec![1.0; n]
            };
            for (x, &y) in sigma.iter().enumerate() {
                if x != y {
                    d.set(x, y, weights[x])?;
                }
            }
        }
        DemandKind::Adjacency => {
            for link in g.links() {
                d.set(link.u, link.v, 1.0)?;
                d.set(link.v, link.u, 1.0)?;
            }
        }
        DemandKind::UniformAllPairs(volume) => {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        d.set(i, j, *volume)?;
                    }
                }
            }
        }
        DemandKind::Random { seed, density } => {
            if !(0.0..=1.0).contains(density) {
                return Err(Error::InvalidParameter(format!(
                    "density must lie in [0, 1], got {density}"
                )));
            }
            let mut rng = SeedTree::new(*seed).rng("demand", 0);
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.random::<f64>() < *density {
                        d.set(i, j, 1.0 - rng.random::<f64>())?;
                    }
                }
            }
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::complete;
    use crate::graph::{build_graph, Capacity};

    #[test]
    fn permutation_demand() {
        let g = complete(4).unwrap();
        let d = demands(&g, &DemandKind::Permutation(vec![1, 0, 3, 2])).unwrap();
        assert_eq!(d.entries().count(), 4);
        assert_eq!(d.get(0, 1), 1.0);
        assert_eq!(d.get(2, 3), 1.0);
        assert!(demands(&g, &DemandKind::Permutation(vec![1, 1, 3, 2])).is_err());
    }

    #[test]
    fn adjacency_of_k4() {
        let d = demands(&complete(4).unwrap(), &DemandKind::Adjacency).unwrap();
        assert_eq!(d.entries().count(), 12);
        assert!(d.entries().all(|(_, _, v)| v == 1.0));
    }

    #[test]
    fn canonical_on_star() {
        let one = Capacity::from_integer(1);
        let star = build_graph(&[(0, 1, one), (0, 2, one), (0, 3, one)]).unwrap();
        let d = demands(&star, &DemandKind::Canonical(vec![1, 0, 3, 2])).unwrap();
        assert_eq!(d.get(0, 1), 1.0);
        assert!((d.get(1, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((d.get(2, 3) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(DemandMatrix::new(2, vec![0.0, 1.0, -1.0, 0.0]).is_err());
        assert!(DemandMatrix::new(2, vec![1.0, 1.0, 1.0, 0.0]).is_err());
        assert!(DemandMatrix::new(2, vec![0.0, 1.0, 1.0]).is_err());
        assert!(validate_permutation(&[0, 2]).is_err());
    }

    #[test]
    fn csv_and_json_inputs() {
        let csv = "a,b,c\n0,1,2\n0.5,0,0\n0,0,0\n";
        let d = DemandMatrix::parse(csv).unwrap();
        assert_eq!(d.get(0, 2), 2.0);
        assert_eq!(d.get(1, 0), 0.5);
        assert_eq!(DemandMatrix::parse(&d.to_csv_string()).unwrap(), d);
        let j = DemandMatrix::parse(r#"{"n": 3, "demands": [[0,1,2],[0.5,0,0],[0,0,0]]}"#).unwrap();
        assert_eq!(j, d);
        assert!(DemandMatrix::parse("[[0,1],[1,0,0]]").is_err());
        assert!(DemandMatrix::parse(r#"{"n": 4, "demands": [[0,1],[1,0]]}"#).is_err());
    }

    #[test]
    fn random_demand_is_seeded() {
        let g = complete(6).unwrap();
        let kind = DemandKind::Random {
            seed: 3,
            density: 0.5,
        };
        let a = demands(&g, &kind).unwrap();
        assert_eq!(a, demands(&g, &kind).unwrap());
        assert!(a.entries().all(|(i, j, v)| i != j && v > 0.0 && v <= 1.0));
    }

    #[test]
    fn transpose_swaps_entries() {
        let d = DemandMatrix::from_rows(&[vec![0.0, 2.0], vec![3.0, 0.0]]).unwrap();
        let t = d.transpose();
        assert_eq!(t.get(0, 1), 3.0);
        assert_eq!(t.get(1, 0), 2.0);
    }
}
