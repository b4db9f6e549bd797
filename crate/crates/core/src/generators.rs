//! Unit-capacity graph families.

use std::collections::HashSet;
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Capacity, Graph};
use crate::seed::SeedTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Hypercube(usize),
    Complete(usize),
    Cycle(usize),
    RandomRegular { n: usize, d: usize, seed: u64 },
    Grid(usize, usize),
}

impl GraphKind {
    /// Parses `KIND:ARGS`, e.g. `hypercube:3`, `random_regular:16,4,7` or
    /// `grid:3,4`. A `random_regular` spec without a seed uses `default_seed`.
    pub fn parse(spec: &str, default_seed: u64) -> Result<Self> {
        let bad = |msg: String| Error::InvalidParameter(format!("graph kind `{spec}`: {msg}"));
        let (kind, args) = spec
            .split_once(':')
            .ok_or_else(|| bad("expected KIND:ARGS".into()))?;
        let nums: Vec<u64> = args
            .split(',')
            .map(|a| a.trim().parse::<u64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(e.to_string()))?;
        let want = |count: usize| -> Result<()> {
            if nums.len() == count {
                Ok(())
            } else {
                Err(bad(format!("expected {count} argument(s)")))
            }
        };
        match kind.trim() {
            "hypercube" => {
                want(1)?;
                Ok(Self::Hypercube(nums[0] as usize))
            }
            "complete" => {
                want(1)?;
                Ok(Self::Complete(nums[0] as usize))
            }
            "cycle" => {
                want(1)?;
                Ok(Self::Cycle(nums[0] as usize))
            }
            "grid" => {
                want(2)?;
                Ok(Self::Grid(nums[0] as usize, nums[1] as usize))
            }
            "random_regular" => match nums.len() {
                2 => Ok(Self::RandomRegular {
                    n: nums[0] as usize,
                    d: nums[1] as usize,
                    seed: default_seed,
                }),
                3 => Ok(Self::RandomRegular {
                    n: nums[0] as usize,
                    d: nums[1] as usize,
                    seed: nums[2],
                }),
                _ => Err(bad("expected n,d[,seed]".into())),
            },
            other => Err(bad(format!("unknown kind `{other}`"))),
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Hypercube(d) => write!(f, "hypercube:{d}"),
            Self::Complete(n) => write!(f, "complete:{n}"),
            Self::Cycle(n) => write!(f, "cycle:{n}"),
            Self::RandomRegular { n, d, seed } => write!(f, "random_regular:{n},{d},{seed}"),
            Self::Grid(a, b) => write!(f, "grid:{a},{b}"),
        }
    }
}

pub fn generate(kind: GraphKind) -> Result<Graph> {
    match kind {
        GraphKind::Hypercube(d) => hypercube(d),
        GraphKind::Complete(n) => complete(n),
        GraphKind::Cycle(n) => cycle(n),
        GraphKind::RandomRegular { n, d, seed } => random_regular(n, d, seed),
        GraphKind::Grid(a, b) => grid(a, b),
    }
}

fn unit(edges: impl IntoIterator<Item = (usize, usize)>) -> Vec<(usize, usize, Capacity)> {
    edges
        .into_iter()
        .map(|(u, v)| (u, v, Capacity::from_integer(1)))
        .collect()
}

pub fn hypercube(dim: usize) -> Result<Graph> {
    if dim == 0 || dim > 20 {
        return Err(Error::InvalidParameter(format!(
            "hypercube dimension must be in 1..=20, got {dim}"
        )));
    }
    let n = 1usize << dim;
    let edges = (0..n).flat_map(|x| {
        (0..dim)
            .map(move |b| (x, x ^ (1 << b)))
            .filter(|&(x, y)| x < y)
    });
    Graph::new(n, &unit(edges))
}

pub fn complete(n: usize) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "complete graph needs n >= 2, got {n}"
        )));
    }
    let edges = (0..n).flat_map(|x| (x + 1..n).map(move |y| (x, y)));
    Graph::new(n, &unit(edges))
}

pub fn cycle(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "cycle needs n >= 3, got {n}"
        )));
    }
    Graph::new(n, &unit((0..n).map(|x| (x, (x + 1) % n))))
}

pub fn grid(rows: usize, cols: usize) -> Result<Graph> {
    if rows == 0 || cols == 0 || rows * cols < 2 {
        return Err(Error::InvalidParameter(format!(
            "grid needs at least two cells, got {rows}x{cols}"
        )));
    }
    let id = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((id(r, c), id(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((id(r, c), id(r + 1, c)));
            }
        }
    }
    Graph::new(rows * cols, &unit(edges))
}

/// Simple connected `d`-regular graph from the pairing model.
///
/// Stubs are matched one pair at a time; a pair that would create a loop or a
/// multi-edge is redrawn, and a stuck or disconnected attempt restarts.
pub fn random_regular(n: usize, d: usize, seed: u64) -> Result<Graph> {
    if d == 0 || d >= n || !(n * d).is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "random_regular needs 0 < d < n and n*d even, got n = {n}, d = {d}"
        )));
    }
    const MAX_ATTEMPTS: u64 = 10_000;
    let seeds = SeedTree::new(seed);
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = seeds.rng("random_regular", attempt);
        if let Some(edges) = try_pairing(n, d, &mut rng) {
            let g = Graph::new(n, &unit(edges))?;
            if g.is_connected() {
                return Ok(g);
            }
        }
    }
    Err(Error::InvalidParameter(format!(
        "no simple connected {d}-regular graph on {n} vertices found in {MAX_ATTEMPTS} attempts"
    )))
}

fn try_pairing(n: usize, d: usize, rng: &mut impl Rng) -> Option<Vec<(usize, usize)>> {
    let mut stubs: Vec<usize> = (0..n).flat_map(|x| std::iter::repeat_n(x, d)).collect();
    let mut seen = HashSet::with_capacity(n * d / 2);
    let mut edges = Vec::with_capacity(n * d / 2);
    while !stubs.is_empty() {
        let mut matched = false;
        for _ in 0..100 {
            let i = rng.random_range(0..stubs.len());
            let j = rng.random_range(0..stubs.len());
            let (a, b) = (stubs[i], stubs[j]);
            if i == j || a == b || seen.contains(&(a.min(b), a.max(b))) {
                continue;
            }
            seen.insert((a.min(b), a.max(b)));
            edges.push((a.min(b), a.max(b)));
            let (hi, lo) = (i.max(j), i.min(j));
            stubs.swap_remove(hi);
            stubs.swap_remove(lo);
            matched = true;
            break;
        }
        if !matched {
            return None;
        }
    }
    Some(edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hypercube_structure() {
        let g = hypercube(3).unwrap();
        assert_eq!(g.n(), 8);
        assert_eq!(g.link_count(), 12);
        assert!(g.is_regular());
    }

    #[test]
    fn complete_structure() {
        assert_eq!(complete(4).unwrap().link_count(), 6);
    }

    #[test]
    fn cycle_and_grid() {
        let c = cycle(5).unwrap();
        assert_eq!(c.link_count(), 5);
        assert!(c.degrees().iter().all(|&d| d == 2.0));
        let g = grid(3, 4).unwrap();
        assert_eq!(g.n(), 12);
        assert_eq!(g.link_count(), 3 * 3 + 2 * 4);
        assert!(!g.is_regular());
    }

    #[test]
    fn random_regular_structure() {
        let g = random_regular(8, 3, 1).unwrap();
        assert_eq!(g.link_count(), 12);
        assert!(g.degrees().iter().all(|&d| d == 3.0));
        assert!(g.is_connected());
        assert_eq!(g.edges().iter().filter(|e| e.parallel_id > 0).count(), 0);
    }

    #[test]
    fn random_regular_is_seeded() {
        let a = random_regular(16, 4, 5).unwrap();
        let b = random_regular(16, 4, 5).unwrap();
        let c = random_regular(16, 4, 6).unwrap();
        assert_eq!(a.edges(), b.edges());
        assert_ne!(a.edges(), c.edges());
    }

    #[test]
    fn invalid_parameters() {
        assert!(random_regular(5, 3, 0).is_err());
        assert!(random_regular(4, 4, 0).is_err());
        assert!(complete(1).is_err());
        assert!(cycle(2).is_err());
        assert!(hypercube(0).is_err());
    }

    #[test]
    fn kind_parsing_round_trips() {
        for s in [
            "hypercube:3",
            "complete:4",
            "cycle:5",
            "grid:2,3",
            "random_regular:16,4,9",
        ] {
            assert_eq!(GraphKind::parse(s, 0).unwrap().to_string(), s);
        }
        assert_eq!(
            GraphKind::parse("random_regular:10,3", 11).unwrap(),
            GraphKind::RandomRegular {
                n: 10,
                d: 3,
                seed: 11
            }
        );
        assert!(GraphKind::parse("torus:3", 0).is_err());
        assert!(GraphKind::parse("complete", 0).is_err());
        assert!(GraphKind::parse("complete:4,4", 0).is_err());
    }
}
