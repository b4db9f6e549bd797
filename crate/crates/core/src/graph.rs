//! Capacitated undirected multigraphs.
//!
//! Capacities are exact rationals. Parallel input edges between the same
//! vertex pair are kept as separate [`Edge`]s, and are also aggregated into
//! one [`Link`] per vertex pair; random walks and congestion are defined on
//! links, so a link's capacity is the sum over its parallel edges.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use num_rational::Rational64;
use num_traits::{CheckedAdd, ToPrimitive, Zero};
use serde_json::Value;

use crate::error::{Error, Result};

pub type Capacity = Rational64;

/// One input edge, stored with `u <= v`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub capacity: Capacity,
    /// Position among the parallel edges joining `u` and `v`.
    pub parallel_id: usize,
}

/// All parallel edges between one vertex pair, `u < v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub u: usize,
    pub v: usize,
    pub capacity: Capacity,
    pub cap: f64,
}

impl Link {
    pub fn other(&self, x: usize) -> usize {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }
}

#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    self_loops: Vec<Capacity>,
    links: Vec<Link>,
    link_index: HashMap<(usize, usize), usize>,
    // (neighbor, link id) per vertex, sorted by neighbor.
    adjacency: Vec<Vec<(usize, usize)>>,
    degrees: Vec<Capacity>,
    degrees_f64: Vec<f64>,
    connected: bool,
}

fn ratio_to_f64(r: &Capacity) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

impl Graph {
    /// Builds a graph on `n` vertices. Self-edges are rejected; loops are
    /// added only through [`Graph::with_self_loops`].
    pub fn new(n: usize, edge_list: &[(usize, usize, Capacity)]) -> Result<Self> {
        for &(u, v, c) in edge_list {
            if u >= n || v >= n {
                return Err(Error::VertexOutOfRange {
                    vertex: u.max(v),
                    n,
                });
            }
            if u == v {
                return Err(Error::SelfEdge(u));
            }
            if c <= Capacity::zero() {
                return Err(Error::InvalidCapacity {
                    u,
                    v,
                    reason: format!("capacity must be positive, got {c}"),
                });
            }
        }
        Self::assemble(n, edge_list, vec![Capacity::zero(); n])
    }

    fn assemble(
        n: usize,
        edge_list: &[(usize, usize, Capacity)],
        self_loops: Vec<Capacity>,
    ) -> Result<Self> {
        let mut edges = Vec::with_capacity(edge_list.len());
        let mut links: Vec<Link> = Vec::new();
        let mut link_index = HashMap::new();
        let mut parallel_count: HashMap<(usize, usize), usize> = HashMap::new();
        for &(a, b, c) in edge_list {
            let (u, v) = if a <= b { (a, b) } else { (b, a) };
            let pid = parallel_count.entry((u, v)).or_insert(0);
            edges.push(Edge {
                u,
                v,
                capacity: c,
                parallel_id: *pid,
            });
            *pid += 1;
            match link_index.get(&(u, v)) {
                Some(&id) => {
                    let link: &mut Link = &mut links[id];
                    link.capacity =
                        link.capacity
                            .checked_add(&c)
                            .ok_or_else(|| Error::InvalidCapacity {
                                u,
                                v,
                                reason: "capacity overflow".into(),
                            })?;
                    link.cap = ratio_to_f64(&link.capacity);
                }
                None => {
                    link_index.insert((u, v), links.len());
                    links.push(Link {
                        u,
                        v,
                        capacity: c,
                        cap: ratio_to_f64(&c),
                    });
                }
            }
        }

        let mut adjacency = vec![Vec::new(); n];
        let mut degrees = self_loops.clone();
        for (id, link) in links.iter().enumerate() {
            adjacency[link.u].push((link.v, id));
            adjacency[link.v].push((link.u, id));
            for x in [link.u, link.v] {
                degrees[x] = degrees[x].checked_add(&link.capacity).ok_or_else(|| {
                    Error::InvalidCapacity {
                        u: link.u,
                        v: link.v,
                        reason: "degree overflow".into(),
                    }
                })?;
            }
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        let degrees_f64 = degrees.iter().map(ratio_to_f64).collect();
        let connected = is_connected(n, &adjacency);
        Ok(Self {
            n,
            edges,
            self_loops,
            links,
            link_index,
            adjacency,
            degrees,
            degrees_f64,
            connected,
        })
    }

    /// The same graph with the given per-vertex loop capacities (replacing
    /// any existing loops).
    pub fn with_self_loops(&self, loops: Vec<Capacity>) -> Result<Self> {
        if loops.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: loops.len(),
            });
        }
        if let Some(x) = loops.iter().position(|c| *c < Capacity::zero()) {
            return Err(Error::InvalidCapacity {
                u: x,
                v: x,
                reason: "negative loop capacity".into(),
            });
        }
        Self::assemble(self.n, &self.edge_triples(), loops)
    }

    /// Adds a loop of capacity `d_x` at every vertex, so the walk becomes
    /// `(I + A) / 2`.
    pub fn lazy(&self) -> Result<Self> {
        let loops = (0..self.n)
            .map(|x| self.self_loops[x] + self.degrees[x])
            .collect();
        self.with_self_loops(loops)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_triples(&self) -> Vec<(usize, usize, Capacity)> {
        self.edges.iter().map(|e| (e.u, e.v, e.capacity)).collect()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn link_between(&self, u: usize, v: usize) -> Option<usize> {
        let key = if u <= v { (u, v) } else { (v, u) };
        self.link_index.get(&key).copied()
    }

    /// `(neighbor, link id)` pairs at `x`, excluding the loop.
    pub fn neighbors(&self, x: usize) -> &[(usize, usize)] {
        &self.adjacency[x]
    }

    pub fn self_loop(&self, x: usize) -> &Capacity {
        &self.self_loops[x]
    }

    pub fn self_loop_f64(&self, x: usize) -> f64 {
        ratio_to_f64(&self.self_loops[x])
    }

    pub fn has_self_loops(&self) -> bool {
        self.self_loops.iter().any(|c| !c.is_zero())
    }

    /// Aggregated capacity between `u` and `v` (the loop capacity when
    /// `u == v`); zero when not adjacent.
    pub fn capacity(&self, u: usize, v: usize) -> f64 {
        if u == v {
            self.self_loop_f64(u)
        } else {
            self.link_between(u, v).map_or(0.0, |id| self.links[id].cap)
        }
    }

    /// `true` when `u`–`v` is a link, or `u == v` carries a loop.
    pub fn is_step(&self, u: usize, v: usize) -> bool {
        if u == v {
            !self.self_loops[u].is_zero()
        } else {
            self.link_between(u, v).is_some()
        }
    }

    /// `d_x`: total capacity at `x`, loop included.
    pub fn degree(&self, x: usize) -> f64 {
        self.degrees_f64[x]
    }

    pub fn degree_exact(&self, x: usize) -> &Capacity {
        &self.degrees[x]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees_f64
    }

    /// Capacity at `x` over real links only.
    pub fn link_degree(&self, x: usize) -> f64 {
        self.adjacency[x]
            .iter()
            .map(|&(_, id)| self.links[id].cap)
            .sum()
    }

    pub fn total_degree(&self) -> f64 {
        self.degrees_f64.iter().sum()
    }

    pub fn max_degree(&self) -> f64 {
        self.degrees_f64.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_degree(&self) -> f64 {
        self.degrees_f64
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    pub fn require_connected(&self) -> Result<()> {
        if self.n == 0 {
            Err(Error::EmptyGraph)
        } else if !self.connected {
            Err(Error::Disconnected)
        } else {
            Ok(())
        }
    }

    /// Regular in the unit-capacity sense: all capacities 1 and all link
    /// degrees equal.
    pub fn is_regular(&self) -> bool {
        self.links
            .iter()
            .all(|l| l.capacity == Capacity::from_integer(1))
            && self.adjacency.windows(2).all(|w| w[0].len() == w[1].len())
    }

    /// Parses a text edge list (`u v capacity` per line, `#` comments) or the
    /// JSON form `{"n": .., "edges": [[u, v, cap], ..]}`.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Self::from_json_str(text)
        } else {
            Self::from_edge_list_str(text)
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn from_edge_list_str(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut n = 0usize;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                line: lineno + 1,
                msg,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(parse_err(format!(
                    "expected `u v capacity`, got {} fields",
                    fields.len()
                )));
            }
            let u: usize = fields[0]
                .parse()
                .map_err(|_| parse_err(format!("bad vertex id `{}`", fields[0])))?;
            let v: usize = fields[1]
                .parse()
                .map_err(|_| parse_err(format!("bad vertex id `{}`", fields[1])))?;
            let c = parse_capacity(fields[2]).map_err(|e| parse_err(e.to_string()))?;
            n = n.max(u + 1).max(v + 1);
            edges.push((u, v, c));
        }
        Self::new(n, &edges)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let bad = |msg: &str| Error::Parse {
            line: 0,
            msg: msg.to_string(),
        };
        let n = value
            .get("n")
            .and_then(Value::as_u64)
            .ok_or_else(|| bad("missing integer field `n`"))? as usize;
        let raw_edges = value
            .get("edges")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing array field `edges`"))?;
        let mut edges = Vec::with_capacity(raw_edges.len());
        for e in raw_edges {
            let triple = e
                .as_array()
                .filter(|a| a.len() == 3)
                .ok_or_else(|| bad("each edge must be [u, v, cap]"))?;
            let u = triple[0].as_u64().ok_or_else(|| bad("bad vertex id"))? as usize;
            let v = triple[1].as_u64().ok_or_else(|| bad("bad vertex id"))? as usize;
            let c = match &triple[2] {
                Value::String(s) => parse_capacity(s)?,
                Value::Number(num) => parse_capacity(&num.to_string())?,
                _ => return Err(bad("capacity must be a number or \"p/q\" string")),
            };
            edges.push((u, v, c));
        }
        Self::new(n, &edges)
    }

    pub fn to_edge_list_string(&self) -> String {
        let mut out = format!("# n = {}\n", self.n);
        for e in &self.edges {
            let _ = writeln!(out, "{} {} {}", e.u, e.v, e.capacity);
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let edges: Vec<Value> = self
            .edges
            .iter()
            .map(|e| {
                let cap = if e.capacity.is_integer() {
                    Value::from(*e.capacity.numer())
                } else {
                    Value::from(e.capacity.to_string())
                };
                Value::from(vec![Value::from(e.u), Value::from(e.v), cap])
            })
            .collect();
        serde_json::json!({ "n": self.n, "edges": edges })
    }
}

/// Builds a graph whose vertex count is one past the largest id used.
pub fn build_graph(edge_list: &[(usize, usize, Capacity)]) -> Result<Graph> {
    let n = edge_list
        .iter()
        .map(|&(u, v, _)| u.max(v) + 1)
        .max()
        .unwrap_or(0);
    Graph::new(n, edge_list)
}

/// Parses `3`, `0.25` or `7/2` into an exact positive rational.
pub fn parse_capacity(s: &str) -> Result<Capacity> {
    let s = s.trim();
    let invalid = |reason: String| Error::InvalidCapacity { u: 0, v: 0, reason };
    let value = if let Some((p, q)) = s.split_once('/') {
        let p: i64 = p
            .trim()
            .parse()
            .map_err(|_| invalid(format!("bad numerator in `{s}`")))?;
        let q: i64 = q
            .trim()
            .parse()
            .map_err(|_| invalid(format!("bad denominator in `{s}`")))?;
        if q == 0 {
            return Err(invalid(format!("zero denominator in `{s}`")));
        }
        Capacity::new(p, q)
    } else if let Some((int, frac)) = s.split_once('.') {
        let negative = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches(['-', '+']), frac);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || frac.len() > 17 {
            return Err(invalid(format!("unsupported decimal `{s}`")));
        }
        let numer: i64 = digits
            .parse()
            .map_err(|_| invalid(format!("decimal out of range `{s}`")))?;
        let denom = 10i64
            .checked_pow(frac.len() as u32)
            .ok_or_else(|| invalid(format!("decimal out of range `{s}`")))?;
        let r = Capacity::new(numer, denom);
        if negative {
            -r
        } else {
            r
        }
    } else {
        Capacity::from_integer(
            s.parse()
                .map_err(|_| invalid(format!("bad capacity `{s}`")))?,
        )
    };
    if value <= Capacity::zero() {
        return Err(invalid(format!("capacity must be positive, got `{s}`")));
    }
    Ok(value)
}

fn is_connected(n: usize, adjacency: &[Vec<(usize, usize)>]) -> bool {
    if n == 0 {
        return false;
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(x) = queue.pop_front() {
        for &(y, _) in &adjacency[x] {
            if !seen[y] {
                seen[y] = true;
                count += 1;
                queue.push_back(y);
            }
        }
    }
    count == n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cap(p: i64) -> Capacity {
        Capacity::from_integer(p)
    }

    #[test]
    fn k2_degrees() {
        let g = build_graph(&[(0, 1, cap(1))]).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.degrees(), &[1.0, 1.0]);
        assert!(g.is_connected());
    }

    #[test]
    fn weighted_path_degrees() {
        let g = build_graph(&[(0, 1, cap(2)), (1, 2, cap(1))]).unwrap();
        assert_eq!(g.degrees(), &[2.0, 3.0, 1.0]);
    }

    #[test]
    fn rejects_nonpositive_capacity() {
        assert!(matches!(
            build_graph(&[(0, 1, cap(-1))]),
            Err(Error::InvalidCapacity { .. })
        ));
        assert!(build_graph(&[(0, 1, cap(0))]).is_err());
    }

    #[test]
    fn rejects_self_edge() {
        assert!(matches!(
            build_graph(&[(0, 1, cap(1)), (1, 1, cap(1))]),
            Err(Error::SelfEdge(1))
        ));
    }

    #[test]
    fn parallel_edges_aggregate_into_one_link() {
        let g = build_graph(&[(1, 0, cap(1)), (0, 1, cap(2))]).unwrap();
        assert_eq!(g.edges().len(), 2);
        assert_eq!(g.edges()[1].parallel_id, 1);
        assert_eq!(g.link_count(), 1);
        assert_eq!(g.capacity(0, 1), 3.0);
        assert_eq!(g.degrees(), &[3.0, 3.0]);
    }

    #[test]
    fn disconnected_flagged() {
        let g = Graph::new(4, &[(0, 1, cap(1)), (2, 3, cap(1))]).unwrap();
        assert!(!g.is_connected());
        assert!(matches!(g.require_connected(), Err(Error::Disconnected)));
    }

    #[test]
    fn lazy_doubles_degree() {
        let g = build_graph(&[(0, 1, cap(2)), (1, 2, cap(1))]).unwrap();
        let lazy = g.lazy().unwrap();
        assert_eq!(lazy.degrees(), &[4.0, 6.0, 2.0]);
        assert_eq!(lazy.self_loop_f64(1), 3.0);
        assert_eq!(lazy.link_degree(1), 3.0);
        assert!(lazy.is_step(1, 1));
        assert!(!g.is_step(1, 1));
    }

    #[test]
    fn capacity_parsing() {
        assert_eq!(parse_capacity("3").unwrap(), cap(3));
        assert_eq!(parse_capacity("0.25").unwrap(), Capacity::new(1, 4));
        assert_eq!(parse_capacity("7/2").unwrap(), Capacity::new(7, 2));
        assert!(parse_capacity("-1").is_err());
        assert!(parse_capacity("1/0").is_err());
        assert!(parse_capacity("abc").is_err());
        assert!(parse_capacity("1e3").is_err());
    }

    #[test]
    fn edge_list_and_json_forms_agree() {
        let text = "# triangle\n0 1 1\n1 2 1/2 # half\n\n2 0 0.5\n";
        let a = Graph::parse(text).unwrap();
        let b = Graph::parse(r#"{"n": 3, "edges": [[0,1,1],[1,2,"1/2"],[2,0,0.5]]}"#).unwrap();
        assert_eq!(a.edges(), b.edges());
        let c = Graph::parse(&a.to_edge_list_string()).unwrap();
        assert_eq!(a.edges(), c.edges());
        let d = Graph::parse(&a.to_json().to_string()).unwrap();
        assert_eq!(a.edges(), d.edges());
    }

    #[test]
    fn parse_errors_carry_line() {
        match Graph::parse("0 1 1\n0 x 1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
