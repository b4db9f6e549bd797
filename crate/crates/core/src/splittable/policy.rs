//! The deterministic splittable policy.
//!
//! For a pair `(i, j)` the walk first runs `k` plain steps from `e_i`, then
//! `k` reversed steps that pull the mass back onto `e_j`. The reversed step
//! `k + s` is `row_norm((e_j A^{k-s} * A)^T)`, which only depends on `j` and
//! `s`, so every destination builds its `k` operators once and reuses them
//! for all sources.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::ops::{respects, StepOperator};
use crate::error::{Error, Result};
use crate::eval::demand::DemandMatrix;
use crate::eval::report::CongestionReport;
use crate::graph::Graph;
use crate::spectral::{lazify_if_needed, SpectralProfile, TransitionMatrix};

const NO_LINK: usize = usize::MAX;

/// One sparse row entry: target vertex, weight, link id (or `NO_LINK` for
/// the loop).
type SparseRow = Vec<(usize, f64, usize)>;

/// Signed unit flow of one commodity, indexed by link id and oriented from
/// the smaller endpoint to the larger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommodityFlow {
    pub source: usize,
    pub target: usize,
    pub link_flow: Vec<f64>,
}

impl CommodityFlow {
    /// Net inflow at every vertex, `1_n · r`.
    pub fn divergence(&self, g: &Graph) -> Vec<f64> {
        let mut div = vec![0.0; g.n()];
        for (link, &f) in g.links().iter().zip(&self.link_flow) {
            div[link.v] += f;
            div[link.u] -= f;
        }
        div
    }

    /// `max_x |(1_n · r)_x - (e_j - e_i)_x|`.
    pub fn divergence_residual(&self, g: &Graph) -> f64 {
        self.divergence(g)
            .iter()
            .enumerate()
            .map(|(x, d)| {
                let want = if x == self.target {
                    1.0
                } else if x == self.source {
                    -1.0
                } else {
                    0.0
                };
                (d - want).abs()
            })
            .fold(0.0, f64::max)
    }

    /// The antisymmetric `n x n` form `r(x, y) = -r(y, x)`.
    pub fn to_matrix(&self, g: &Graph) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(g.n(), g.n());
        for (link, &f) in g.links().iter().zip(&self.link_flow) {
            m[(link.u, link.v)] += f;
            m[(link.v, link.u)] -= f;
        }
        m
    }

    /// Volume left over after peeling source-to-target paths off the flow.
    /// Zero for an acyclic flow.
    pub fn cycle_mass(&self, g: &Graph) -> f64 {
        const EPS: f64 = 1e-12;
        let n = g.n();
        // arcs[x] = (y, link id); amounts indexed by link with orientation
        let mut amount: Vec<f64> = self.link_flow.iter().map(|f| f.abs()).collect();
        let head = |id: usize| {
            let l = &g.links()[id];
            if self.link_flow[id] >= 0.0 {
                (l.u, l.v)
            } else {
                (l.v, l.u)
            }
        };
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        for id in 0..amount.len() {
            if amount[id] > EPS {
                out[head(id).0].push(id);
            }
        }
        let mut remaining = 1.0;
        while remaining > EPS {
            let mut prev: Vec<Option<usize>> = vec![None; n];
            let mut seen = vec![false; n];
            seen[self.source] = true;
            let mut queue = std::collections::VecDeque::from([self.source]);
            while let Some(x) = queue.pop_front() {
                for &id in &out[x] {
                    let y = head(id).1;
                    if amount[id] > EPS && !seen[y] {
                        seen[y] = true;
                        prev[y] = Some(id);
                        queue.push_back(y);
                    }
                }
            }
            if !seen[self.target] {
                break;
            }
            let mut path = Vec::new();
            let mut y = self.target;
            while let Some(id) = prev[y] {
                path.push(id);
                y = head(id).0;
            }
            let b = path.iter().map(|&id| amount[id]).fold(remaining, f64::min);
            for &id in &path {
                amount[id] -= b;
            }
            remaining -= b;
        }
        amount.iter().filter(|&&a| a > EPS).sum()
    }
}

/// Worst residuals over all pairs, measured while the policy was built.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicyDiagnostics {
    /// `max ‖v^{(2k)} - e_j‖∞`.
    pub terminal_residual: f64,
    /// `max (v^{(k+s)} - 3 e_j A^{k-s})_+`.
    pub domination_excess: f64,
    /// `max ‖1_n · r_ij - (e_j - e_i)‖∞`.
    pub divergence_residual: f64,
}

/// One unit flow per ordered pair `i != j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingPolicy {
    pub n: usize,
    pub k: usize,
    pub flows: Vec<CommodityFlow>,
    pub diagnostics: PolicyDiagnostics,
}

impl RoutingPolicy {
    fn index(n: usize, i: usize, j: usize) -> usize {
        i * (n - 1) + if j < i { j } else { j - 1 }
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&CommodityFlow> {
        if i >= self.n || j >= self.n || i == j {
            return None;
        }
        self.flows.get(Self::index(self.n, i, j))
    }

    pub fn link_count(&self) -> usize {
        self.flows.first().map_or(0, |f| f.link_flow.len())
    }

    /// `{"i->j": [[u, v, flow], ...]}` with zero entries omitted.
    pub fn to_json(&self, g: &Graph) -> Value {
        let mut map = Map::new();
        for f in &self.flows {
            let entries: Vec<Value> = g
                .links()
                .iter()
                .zip(&f.link_flow)
                .filter(|(_, &x)| x != 0.0)
                .map(|(l, &x)| json!([l.u, l.v, x]))
                .collect();
            map.insert(format!("{}->{}", f.source, f.target), Value::Array(entries));
        }
        Value::Object(map)
    }
}

/// The full record of one pair: `v^{(0)} .. v^{(2k)}` and `M^{(1)} .. M^{(2k)}`.
#[derive(Debug, Clone)]
pub struct SequentialTrace {
    pub source: usize,
    pub target: usize,
    pub vectors: Vec<Vec<f64>>,
    pub operators: Vec<Arc<StepOperator>>,
}

impl SequentialTrace {
    pub fn steps(&self) -> usize {
        self.operators.len()
    }

    /// `max_s ‖v^{(s-1)} M^{(s)} - v^{(s)}‖∞`.
    pub fn step_residual(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (s, op) in self.operators.iter().enumerate() {
            let next = op.apply(&self.vectors[s])?;
            worst = next
                .iter()
                .zip(&self.vectors[s + 1])
                .map(|(a, b)| (a - b).abs())
                .fold(worst, f64::max);
        }
        Ok(worst)
    }

    pub fn terminal_residual(&self) -> f64 {
        terminal_residual(self.vectors.last().map_or(&[][..], |v| v), self.target)
    }

    /// `max_{s,x} (v^{(k+s)}_x - 3 (e_j A^{k-s})_x)_+` for `0 <= s <= k`.
    pub fn domination_excess(&self, a: &TransitionMatrix) -> Result<f64> {
        let k = self.steps() / 2;
        let mut w = vec![0.0; a.n()];
        w[self.target] = 1.0;
        // anchors[t] = e_j A^t
        let mut anchors = vec![w.clone()];
        for _ in 0..k {
            w = a.apply(&w)?;
            anchors.push(w.clone());
        }
        let mut worst: f64 = 0.0;
        for s in 0..=k {
            let v = &self.vectors[k + s];
            for (x, &vx) in v.iter().enumerate() {
                worst = worst.max(vx - 3.0 * anchors[k - s][x]);
            }
        }
        Ok(worst)
    }

    pub fn operators_stochastic(&self) -> bool {
        self.operators.iter().all(|m| m.is_right_stochastic())
    }

    pub fn operators_respect(&self, g: &Graph) -> bool {
        self.operators.iter().all(|m| respects(m.matrix(), g))
    }

    pub fn vectors_are_distributions(&self, tol: f64) -> bool {
        self.vectors
            .iter()
            .all(|v| v.iter().all(|&x| x >= -tol) && (v.iter().sum::<f64>() - 1.0).abs() <= tol)
    }
}

fn terminal_residual(v: &[f64], target: usize) -> f64 {
    v.iter()
        .enumerate()
        .map(|(x, &vx)| (vx - if x == target { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PolicyOptions {
    pub keep_traces: bool,
}

#[derive(Debug, Clone)]
pub struct ComputedPolicy {
    pub policy: RoutingPolicy,
    /// Present only with `keep_traces`.
    pub traces: Option<BTreeMap<(usize, usize), SequentialTrace>>,
}

/// Policy together with the walk graph and spectral profile it was built on.
#[derive(Debug, Clone)]
pub struct SplittableRouting {
    pub walk_graph: Graph,
    pub profile: SpectralProfile,
    pub policy: RoutingPolicy,
    pub traces: Option<BTreeMap<(usize, usize), SequentialTrace>>,
}

/// Lazifies `g` when that helps and builds the policy with the profile's `k`.
pub fn route_splittable(g: &Graph, options: PolicyOptions) -> Result<SplittableRouting> {
    let (walk_graph, profile) = lazify_if_needed(g)?;
    let computed = compute_policy(&walk_graph, profile.k, options)?;
    Ok(SplittableRouting {
        walk_graph,
        profile,
        policy: computed.policy,
        traces: computed.traces,
    })
}

fn walk_rows(g: &Graph) -> Vec<SparseRow> {
    (0..g.n())
        .map(|x| {
            let d = g.degree(x);
            let mut row: SparseRow = g
                .neighbors(x)
                .iter()
                .map(|&(y, id)| (y, g.links()[id].cap / d, id))
                .collect();
            if g.self_loop_f64(x) > 0.0 {
                row.push((x, g.self_loop_f64(x) / d, NO_LINK));
            }
            row
        })
        .collect()
}

fn sparse_step(v: &[f64], rows: &[SparseRow]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for (x, &vx) in v.iter().enumerate() {
        if vx != 0.0 {
            for &(y, w, _) in &rows[x] {
                out[y] += vx * w;
            }
        }
    }
    out
}

/// Adds the signed link flow of one step and returns the next vector.
fn flow_step(v: &[f64], rows: &[SparseRow], g: &Graph, flow: &mut [f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for (x, &vx) in v.iter().enumerate() {
        if vx != 0.0 {
            for &(y, w, id) in &rows[x] {
                let f = vx * w;
                out[y] += f;
                if id != NO_LINK {
                    if g.links()[id].u == x {
                        flow[id] += f;
                    } else {
                        flow[id] -= f;
                    }
                }
            }
        }
    }
    out
}

/// `row_norm((w * A)^T)` in sparse form. Row `x` holds `w_y A_yx` for every
/// step `y -> x`; a zero row falls back to the walk row `A_x`.
fn reverse_rows(w: &[f64], rows: &[SparseRow], g: &Graph) -> Vec<SparseRow> {
    (0..g.n())
        .map(|x| {
            let d = g.degree(x);
            let mut row: SparseRow = g
                .neighbors(x)
                .iter()
                .map(|&(y, id)| (y, w[y] * g.links()[id].cap / g.degree(y), id))
                .collect();
            if g.self_loop_f64(x) > 0.0 {
                row.push((x, w[x] * g.self_loop_f64(x) / d, NO_LINK));
            }
            let sum: f64 = row.iter().map(|e| e.1).sum();
            if sum > 0.0 {
                row.iter_mut().for_each(|e| e.1 /= sum);
                row
            } else {
                rows[x].clone()
            }
        })
        .collect()
}

fn dense(rows: &[SparseRow]) -> StepOperator {
    let n = rows.len();
    let mut m = DMatrix::zeros(n, n);
    for (x, row) in rows.iter().enumerate() {
        for &(y, w, _) in row {
            m[(x, y)] += w;
        }
    }
    StepOperator(m)
}

struct PairOutput {
    flow: CommodityFlow,
    terminal: f64,
    domination: f64,
    trace: Option<SequentialTrace>,
}

/// Builds `r_ij` for every ordered pair on the walk graph `g` with walk
/// length `k`. The result does not depend on the thread count.
pub fn compute_policy(g: &Graph, k: usize, options: PolicyOptions) -> Result<ComputedPolicy> {
    g.require_connected()?;
    if k == 0 {
        return Err(Error::InvalidParameter(
            "walk length k must be at least 1".into(),
        ));
    }
    let n = g.n();
    let m = g.link_count();
    let rows = walk_rows(g);

    // powers[x][t] = e_x A^t for t in 0..=k
    let powers: Vec<Vec<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut v = vec![0.0; n];
            v[x] = 1.0;
            let mut out = Vec::with_capacity(k + 1);
            out.push(v.clone());
            for _ in 0..k {
                v = sparse_step(&v, &rows);
                out.push(v.clone());
            }
            out
        })
        .collect();

    // Forward flow of the first k steps only depends on the source.
    let forward: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut flow = vec![0.0; m];
            for t in 0..k {
                flow_step(&powers[i][t], &rows, g, &mut flow);
            }
            flow
        })
        .collect();

    let forward_op = options.keep_traces.then(|| Arc::new(dense(&rows)));

    let per_target: Vec<Vec<PairOutput>> = (0..n)
        .into_par_iter()
        .map(|j| {
            // backward[s - 1] = M^{(k+s)}
            let backward: Vec<Vec<SparseRow>> = (1..=k)
                .map(|s| reverse_rows(&powers[j][k - s], &rows, g))
                .collect();
            let dense_backward: Option<Vec<Arc<StepOperator>>> = options
                .keep_traces
                .then(|| backward.iter().map(|r| Arc::new(dense(r))).collect());
            (0..n)
                .filter(|&i| i != j)
                .map(|i| {
                    let mut flow = forward[i].clone();
                    let mut v = powers[i][k].clone();
                    let mut vectors = options.keep_traces.then(|| powers[i].clone());
                    let mut domination = dominance(&v, &powers[j][k]);
                    for s in 1..=k {
                        v = flow_step(&v, &backward[s - 1], g, &mut flow);
                        domination = domination.max(dominance(&v, &powers[j][k - s]));
                        if let Some(vs) = vectors.as_mut() {
                            vs.push(v.clone());
                        }
                    }
                    let trace = vectors.map(|vectors| {
                        let fwd = forward_op.clone().unwrap();
                        let mut operators: Vec<Arc<StepOperator>> = vec![fwd; k];
                        operators.extend(dense_backward.as_ref().unwrap().iter().cloned());
                        SequentialTrace {
                            source: i,
                            target: j,
                            vectors,
                            operators,
                        }
                    });
                    PairOutput {
                        terminal: terminal_residual(&v, j),
                        domination,
                        flow: CommodityFlow {
                            source: i,
                            target: j,
                            link_flow: flow,
                        },
                        trace,
                    }
                })
                .collect()
        })
        .collect();

    // Reorder from (j, i) to (i, j).
    let mut slots: Vec<Option<PairOutput>> = (0..n * (n - 1)).map(|_| None).collect();
    for out in per_target.into_iter().flatten() {
        let idx = RoutingPolicy::index(n, out.flow.source, out.flow.target);
        slots[idx] = Some(out);
    }
    let mut diagnostics = PolicyDiagnostics::default();
    let mut flows = Vec::with_capacity(slots.len());
    let mut traces = options.keep_traces.then(BTreeMap::new);
    for out in slots
        .into_iter()
        .map(|o| o.expect("every ordered pair is filled"))
    {
        diagnostics.terminal_residual = diagnostics.terminal_residual.max(out.terminal);
        diagnostics.domination_excess = diagnostics.domination_excess.max(out.domination);
        diagnostics.divergence_residual = diagnostics
            .divergence_residual
            .max(out.flow.divergence_residual(g));
        if let (Some(map), Some(t)) = (traces.as_mut(), out.trace) {
            map.insert((t.source, t.target), t);
        }
        flows.push(out.flow);
    }
    Ok(ComputedPolicy {
        policy: RoutingPolicy {
            n,
            k,
            flows,
            diagnostics,
        },
        traces,
    })
}

fn dominance(v: &[f64], anchor: &[f64]) -> f64 {
    v.iter()
        .zip(anchor)
        .map(|(a, b)| a - 3.0 * b)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Per-link loads `Σ_ij D_ij |r_ij(e)|`, indexed by link id.
pub fn policy_loads(g: &Graph, d: &DemandMatrix, policy: &RoutingPolicy) -> Result<Vec<f64>> {
    d.require_size(g.n())?;
    if policy.n != g.n() || policy.link_count() != g.link_count() {
        return Err(Error::TraceMismatch(format!(
            "policy built for {} vertices and {} links, graph has {} and {}",
            policy.n,
            policy.link_count(),
            g.n(),
            g.link_count()
        )));
    }
    let mut loads = vec![0.0; g.link_count()];
    for (i, j, dij) in d.entries() {
        let flow = policy.get(i, j).expect("pair exists");
        for (l, f) in loads.iter_mut().zip(&flow.link_flow) {
            *l += dij * f.abs();
        }
    }
    Ok(loads)
}

/// `CONG(D, r)`, with per-link detail. Loops are never reported.
pub fn congestion(g: &Graph, d: &DemandMatrix, policy: &RoutingPolicy) -> Result<CongestionReport> {
    Ok(CongestionReport::from_loads(
        g,
        &policy_loads(g, d, policy)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::demand::{demands, DemandKind};
    use crate::generators::{complete, cycle, hypercube};
    use crate::graph::{build_graph, Capacity};

    fn traced(g: &Graph) -> (Graph, ComputedPolicy) {
        let (walk, profile) = lazify_if_needed(g).unwrap();
        let c = compute_policy(&walk, profile.k, PolicyOptions { keep_traces: true }).unwrap();
        (walk, c)
    }

    #[test]
    fn k2_unit_flow() {
        let (walk, c) = traced(&complete(2).unwrap());
        let r = c.policy.get(0, 1).unwrap();
        let div = r.divergence(&walk);
        assert!((div[0] + 1.0).abs() < 1e-9 && (div[1] - 1.0).abs() < 1e-9);
        assert!((r.link_flow[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn k4_terminal_exact() {
        let (_, c) = traced(&complete(4).unwrap());
        for t in c.traces.as_ref().unwrap().values() {
            assert!(t.terminal_residual() < 1e-9);
            assert!(t.vectors_are_distributions(1e-9));
            assert!(t.step_residual().unwrap() < 1e-12);
        }
        assert!(c.policy.diagnostics.terminal_residual < 1e-9);
    }

    #[test]
    fn c5_lazy_domination() {
        let (walk, c) = traced(&cycle(5).unwrap());
        let a = TransitionMatrix::new(&walk).unwrap();
        for t in c.traces.as_ref().unwrap().values() {
            assert!(t.domination_excess(&a).unwrap() <= 1e-9);
            assert!(t.operators_stochastic() && t.operators_respect(&walk));
        }
        assert!(c.policy.diagnostics.domination_excess <= 1e-9);
    }

    #[test]
    fn flows_are_antisymmetric_matrices() {
        let (walk, c) = traced(&hypercube(3).unwrap());
        for f in &c.policy.flows {
            let m = f.to_matrix(&walk);
            assert!((&m + m.transpose()).abs().max() == 0.0);
            assert!(respects(&m.abs(), &walk));
            assert!(f.divergence_residual(&walk) < 1e-9);
        }
    }

    #[test]
    fn traces_match_policy_flows() {
        let (walk, c) = traced(&cycle(6).unwrap());
        let traces = c.traces.unwrap();
        for f in &c.policy.flows {
            let t = &traces[&(f.source, f.target)];
            let mut r = DMatrix::<f64>::zeros(walk.n(), walk.n());
            for (s, op) in t.operators.iter().enumerate() {
                for x in 0..walk.n() {
                    for y in 0..walk.n() {
                        if x != y {
                            r[(x, y)] += t.vectors[s][x] * op.matrix()[(x, y)];
                            r[(y, x)] -= t.vectors[s][x] * op.matrix()[(x, y)];
                        }
                    }
                }
            }
            assert!((r - f.to_matrix(&walk)).abs().max() < 1e-12);
        }
    }

    #[test]
    fn congestion_examples() {
        let (walk, c) = traced(&complete(2).unwrap());
        let zero = DemandMatrix::zeros(2);
        assert_eq!(congestion(&walk, &zero, &c.policy).unwrap().max, 0.0);
        let mut d = DemandMatrix::zeros(2);
        d.set(0, 1, 1.0).unwrap();
        assert!((congestion(&walk, &d, &c.policy).unwrap().max - 1.0).abs() < 1e-9);
    }

    #[test]
    fn k4_adjacency_matches_brute_force() {
        let g = complete(4).unwrap();
        let (walk, c) = traced(&g);
        let d = demands(&g, &DemandKind::Adjacency).unwrap();
        let report = congestion(&walk, &d, &c.policy).unwrap();
        let mut brute = DMatrix::<f64>::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    let m = c.policy.get(i, j).unwrap().to_matrix(&walk);
                    brute += m.abs() * d.get(i, j);
                }
            }
        }
        for l in &report.links {
            assert!((l.load - brute[(l.u, l.v)]).abs() < 1e-12);
        }
    }

    #[test]
    fn cycle_mass_of_a_path_is_zero() {
        let one = Capacity::from_integer(1);
        let g = build_graph(&[(0, 1, one), (1, 2, one)]).unwrap();
        let f = CommodityFlow {
            source: 0,
            target: 2,
            link_flow: vec![1.0, 1.0],
        };
        assert_eq!(f.cycle_mass(&g), 0.0);
        let g = cycle(3).unwrap();
        // Path 0->1 plus a circulation 0->1->2->0.
        let mut link_flow = vec![0.0; 3];
        link_flow[g.link_between(0, 1).unwrap()] = 1.5;
        link_flow[g.link_between(0, 2).unwrap()] = -0.5;
        link_flow[g.link_between(1, 2).unwrap()] = 0.5;
        let f = CommodityFlow {
            source: 0,
            target: 1,
            link_flow,
        };
        assert!((f.cycle_mass(&g) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn mismatched_graph_rejected() {
        let (_, c) = traced(&complete(4).unwrap());
        let other = cycle(4).unwrap();
        assert!(matches!(
            congestion(&other, &DemandMatrix::zeros(4), &c.policy),
            Err(Error::TraceMismatch(_))
        ));
    }

    #[test]
    fn json_export_keys() {
        let (walk, c) = traced(&complete(3).unwrap());
        let v = c.policy.to_json(&walk);
        assert_eq!(v.as_object().unwrap().len(), 6);
        assert!(v.get("0->2").is_some());
    }
}
