//! Unsplittable oblivious routing: every commodity follows one two-leg path.
//!
//! The policy is fixed before any demand is seen. The audit side rescales a
//! demand to `D̃_ij = (d_max / d_i) D_ij`, sorts each row, and splits every
//! edge load into per-rank layers `W_e^{(t)}` to check
//! `CONG_e <= M (Σ_{t<=s} W_e^{(t)} + s Σ_{t>s} W_e^{(t)} / t)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::eval::demand::DemandMatrix;
use crate::eval::report::{ratio, CongestionReport};
use crate::graph::Graph;
use crate::paths::{
    build_sample_space, is_valid_path, select_path_with, tail_threshold, EdgeLoad, TwoLegPath,
};
use crate::seed::SeedTree;
use crate::spectral::{lazify_if_needed, SpectralProfile};

/// Default audit constant. Chosen empirically; not derived from any proof.
pub const DEFAULT_AUDIT_CONSTANT: f64 = 40.0;

#[derive(Debug, Clone)]
pub struct UnsplittablePolicy {
    pub n: usize,
    pub seed: u64,
    pub walk_graph: Graph,
    pub profile: SpectralProfile,
    /// Ordered pairs `x != y`, row-major.
    pub paths: Vec<TwoLegPath>,
}

impl UnsplittablePolicy {
    fn index(n: usize, x: usize, y: usize) -> usize {
        x * (n - 1) + if y < x { y } else { y - 1 }
    }

    pub fn k(&self) -> usize {
        self.profile.k
    }

    pub fn get(&self, x: usize, y: usize) -> Option<&TwoLegPath> {
        if x >= self.n || y >= self.n || x == y {
            return None;
        }
        self.paths.get(Self::index(self.n, x, y))
    }

    pub fn redraws(&self) -> usize {
        self.paths.iter().map(|p| p.redraws).sum()
    }

    pub fn resampled(&self) -> usize {
        self.paths.iter().map(|p| p.resampled).sum()
    }

    /// `{"x->y": [v0, .., v2k]}`.
    pub fn to_json(&self) -> Value {
        let mut map = Map::new();
        for p in &self.paths {
            map.insert(format!("{}->{}", p.source, p.target), json!(p.gamma()));
        }
        Value::Object(map)
    }

    /// Every path valid on the walk graph with the right endpoints and length.
    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        for p in &self.paths {
            let gamma = p.gamma();
            if gamma.len() != 2 * k + 1
                || gamma[0] != p.source
                || gamma[2 * k] != p.target
                || !is_valid_path(&self.walk_graph, &gamma)
            {
                return Err(Error::InvalidPath(format!(
                    "path for {}->{} is malformed",
                    p.source, p.target
                )));
            }
        }
        Ok(())
    }
}

/// Picks one two-leg path per ordered pair, each from its own stream.
pub fn build_policy(g: &Graph, seed: u64) -> Result<UnsplittablePolicy> {
    let (walk_graph, profile) = lazify_if_needed(g)?;
    let n = g.n();
    let seeds = SeedTree::new(seed);
    let space = build_sample_space(&walk_graph, &profile, seeds.child_seed("space", 0))?;
    let paths = (0..n * n)
        .into_par_iter()
        .filter(|&p| p / n != p % n)
        .map(|p| {
            let (x, y) = (p / n, p % n);
            let mut rng = seeds.rng("select", p as u64);
            select_path_with(&space, x, y, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UnsplittablePolicy {
        n,
        seed,
        walk_graph,
        profile,
        paths,
    })
}

fn check_graph(g: &Graph, policy: &UnsplittablePolicy) -> Result<()> {
    if g.n() != policy.n || g.link_count() != policy.walk_graph.link_count() {
        return Err(Error::TraceMismatch(
            "policy was built for a different graph".into(),
        ));
    }
    Ok(())
}

fn add_traversals(g: &Graph, path: &[usize], weight: f64, loads: &mut [f64]) {
    for w in path.windows(2) {
        if w[0] != w[1] {
            if let Some(id) = g.link_between(w[0], w[1]) {
                loads[id] += weight;
            }
        }
    }
}

/// Per-link loads `Σ_xy D_xy · (traversals of e by γ_xy)`.
pub fn unsplittable_loads(
    g: &Graph,
    d: &DemandMatrix,
    policy: &UnsplittablePolicy,
) -> Result<Vec<f64>> {
    d.require_size(g.n())?;
    check_graph(g, policy)?;
    let mut loads = vec![0.0; g.link_count()];
    for (x, y, dxy) in d.entries() {
        let p = policy.get(x, y).expect("pair exists");
        add_traversals(g, &p.alpha, dxy, &mut loads);
        add_traversals(g, &p.beta, dxy, &mut loads);
    }
    Ok(loads)
}

pub fn unsplittable_congestion(
    g: &Graph,
    d: &DemandMatrix,
    policy: &UnsplittablePolicy,
) -> Result<CongestionReport> {
    Ok(CongestionReport::from_loads(
        g,
        &unsplittable_loads(g, d, policy)?,
    ))
}

/// `D̃`, its largest entry `M`, and `s = max row sum / M` in `[1, n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedDemandProfile {
    pub normalized: DemandMatrix,
    pub m: f64,
    pub s: f64,
    pub d_max: f64,
}

impl NormalizedDemandProfile {
    /// `M s / d_max`, a lower bound on `OPT(D)`.
    pub fn opt_lower_bound(&self) -> f64 {
        self.m * self.s / self.d_max
    }
}

/// Degrees are taken over real links.
pub fn normalized_profile(g: &Graph, d: &DemandMatrix) -> Result<NormalizedDemandProfile> {
    let n = g.n();
    d.require_size(n)?;
    if let Some(x) = (0..n).find(|&x| g.link_degree(x) <= 0.0) {
        return Err(Error::InvalidParameter(format!("vertex {x} has no links")));
    }
    let d_max = (0..n).map(|x| g.link_degree(x)).fold(0.0, f64::max);
    let mut normalized = DemandMatrix::zeros(n);
    for (i, j, v) in d.entries() {
        normalized.set(i, j, d_max / g.link_degree(i) * v)?;
    }
    let m = normalized.max_entry();
    let max_row = (0..n).map(|i| normalized.row_sum(i)).fold(0.0, f64::max);
    let s = if m > 0.0 {
        (max_row / m).clamp(1.0, n as f64)
    } else {
        1.0
    };
    Ok(NormalizedDemandProfile {
        normalized,
        m,
        s,
        d_max,
    })
}

/// Each row of `D̃` sorted descending, ties broken by destination id. The
/// diagonal is left out, so ranks run `1 ..= n - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderedDemandView {
    /// `order[x][t - 1]` is the destination of rank `t`.
    pub order: Vec<Vec<usize>>,
    pub values: Vec<Vec<f64>>,
}

impl OrderedDemandView {
    /// `max_{x, t > s} (D̃_x^{(t)} - M s / t)`, or `-inf` without such ranks.
    pub fn tail_excess(&self, m: f64, s: f64) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for row in &self.values {
            for (idx, &v) in row.iter().enumerate() {
                let t = (idx + 1) as f64;
                if t > s {
                    worst = worst.max(v - m * s / t);
                }
            }
        }
        worst
    }
}

pub fn ordered_view(normalized: &DemandMatrix) -> OrderedDemandView {
    let n = normalized.n();
    let mut order = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for x in 0..n {
        let mut dests: Vec<usize> = (0..n).filter(|&y| y != x).collect();
        dests.sort_by(|&a, &b| {
            normalized
                .get(x, b)
                .total_cmp(&normalized.get(x, a))
                .then(a.cmp(&b))
        });
        values.push(dests.iter().map(|&y| normalized.get(x, y)).collect());
        order.push(dests);
    }
    OrderedDemandView { order, values }
}

/// Layer loads `W_e^{(t)} = (1/π_max) Σ_x π_x · (traversals of e by leg_x^{(t)})`
/// for ranks `t = 1 ..= n - 1`.
fn layer_loads<F>(g: &Graph, pi: &[f64], view: &OrderedDemandView, leg: F) -> Vec<EdgeLoad>
where
    F: Fn(usize, usize) -> Vec<usize>,
{
    let n = g.n();
    let pi_max = pi.iter().copied().fold(0.0, f64::max);
    (0..n.saturating_sub(1))
        .map(|t| {
            let mut load = EdgeLoad::zeros(g);
            for x in 0..n {
                let path = leg(x, view.order[x][t]);
                for w in path.windows(2) {
                    if w[0] == w[1] {
                        load.loops[w[0]] += pi[x] / pi_max;
                    } else if let Some(id) = g.link_between(w[0], w[1]) {
                        load.links[id] += pi[x] / pi_max;
                    }
                }
            }
            load
        })
        .collect()
}

/// Per-link check of the layer decomposition for one leg family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionCheck {
    /// Largest `lhs - rhs` over links (loads, not divided by capacity).
    pub max_excess: f64,
    pub holds: bool,
    /// `max_{t, e} W_e^{(t)}` per unit of capacity, loops included.
    pub max_layer_load: f64,
}

fn decomposition(
    g: &Graph,
    profile: &NormalizedDemandProfile,
    layers: &[EdgeLoad],
    leg_loads: &[f64],
) -> DecompositionCheck {
    let (m, s) = (profile.m, profile.s);
    let mut max_excess = f64::NEG_INFINITY;
    let mut holds = true;
    for (id, &lhs) in leg_loads.iter().enumerate() {
        let mut head = 0.0;
        let mut tail = 0.0;
        for (idx, layer) in layers.iter().enumerate() {
            let t = (idx + 1) as f64;
            if t <= s {
                head += layer.links[id];
            } else {
                tail += layer.links[id] / t;
            }
        }
        let rhs = m * (head + s * tail);
        max_excess = max_excess.max(lhs - rhs);
        if lhs > rhs + 1e-9 * rhs.max(1.0) {
            holds = false;
        }
    }
    DecompositionCheck {
        max_excess,
        holds,
        max_layer_load: layers.iter().map(|l| l.max_per_unit(g)).fold(0.0, f64::max),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub cong: f64,
    pub opt: f64,
    pub ratio: f64,
    /// `C (d_max ln² n + k ln n)`.
    pub bound: f64,
    pub flagged: bool,
    pub constant: f64,
    pub constant_origin: String,
    pub m: f64,
    pub s: f64,
    /// `M s / d_max`.
    pub opt_lower_bound: f64,
    pub first_leg: DecompositionCheck,
    pub second_leg: DecompositionCheck,
    /// `9 (2 + 2) ln n + 18 k² / d_max`, the per-rank union threshold.
    pub layer_threshold: f64,
}

/// Compares `CONG(D, policy)` with `opt` and checks the layer
/// decomposition for first and second legs separately.
pub fn ratio_audit(
    g: &Graph,
    d: &DemandMatrix,
    policy: &UnsplittablePolicy,
    opt: f64,
    constant: f64,
) -> Result<AuditReport> {
    check_graph(g, policy)?;
    let n = g.n();
    let report = unsplittable_congestion(g, d, policy)?;
    let r = ratio(report.max, opt)?;
    let profile = normalized_profile(g, d)?;
    let view = ordered_view(&profile.normalized);
    let walk = &policy.walk_graph;
    let pi = policy.profile.pi.to_vec();
    let k = policy.k();
    let ln_n = (n as f64).ln();
    let d_max = profile.d_max;
    let bound = constant * (d_max * ln_n * ln_n + k as f64 * ln_n);

    let mut alpha_loads = vec![0.0; g.link_count()];
    let mut beta_loads = vec![0.0; g.link_count()];
    for (x, y, dxy) in d.entries() {
        let p = policy.get(x, y).expect("pair exists");
        add_traversals(g, &p.alpha, dxy, &mut alpha_loads);
        add_traversals(g, &p.beta, dxy, &mut beta_loads);
    }
    let alpha_layers = layer_loads(walk, &pi, &view, |x, y| {
        policy.get(x, y).unwrap().alpha.clone()
    });
    let beta_layers = layer_loads(walk, &pi, &view, |x, y| {
        policy.get(x, y).unwrap().beta.clone()
    });
    Ok(AuditReport {
        cong: report.max,
        opt,
        ratio: r,
        bound,
        flagged: r > bound,
        constant,
        constant_origin: "empirical".into(),
        m: profile.m,
        s: profile.s,
        opt_lower_bound: profile.opt_lower_bound(),
        first_leg: decomposition(g, &profile, &alpha_layers, &alpha_loads),
        second_leg: decomposition(g, &profile, &beta_layers, &beta_loads),
        layer_threshold: tail_threshold(n, k, walk.max_degree(), 2.0),
    })
}
