//! Random-walk path sample space and two-leg path selection.
//!
//! Every vertex `x` starts `⌈m π_x⌉` walks of length `k` with
//! `m = ⌈24 ln n / π_min²⌉`. A walk is stored in the bucket of its unordered
//! endpoint pair together with its orientation, so a bucket `{x, y}` holds
//! walks started at either end. Paths live in one flat arena.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::eval::chernoff::{chernoff_check, ChernoffReport, DEFAULT_SLACK};
use crate::eval::demand::random_permutation;
use crate::graph::Graph;
use crate::seed::SeedTree;
use crate::spectral::SpectralProfile;

/// Fresh intermediates drawn before falling back to extra walks.
pub const MAX_REDRAWS: usize = 3;
/// Extra walks tried per endpoint before an empty bucket is an error.
pub const MAX_RESAMPLE_WALKS: usize = 1_000_000;

/// Walk transitions of one graph as cumulative weight tables.
#[derive(Debug, Clone)]
pub struct WalkSampler {
    /// `steps[x]` lists `(y, cumulative weight)`, loop included.
    steps: Vec<Vec<(usize, f64)>>,
}

impl WalkSampler {
    pub fn new(g: &Graph) -> Self {
        let steps = (0..g.n())
            .map(|x| {
                let mut acc = 0.0;
                let mut row: Vec<(usize, f64)> = g
                    .neighbors(x)
                    .iter()
                    .map(|&(y, id)| {
                        acc += g.links()[id].cap;
                        (y, acc)
                    })
                    .collect();
                if g.self_loop_f64(x) > 0.0 {
                    acc += g.self_loop_f64(x);
                    row.push((x, acc));
                }
                row
            })
            .collect();
        Self { steps }
    }

    pub fn step<R: Rng>(&self, x: usize, rng: &mut R) -> usize {
        let row = &self.steps[x];
        let total = row.last().map_or(0.0, |e| e.1);
        let u = rng.random::<f64>() * total;
        let i = row.partition_point(|e| e.1 <= u).min(row.len() - 1);
        row[i].0
    }

    /// Appends the `k` steps after `start` to `out` (which should already end
    /// with `start`).
    pub fn walk_into<R: Rng>(&self, start: usize, k: usize, rng: &mut R, out: &mut Vec<usize>) {
        let mut x = start;
        for _ in 0..k {
            x = self.step(x, rng);
            out.push(x);
        }
    }

    pub fn walk<R: Rng>(&self, start: usize, k: usize, rng: &mut R) -> Vec<usize> {
        let mut out = Vec::with_capacity(k + 1);
        out.push(start);
        self.walk_into(start, k, rng, &mut out);
        out
    }
}

/// Samples an index from cumulative weights.
fn sample_cumulative<R: Rng>(cumulative: &[f64], rng: &mut R) -> usize {
    let total = cumulative.last().copied().unwrap_or(0.0);
    let u = rng.random::<f64>() * total;
    cumulative
        .partition_point(|&c| c <= u)
        .min(cumulative.len() - 1)
}

/// `true` when every consecutive pair is a link or a loop of `g`.
pub fn is_valid_path(g: &Graph, path: &[usize]) -> bool {
    !path.is_empty()
        && path.iter().all(|&x| x < g.n())
        && path.windows(2).all(|w| g.is_step(w[0], w[1]))
}

fn bucket_key(n: usize, x: usize, y: usize) -> usize {
    let (a, b) = (x.min(y), x.max(y));
    a * n + b
}

/// `m = ⌈24 ln n / π_min²⌉`.
pub fn sample_size(n: usize, pi_min: f64) -> usize {
    (24.0 * (n as f64).ln() / (pi_min * pi_min)).ceil() as usize
}

/// The sample space `B_{x,y}` over all unordered pairs (including `x = y`).
#[derive(Debug, Clone)]
pub struct PathSpace {
    n: usize,
    m: usize,
    k: usize,
    seed: u64,
    /// Concatenated paths, `k + 1` vertices each.
    arena: Vec<usize>,
    /// Path ids per bucket key `min * n + max`.
    buckets: Vec<Vec<u32>>,
    walk_counts: Vec<usize>,
    pi_cumulative: Vec<f64>,
    sampler: Arc<WalkSampler>,
}

impl PathSpace {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sampler(&self) -> &WalkSampler {
        &self.sampler
    }

    /// Walks started at each vertex.
    pub fn walk_counts(&self) -> &[usize] {
        &self.walk_counts
    }

    pub fn total_walks(&self) -> usize {
        self.arena.len() / (self.k + 1)
    }

    pub fn path(&self, id: usize) -> &[usize] {
        let len = self.k + 1;
        &self.arena[id * len..(id + 1) * len]
    }

    pub fn paths(&self) -> impl Iterator<Item = &[usize]> {
        self.arena.chunks_exact(self.k + 1)
    }

    /// Paths stored for the unordered pair `{x, y}`, in their sampled
    /// orientation.
    pub fn bucket(&self, x: usize, y: usize) -> impl Iterator<Item = &[usize]> {
        self.buckets[bucket_key(self.n, x, y)]
            .iter()
            .map(|&id| self.path(id as usize))
    }

    pub fn bucket_len(&self, x: usize, y: usize) -> usize {
        self.buckets[bucket_key(self.n, x, y)].len()
    }

    /// Number of unordered pairs `{x, y}` (with `x <= y`) whose bucket is
    /// empty.
    pub fn empty_buckets(&self) -> usize {
        (0..self.n)
            .flat_map(|x| (x..self.n).map(move |y| (x, y)))
            .filter(|&(x, y)| self.bucket_len(x, y) == 0)
            .count()
    }

    /// Whether the (possibly reversed) path belongs to `B_{x,y}` for its
    /// endpoints.
    pub fn contains(&self, path: &[usize]) -> bool {
        if path.len() != self.k + 1 || path.iter().any(|&v| v >= self.n) {
            return false;
        }
        let (x, y) = (path[0], path[self.k]);
        self.bucket(x, y)
            .any(|p| p == path || p.iter().rev().eq(path.iter()))
    }

    /// `{m, k, seed, buckets: {"x-y": [[v0 .. vk], ...]}}`, nonempty buckets
    /// only, keys with `x <= y`.
    pub fn to_json(&self) -> Value {
        let mut buckets = BTreeMap::new();
        for x in 0..self.n {
            for y in x..self.n {
                if self.bucket_len(x, y) > 0 {
                    let paths: Vec<Value> = self.bucket(x, y).map(|p| json!(p)).collect();
                    buckets.insert(format!("{x}-{y}"), Value::Array(paths));
                }
            }
        }
        json!({
            "m": self.m,
            "k": self.k,
            "seed": self.seed,
            "buckets": buckets,
        })
    }

    /// A uniformly random member of `B_{from,to}` oriented to start at
    /// `from`. Falls back to fresh walks from either endpoint when the bucket
    /// is empty; returns the path and the number of extra walks used.
    fn draw_leg<R: Rng>(&self, from: usize, to: usize, rng: &mut R) -> Result<(Vec<usize>, usize)> {
        let ids = &self.buckets[bucket_key(self.n, from, to)];
        if !ids.is_empty() {
            let p = self.path(ids[rng.random_range(0..ids.len())] as usize);
            return Ok((orient(p, from), 0));
        }
        for attempt in 1..=MAX_RESAMPLE_WALKS {
            let start = if attempt % 2 == 1 { from } else { to };
            let p = self.sampler.walk(start, self.k, rng);
            let end = p[self.k];
            if (start == from && end == to) || (start == to && end == from) {
                return Ok((orient(&p, from), attempt));
            }
        }
        Err(Error::SampleSpace(format!(
            "no walk of length {} joins {from} and {to}",
            self.k
        )))
    }

    fn draw_intermediate<R: Rng>(&self, rng: &mut R) -> usize {
        sample_cumulative(&self.pi_cumulative, rng)
    }
}

fn orient(p: &[usize], from: usize) -> Vec<usize> {
    if p[0] == from {
        p.to_vec()
    } else {
        p.iter().rev().copied().collect()
    }
}

/// Runs all walks for the space. Walk streams are split per vertex, so the
/// result does not depend on the thread count.
pub fn build_sample_space(g: &Graph, profile: &SpectralProfile, seed: u64) -> Result<PathSpace> {
    let n = g.n();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "a sample space needs at least two vertices".into(),
        ));
    }
    g.require_connected()?;
    if profile.pi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: profile.pi.len(),
        });
    }
    if !(profile.lambda_bar < 1.0) {
        return Err(Error::NoMixing(profile.lambda_bar));
    }
    let k = profile.k;
    let m = sample_size(n, profile.pi_min);
    let sampler = Arc::new(WalkSampler::new(g));
    let seeds = SeedTree::new(seed);
    let walk_counts: Vec<usize> = profile
        .pi
        .iter()
        .map(|&p| (m as f64 * p).ceil() as usize)
        .collect();

    let per_vertex: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut rng: ChaCha8Rng = seeds.rng("walks", x as u64);
            let mut out = Vec::with_capacity(walk_counts[x] * (k + 1));
            for _ in 0..walk_counts[x] {
                out.push(x);
                sampler.walk_into(x, k, &mut rng, &mut out);
            }
            out
        })
        .collect();

    let arena: Vec<usize> = per_vertex.concat();
    let mut buckets = vec![Vec::new(); n * n];
    for (id, p) in arena.chunks_exact(k + 1).enumerate() {
        buckets[bucket_key(n, p[0], p[k])].push(id as u32);
    }
    let mut acc = 0.0;
    let pi_cumulative = profile
        .pi
        .iter()
        .map(|&p| {
            acc += p;
            acc
        })
        .collect();
    Ok(PathSpace {
        n,
        m,
        k,
        seed,
        arena,
        buckets,
        walk_counts,
        pi_cumulative,
        sampler,
    })
}

/// `γ = α ∗ β` through the intermediate `r`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoLegPath {
    pub source: usize,
    pub target: usize,
    pub intermediate: usize,
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    /// Intermediates redrawn because a bucket was empty.
    pub redraws: usize,
    /// Extra walks sampled when every redraw still met an empty bucket.
    pub resampled: usize,
}

impl TwoLegPath {
    /// The concatenated path, `2k + 1` vertices.
    pub fn gamma(&self) -> Vec<usize> {
        let mut g = self.alpha.clone();
        g.extend_from_slice(&self.beta[1..]);
        g
    }
}

/// Draws `r ~ π`, `α ∈ B_{x,r}` and `β ∈ B_{r,y}` from `rng`.
pub fn select_path_with<R: Rng>(
    space: &PathSpace,
    x: usize,
    y: usize,
    rng: &mut R,
) -> Result<TwoLegPath> {
    let n = space.n;
    if x >= n || y >= n {
        return Err(Error::VertexOutOfRange {
            vertex: x.max(y),
            n,
        });
    }
    if x == y {
        return Err(Error::InvalidParameter(format!(
            "source and destination coincide at {x}"
        )));
    }
    let mut r = space.draw_intermediate(rng);
    let mut redraws = 0;
    while redraws < MAX_REDRAWS && (space.bucket_len(x, r) == 0 || space.bucket_len(r, y) == 0) {
        r = space.draw_intermediate(rng);
        redraws += 1;
    }
    let (alpha, ra) = space.draw_leg(x, r, rng)?;
    let (beta, rb) = space.draw_leg(r, y, rng)?;
    Ok(TwoLegPath {
        source: x,
        target: y,
        intermediate: r,
        alpha,
        beta,
        redraws,
        resampled: ra + rb,
    })
}

/// [`select_path_with`] on the stream `("select", x * n + y)` of `seed`.
pub fn select_path(space: &PathSpace, x: usize, y: usize, seed: u64) -> Result<TwoLegPath> {
    let mut rng = SeedTree::new(seed).rng("select", (x * space.n + y) as u64);
    select_path_with(space, x, y, &mut rng)
}

/// Per-edge leg counts. Links are indexed like `g.links()`, loops by vertex.
/// Every traversal counts, so a path crossing an edge twice adds twice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeLoad {
    pub links: Vec<f64>,
    pub loops: Vec<f64>,
}

impl EdgeLoad {
    pub fn zeros(g: &Graph) -> Self {
        Self {
            links: vec![0.0; g.link_count()],
            loops: vec![0.0; g.n()],
        }
    }

    /// `Σ_e W_e`.
    pub fn total(&self) -> f64 {
        self.links.iter().sum::<f64>() + self.loops.iter().sum::<f64>()
    }

    fn add_path(&mut self, g: &Graph, path: &[usize], weight: f64) {
        for w in path.windows(2) {
            if w[0] == w[1] {
                self.loops[w[0]] += weight;
            } else if let Some(id) = g.link_between(w[0], w[1]) {
                self.links[id] += weight;
            }
        }
    }

    /// Load per unit of capacity: a link of capacity `c` stands for `c`
    /// parallel unit edges sharing its traversals, loops likewise. Loops of
    /// capacity zero are dropped. Entries are `(u, v, value)`.
    pub fn per_unit(&self, g: &Graph) -> Vec<(usize, usize, f64)> {
        let mut out: Vec<(usize, usize, f64)> = g
            .links()
            .iter()
            .zip(&self.links)
            .map(|(l, &w)| (l.u, l.v, w / l.cap))
            .collect();
        for x in 0..g.n() {
            let c = g.self_loop_f64(x);
            if c > 0.0 {
                out.push((x, x, self.loops[x] / c));
            }
        }
        out
    }

    pub fn max_per_unit(&self, g: &Graph) -> f64 {
        self.per_unit(g).iter().map(|e| e.2).fold(0.0, f64::max)
    }

    /// CSV `u,v,load` with loops as `x,x`.
    pub fn to_csv_string(&self, g: &Graph) -> String {
        let mut s = String::from("u,v,load\n");
        for (l, w) in g.links().iter().zip(&self.links) {
            let _ = writeln!(s, "{},{},{}", l.u, l.v, w);
        }
        for x in 0..g.n() {
            if g.self_loop_f64(x) > 0.0 {
                let _ = writeln!(s, "{x},{x},{}", self.loops[x]);
            }
        }
        s
    }
}

fn leg_load(g: &Graph, pi: &[f64], legs: &[Vec<usize>]) -> EdgeLoad {
    let pi_max = pi.iter().copied().fold(0.0, f64::max);
    let mut load = EdgeLoad::zeros(g);
    for (x, path) in legs.iter().enumerate() {
        load.add_path(g, path, pi[x] / pi_max);
    }
    load
}

/// `W_e = (1 / π_max) Σ_x π_x · (traversals of e by α_x)` for a leg
/// assignment `legs[x] = α_x`. Every leg must start at its vertex and
/// belong to the space.
pub fn edge_load(
    space: &PathSpace,
    g: &Graph,
    pi: &[f64],
    legs: &[Vec<usize>],
) -> Result<EdgeLoad> {
    if legs.len() != space.n || pi.len() != space.n || g.n() != space.n {
        return Err(Error::DimensionMismatch {
            expected: space.n,
            got: legs.len(),
        });
    }
    for (x, path) in legs.iter().enumerate() {
        if path.first() != Some(&x) {
            return Err(Error::InvalidPath(format!("leg {x} does not start at {x}")));
        }
        if !space.contains(path) {
            return Err(Error::InvalidPath(format!(
                "leg {x} is not a member of the sample space"
            )));
        }
    }
    Ok(leg_load(g, pi, legs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadBounds {
    /// `(2/3) k / d_max`.
    pub lower: f64,
    /// `6 k / d_max`.
    pub upper: f64,
    /// `k / π_max`.
    pub expected_total: f64,
}

/// Summary of one leg family across trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegStatistics {
    /// Mean per-unit load per edge, `(u, v, μ̂_e)`.
    pub mean: Vec<(usize, usize, f64)>,
    pub total: f64,
    pub min: f64,
    pub max: f64,
    pub spread: f64,
    pub tail: ChernoffReport,
    /// Largest per-unit load of every trial.
    pub trial_max: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadStatistics {
    pub trials: usize,
    pub k: usize,
    pub d_max: f64,
    pub bounds: LoadBounds,
    /// `9 (2 + r) ln n + 18 k² / d_max`.
    pub tail_threshold: f64,
    pub tail_r: f64,
    pub first_leg: LegStatistics,
    pub second_leg: LegStatistics,
    /// Trials whose sample space had an empty bucket.
    pub empty_bucket_builds: usize,
    pub redraws: usize,
    pub resampled: usize,
}

/// `9 (2 + r) ln n + 18 k² / d_max`.
pub fn tail_threshold(n: usize, k: usize, d_max: f64, r: f64) -> f64 {
    9.0 * (2.0 + r) * (n as f64).ln() + 18.0 * (k * k) as f64 / d_max
}

struct TrialOutcome {
    first: EdgeLoad,
    second: EdgeLoad,
    empty: bool,
    redraws: usize,
    resampled: usize,
}

/// One fresh sample space and leg assignment: every `x` routes toward a
/// random permutation target through a `π`-random intermediate.
fn load_trial(
    g: &Graph,
    profile: &SpectralProfile,
    seeds: &SeedTree,
    t: u64,
) -> Result<TrialOutcome> {
    let n = g.n();
    let space = build_sample_space(g, profile, seeds.child_seed("space", t))?;
    let sigma = random_permutation(n, seeds, t);
    let mut rng = seeds.rng("legs", t);
    let mut alphas = Vec::with_capacity(n);
    let mut betas = Vec::with_capacity(n);
    let (mut redraws, mut resampled) = (0, 0);
    for x in 0..n {
        let y = sigma[x];
        if y == x {
            // A fixed point still places a first leg; its second leg returns.
            let r = space.draw_intermediate(&mut rng);
            let (a, ra) = space.draw_leg(x, r, &mut rng)?;
            let (b, rb) = space.draw_leg(r, x, &mut rng)?;
            resampled += ra + rb;
            alphas.push(a);
            betas.push(b);
        } else {
            let p = select_path_with(&space, x, y, &mut rng)?;
            redraws += p.redraws;
            resampled += p.resampled;
            alphas.push(p.alpha);
            betas.push(p.beta);
        }
    }
    // β legs are weighted by the vertex whose packet uses them.
    Ok(TrialOutcome {
        first: leg_load(g, &profile.pi, &alphas),
        second: leg_load(g, &profile.pi, &betas),
        empty: space.empty_buckets() > 0,
        redraws,
        resampled,
    })
}

fn summarize(g: &Graph, loads: &[&EdgeLoad], threshold: f64, n: usize) -> Result<LegStatistics> {
    let trials = loads.len() as f64;
    let mut mean = EdgeLoad::zeros(g);
    for l in loads {
        for (a, b) in mean.links.iter_mut().zip(&l.links) {
            *a += b / trials;
        }
        for (a, b) in mean.loops.iter_mut().zip(&l.loops) {
            *a += b / trials;
        }
    }
    let per_unit = mean.per_unit(g);
    let min = per_unit.iter().map(|e| e.2).fold(f64::INFINITY, f64::min);
    let max = per_unit.iter().map(|e| e.2).fold(0.0, f64::max);
    let trial_max: Vec<f64> = loads.iter().map(|l| l.max_per_unit(g)).collect();
    let tail = chernoff_check(&trial_max, threshold, 1.0 / n as f64, DEFAULT_SLACK)?;
    Ok(LegStatistics {
        total: mean.total(),
        spread: if min > 0.0 { max / min } else { f64::INFINITY },
        mean: per_unit,
        min,
        max,
        tail,
        trial_max,
    })
}

/// Monte Carlo estimates of `E[W_e]` over fresh sample spaces, for first
/// and second legs separately. `g` is the graph the walks run on.
pub fn load_statistics(
    g: &Graph,
    profile: &SpectralProfile,
    trials: usize,
    seed: u64,
    tail_r: f64,
) -> Result<LoadStatistics> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let seeds = SeedTree::new(seed);
    let outcomes = (0..trials as u64)
        .into_par_iter()
        .map(|t| load_trial(g, profile, &seeds, t))
        .collect::<Result<Vec<_>>>()?;
    let n = g.n();
    let k = profile.k;
    let d_max = g.max_degree();
    let threshold = tail_threshold(n, k, d_max, tail_r);
    let firsts: Vec<&EdgeLoad> = outcomes.iter().map(|o| &o.first).collect();
    let seconds: Vec<&EdgeLoad> = outcomes.iter().map(|o| &o.second).collect();
    Ok(LoadStatistics {
        trials,
        k,
        d_max,
        bounds: LoadBounds {
            lower: 2.0 / 3.0 * k as f64 / d_max,
            upper: 6.0 * k as f64 / d_max,
            expected_total: k as f64 / profile.pi_max,
        },
        tail_threshold: threshold,
        tail_r,
        first_leg: summarize(g, &firsts, threshold, n)?,
        second_leg: summarize(g, &seconds, threshold, n)?,
        empty_bucket_builds: outcomes.iter().filter(|o| o.empty).count(),
        redraws: outcomes.iter().map(|o| o.redraws).sum(),
        resampled: outcomes.iter().map(|o| o.resampled).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{complete, hypercube};
    use crate::graph::{build_graph, Capacity};
    use crate::spectral::{lazify_if_needed, stationary_distribution};

    fn setup(g: &Graph) -> (Graph, SpectralProfile) {
        lazify_if_needed(g).unwrap()
    }

    fn star(leaves: usize) -> Graph {
        let one = Capacity::from_integer(1);
        build_graph(&(1..=leaves).map(|l| (0, l, one)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn hypercube_walk_counts() {
        let (walk, profile) = setup(&hypercube(3).unwrap());
        assert!(profile.lazified);
        let space = build_sample_space(&walk, &profile, 1).unwrap();
        let m = space.m();
        assert_eq!(m, sample_size(8, 0.125));
        let per = (m as f64 / 8.0).ceil() as usize;
        assert_eq!(space.total_walks(), 8 * per);
        assert!(space.paths().all(|p| p.len() == profile.k + 1));
        assert!(space.paths().all(|p| is_valid_path(&walk, p)));
    }

    #[test]
    fn buckets_match_endpoints() {
        let (walk, profile) = setup(&complete(5).unwrap());
        let space = build_sample_space(&walk, &profile, 3).unwrap();
        let k = space.k();
        for x in 0..5 {
            for y in x..5 {
                for p in space.bucket(x, y) {
                    let mut ends = [p[0], p[k]];
                    ends.sort();
                    assert_eq!(ends, [x, y]);
                }
            }
        }
        let stored: usize = (0..5)
            .flat_map(|x| (x..5).map(move |y| (x, y)))
            .map(|(x, y)| space.bucket_len(x, y))
            .sum();
        assert_eq!(stored, space.total_walks());
    }

    #[test]
    fn construction_is_deterministic() {
        let (walk, profile) = setup(&hypercube(3).unwrap());
        let a = build_sample_space(&walk, &profile, 9).unwrap();
        let b = build_sample_space(&walk, &profile, 9).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(
            select_path(&a, 0, 5, 2).unwrap(),
            select_path(&b, 0, 5, 2).unwrap()
        );
        let c = build_sample_space(&walk, &profile, 10).unwrap();
        assert_ne!(a.to_json(), c.to_json());
    }

    #[test]
    fn selected_paths_have_shape() {
        let (walk, profile) = setup(&hypercube(3).unwrap());
        let space = build_sample_space(&walk, &profile, 4).unwrap();
        let k = space.k();
        for y in 1..8 {
            let p = select_path(&space, 0, y, 11).unwrap();
            let gamma = p.gamma();
            assert_eq!(gamma.len(), 2 * k + 1);
            assert_eq!((gamma[0], gamma[2 * k]), (0, y));
            assert_eq!(gamma[k], p.intermediate);
            assert!(is_valid_path(&walk, &gamma));
            assert!(space.contains(&p.alpha) && space.contains(&p.beta));
        }
        assert!(select_path(&space, 3, 3, 1).is_err());
    }

    #[test]
    fn intermediates_follow_pi_on_a_star() {
        let g = star(4);
        let (walk, profile) = setup(&g);
        let space = build_sample_space(&walk, &profile, 5).unwrap();
        let pi = stationary_distribution(&walk).unwrap();
        let mut rng = SeedTree::new(6).rng("star", 0);
        let draws = 10_000;
        let mut counts = [0usize; 5];
        for _ in 0..draws {
            counts[select_path_with(&space, 1, 2, &mut rng)
                .unwrap()
                .intermediate] += 1;
        }
        let tv: f64 = counts
            .iter()
            .zip(pi.iter())
            .map(|(&c, &p)| (c as f64 / draws as f64 - p).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.05, "total variation {tv}");
    }

    #[test]
    fn singleton_bucket_is_used() {
        let (walk, profile) = setup(&complete(3).unwrap());
        let mut space = build_sample_space(&walk, &profile, 1).unwrap();
        let k = space.k();
        let only: Vec<usize> = space.bucket(0, 1).next().unwrap().to_vec();
        let id = space.buckets[bucket_key(3, 0, 1)][0];
        space.buckets[bucket_key(3, 0, 1)] = vec![id];
        let mut rng = SeedTree::new(1).rng("t", 0);
        let (leg, extra) = space.draw_leg(0, 1, &mut rng).unwrap();
        assert_eq!(extra, 0);
        assert_eq!(leg, orient(&only, 0));
        assert_eq!((leg[0], leg[k]), (0, 1));
    }

    #[test]
    fn empty_bucket_falls_back() {
        let (walk, profile) = setup(&complete(3).unwrap());
        let mut space = build_sample_space(&walk, &profile, 1).unwrap();
        space.buckets[bucket_key(3, 0, 2)].clear();
        let mut rng = SeedTree::new(2).rng("t", 0);
        let (leg, extra) = space.draw_leg(2, 0, &mut rng).unwrap();
        assert!(extra >= 1);
        assert_eq!((leg[0], leg[space.k()]), (2, 0));
        assert!(is_valid_path(&walk, &leg));
    }

    #[test]
    fn edge_load_examples() {
        let (walk, profile) = setup(&hypercube(3).unwrap());
        let space = build_sample_space(&walk, &profile, 8).unwrap();
        let pi = profile.pi.to_vec();
        let mut rng = SeedTree::new(1).rng("legs", 0);
        let legs: Vec<Vec<usize>> = (0..8)
            .map(|x| space.draw_leg(x, (x + 1) % 8, &mut rng).unwrap().0)
            .collect();
        let load = edge_load(&space, &walk, &pi, &legs).unwrap();
        // Regular graph: W_e counts traversals.
        assert!(load.links.iter().all(|w| w.fract() == 0.0));
        assert!((load.total() - (8 * space.k()) as f64).abs() < 1e-9);
        let mut touched = vec![false; walk.link_count()];
        for p in &legs {
            for w in p.windows(2) {
                if let Some(id) = walk.link_between(w[0], w[1]) {
                    touched[id] = true;
                }
            }
        }
        for (id, t) in touched.iter().enumerate() {
            if !t {
                assert_eq!(load.links[id], 0.0);
            }
        }
        let mut bad = legs.clone();
        bad[0] = legs[1].clone();
        assert!(edge_load(&space, &walk, &pi, &bad).is_err());
        bad[0] = vec![0; space.k()];
        assert!(edge_load(&space, &walk, &pi, &bad).is_err());
    }

    #[test]
    fn star_center_leg_weight() {
        let g = star(3);
        let (walk, profile) = setup(&g);
        let pi = profile.pi.to_vec();
        let mut load = EdgeLoad::zeros(&walk);
        load.add_path(&walk, &[0, 1], pi[0] / pi[0]);
        assert_eq!(load.links[walk.link_between(0, 1).unwrap()], 1.0);
    }

    #[test]
    fn csv_lists_links_and_loops() {
        let (walk, _) = setup(&hypercube(2).unwrap());
        let load = EdgeLoad::zeros(&walk);
        let csv = load.to_csv_string(&walk);
        assert!(csv.starts_with("u,v,load\n"));
        assert_eq!(csv.lines().count(), 1 + walk.link_count() + 4);
    }

    #[test]
    fn load_statistics_total_matches() {
        let (walk, profile) = setup(&hypercube(3).unwrap());
        let stats = load_statistics(&walk, &profile, 20, 1, 1.0).unwrap();
        let want = stats.bounds.expected_total;
        assert!((stats.first_leg.total - want).abs() / want < 1e-9);
        assert!(load_statistics(&walk, &profile, 0, 1, 1.0).is_err());
    }
}
