//! Synchronous store-and-forward simulation of permutation routing.
//!
//! Vertex `x` sends one packet to `σ(x)` along a fixed path. In each round
//! every waiting packet asks for its next edge; an edge admits one packet per
//! round (per direction when configured), and the smallest source id wins.
//! Loop steps always advance and use no capacity.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::demand::{random_permutation, validate_permutation};
use crate::graph::Graph;
use crate::paths::{build_sample_space, is_valid_path, select_path_with};
use crate::seed::SeedTree;
use crate::spectral::lazify_if_needed;

/// A bijection on `[n]`; fixed points send nothing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationDemand {
    sigma: Vec<usize>,
}

impl PermutationDemand {
    pub fn new(sigma: Vec<usize>) -> Result<Self> {
        validate_permutation(&sigma)?;
        Ok(Self { sigma })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            sigma: (0..n).collect(),
        }
    }

    pub fn random(n: usize, seeds: &SeedTree, index: u64) -> Self {
        Self {
            sigma: random_permutation(n, seeds, index),
        }
    }

    pub fn n(&self) -> usize {
        self.sigma.len()
    }

    pub fn target(&self, x: usize) -> usize {
        self.sigma[x]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.sigma
    }

    /// Parses whitespace- or comma-separated targets, or a JSON array.
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim();
        let sigma: Vec<usize> = if trimmed.starts_with('[') {
            serde_json::from_str(trimmed)?
        } else {
            trimmed
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse().map_err(|_| Error::Parse {
                        line: 0,
                        msg: format!("not a vertex id: {t:?}"),
                    })
                })
                .collect::<Result<_>>()?
        };
        Self::new(sigma)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Give each direction of a link its own unit capacity.
    pub per_direction: bool,
    pub record_trace: bool,
}

/// One packet crossing one step in one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub round: usize,
    pub packet: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    /// Largest arrival time, zero without packets.
    pub delay: usize,
    /// Arrival round per source; `None` for fixed points.
    pub arrivals: Vec<Option<usize>>,
    /// Most packets waiting on one link in one round, keyed `"u-v"`.
    pub peak_queue: BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceEvent>>,
}

impl SimulationResult {
    /// CSV `round,packet,u,v`.
    pub fn trace_csv(&self) -> Option<String> {
        self.trace.as_ref().map(|events| {
            let mut s = String::from("round,packet,u,v\n");
            for e in events {
                let _ = writeln!(s, "{},{},{},{}", e.round, e.packet, e.from, e.to);
            }
            s
        })
    }

    /// The result without its trace.
    pub fn summary(&self) -> Self {
        Self {
            trace: None,
            ..self.clone()
        }
    }
}

fn check_paths(g: &Graph, sigma: &PermutationDemand, paths: &[Vec<usize>]) -> Result<()> {
    let n = g.n();
    if sigma.n() != n || paths.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if sigma.n() != n {
                sigma.n()
            } else {
                paths.len()
            },
        });
    }
    for (x, p) in paths.iter().enumerate() {
        let y = sigma.target(x);
        if y == x {
            continue;
        }
        if p.first() != Some(&x) || p.last() != Some(&y) {
            return Err(Error::InvalidPath(format!(
                "path of packet {x} does not join {x} and {y}"
            )));
        }
        if !is_valid_path(g, p) {
            return Err(Error::InvalidPath(format!(
                "path of packet {x} leaves the graph"
            )));
        }
    }
    Ok(())
}

fn resource(g: &Graph, from: usize, to: usize, per_direction: bool) -> usize {
    let id = g.link_between(from, to).expect("validated path");
    if per_direction {
        2 * id + usize::from(from > to)
    } else {
        id
    }
}

fn link_key(g: &Graph, id: usize) -> String {
    let l = &g.links()[id];
    format!("{}-{}", l.u, l.v)
}

/// Runs rounds until every packet has arrived.
pub fn simulate(
    g: &Graph,
    sigma: &PermutationDemand,
    paths: &[Vec<usize>],
    config: SimulationConfig,
) -> Result<SimulationResult> {
    check_paths(g, sigma, paths)?;
    let n = g.n();
    let active: Vec<usize> = (0..n).filter(|&x| sigma.target(x) != x).collect();
    let mut pos = vec![0usize; n];
    let mut arrivals: Vec<Option<usize>> = vec![None; n];
    let mut peak = vec![0usize; g.link_count()];
    let mut trace = config.record_trace.then(Vec::new);
    let slots = if config.per_direction { 2 } else { 1 } * g.link_count();
    let mut taken = vec![usize::MAX; slots];
    let mut waiting = vec![0usize; g.link_count()];

    let mut remaining: Vec<usize> = Vec::new();
    for &x in &active {
        if paths[x].len() == 1 {
            arrivals[x] = Some(0);
        } else {
            remaining.push(x);
        }
    }
    let mut round = 0;
    while !remaining.is_empty() {
        round += 1;
        waiting.iter_mut().for_each(|w| *w = 0);
        // `remaining` is sorted by id, so the first claimant has priority.
        let mut moves = Vec::with_capacity(remaining.len());
        for &x in &remaining {
            let (from, to) = (paths[x][pos[x]], paths[x][pos[x] + 1]);
            if from == to {
                moves.push(x);
                continue;
            }
            waiting[g.link_between(from, to).expect("validated path")] += 1;
            let r = resource(g, from, to, config.per_direction);
            if taken[r] != round {
                taken[r] = round;
                moves.push(x);
            }
        }
        for (p, w) in peak.iter_mut().zip(&waiting) {
            *p = (*p).max(*w);
        }
        for &x in &moves {
            if let Some(t) = trace.as_mut() {
                t.push(TraceEvent {
                    round,
                    packet: x,
                    from: paths[x][pos[x]],
                    to: paths[x][pos[x] + 1],
                });
            }
            pos[x] += 1;
            if pos[x] + 1 == paths[x].len() {
                arrivals[x] = Some(round);
            }
        }
        remaining.retain(|&x| arrivals[x].is_none());
    }
    let peak_queue = peak
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0)
        .map(|(id, &p)| (link_key(g, id), p))
        .collect();
    Ok(SimulationResult {
        delay: arrivals.iter().flatten().copied().max().unwrap_or(0),
        arrivals,
        peak_queue,
        trace,
    })
}

/// Rebuilds the result from a recorded trace, checking that every event is
/// the packet's next step, that no resource is used twice in a round, and
/// that no packet is skipped while its step was free. Errors on the first
/// inconsistency.
pub fn replay(
    g: &Graph,
    sigma: &PermutationDemand,
    paths: &[Vec<usize>],
    trace: &[TraceEvent],
    config: SimulationConfig,
) -> Result<SimulationResult> {
    check_paths(g, sigma, paths)?;
    let n = g.n();
    let mut pos = vec![0usize; n];
    let mut arrivals: Vec<Option<usize>> = (0..n)
        .map(|x| (sigma.target(x) != x && paths[x].len() == 1).then_some(0))
        .collect();
    let mut peak = vec![0usize; g.link_count()];
    let last_round = trace.last().map_or(0, |e| e.round);
    let mut events = trace.iter().peekable();
    for round in 1..=last_round {
        let mut used: BTreeMap<usize, usize> = BTreeMap::new();
        let mut moved = vec![false; n];
        let mut waiting = vec![0usize; g.link_count()];
        for x in 0..n {
            if sigma.target(x) != x && arrivals[x].is_none() {
                let (from, to) = (paths[x][pos[x]], paths[x][pos[x] + 1]);
                if from != to {
                    waiting[g.link_between(from, to).expect("validated path")] += 1;
                }
            }
        }
        while let Some(e) = events.next_if(|e| e.round == round) {
            let x = e.packet;
            if x >= n || sigma.target(x) == x || arrivals[x].is_some() || moved[x] {
                return Err(Error::TraceMismatch(format!(
                    "round {round}: packet {x} cannot move"
                )));
            }
            let (from, to) = (paths[x][pos[x]], paths[x][pos[x] + 1]);
            if (e.from, e.to) != (from, to) {
                return Err(Error::TraceMismatch(format!(
                    "round {round}: packet {x} moved {}->{} instead of {from}->{to}",
                    e.from, e.to
                )));
            }
            if from != to {
                let r = resource(g, from, to, config.per_direction);
                if let Some(other) = used.insert(r, x) {
                    return Err(Error::TraceMismatch(format!(
                        "round {round}: packets {other} and {x} share a link"
                    )));
                }
            }
            moved[x] = true;
        }
        for x in 0..n {
            if sigma.target(x) == x || arrivals[x].is_some() {
                continue;
            }
            let (from, to) = (paths[x][pos[x]], paths[x][pos[x] + 1]);
            let free =
                from == to || !used.contains_key(&resource(g, from, to, config.per_direction));
            if !moved[x] && free {
                return Err(Error::TraceMismatch(format!(
                    "round {round}: packet {x} idled on a free step"
                )));
            }
            if moved[x] {
                pos[x] += 1;
                if pos[x] + 1 == paths[x].len() {
                    arrivals[x] = Some(round);
                }
            }
        }
        for (p, w) in peak.iter_mut().zip(&waiting) {
            *p = (*p).max(*w);
        }
    }
    if events.next().is_some() {
        return Err(Error::TraceMismatch("events out of round order".into()));
    }
    if (0..n).any(|x| sigma.target(x) != x && arrivals[x].is_none()) {
        return Err(Error::TraceMismatch(
            "trace ends before every packet arrived".into(),
        ));
    }
    let peak_queue = peak
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0)
        .map(|(id, &p)| (link_key(g, id), p))
        .collect();
    Ok(SimulationResult {
        delay: arrivals.iter().flatten().copied().max().unwrap_or(0),
        arrivals,
        peak_queue,
        trace: Some(trace.to_vec()),
    })
}

/// Largest number of link traversals by all paths on one link. Fixed points
/// contribute nothing.
pub fn max_coincidence(g: &Graph, sigma: &PermutationDemand, paths: &[Vec<usize>]) -> usize {
    let mut count = vec![0usize; g.link_count()];
    for (x, p) in paths.iter().enumerate() {
        if sigma.target(x) == x {
            continue;
        }
        for w in p.windows(2) {
            if let Some(id) = g.link_between(w[0], w[1]) {
                count[id] += 1;
            }
        }
    }
    count.into_iter().max().unwrap_or(0)
}

/// Output of routing one permutation through the sample space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutedPermutation {
    pub k: usize,
    pub lazified: bool,
    pub result: SimulationResult,
    /// Largest per-link traversal count over all paths.
    pub max_coincidence: usize,
    /// `2k (1 + max_coincidence)`.
    pub bound: usize,
    pub paths: Vec<Vec<usize>>,
    pub redraws: usize,
    pub resampled: usize,
}

/// Lazifies when that helps, builds the sample space, picks `γ_{x,σ(x)}`
/// for every `x` and simulates on the walk graph.
pub fn route_permutation(
    g: &Graph,
    sigma: &PermutationDemand,
    seed: u64,
    config: SimulationConfig,
) -> Result<RoutedPermutation> {
    let (walk, profile) = lazify_if_needed(g)?;
    let seeds = SeedTree::new(seed);
    let space = build_sample_space(&walk, &profile, seeds.child_seed("space", 0))?;
    route_in_space(&walk, &space, profile.lazified, sigma, &seeds, config)
}

fn route_in_space(
    walk: &Graph,
    space: &crate::paths::PathSpace,
    lazified: bool,
    sigma: &PermutationDemand,
    seeds: &SeedTree,
    config: SimulationConfig,
) -> Result<RoutedPermutation> {
    let n = walk.n();
    if sigma.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: sigma.n(),
        });
    }
    let selections = (0..n)
        .into_par_iter()
        .map(|x| {
            let y = sigma.target(x);
            if y == x {
                return Ok((vec![x], 0, 0));
            }
            let mut rng = seeds.rng("select", x as u64);
            let p = select_path_with(space, x, y, &mut rng)?;
            Ok((p.gamma(), p.redraws, p.resampled))
        })
        .collect::<Result<Vec<_>>>()?;
    let redraws = selections.iter().map(|s| s.1).sum();
    let resampled = selections.iter().map(|s| s.2).sum();
    let paths: Vec<Vec<usize>> = selections.into_iter().map(|s| s.0).collect();
    let result = simulate(walk, sigma, &paths, config)?;
    let max_coincidence = max_coincidence(walk, sigma, &paths);
    let k = space.k();
    Ok(RoutedPermutation {
        k,
        lazified,
        result,
        max_coincidence,
        bound: 2 * k * (1 + max_coincidence),
        paths,
        redraws,
        resampled,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayRun {
    pub delay: usize,
    pub max_coincidence: usize,
    pub bound: usize,
    /// `delay / (2k ln n + (2k)² / d)`, regular graphs only.
    pub normalized: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayStatistics {
    pub n: usize,
    pub k: usize,
    pub runs: Vec<DelayRun>,
    pub max_delay: usize,
    pub mean_delay: f64,
    pub max_normalized: Option<f64>,
    pub bound_violations: usize,
}

/// Routes `count` random permutations through one sample space.
pub fn delay_statistics(g: &Graph, count: usize, seed: u64) -> Result<DelayStatistics> {
    if count == 0 {
        return Err(Error::InvalidParameter("count must be at least 1".into()));
    }
    let (walk, profile) = lazify_if_needed(g)?;
    let seeds = SeedTree::new(seed);
    let space = build_sample_space(&walk, &profile, seeds.child_seed("space", 0))?;
    let n = g.n();
    let k = profile.k;
    let scale = g.is_regular().then(|| {
        let d = g.max_degree();
        let two_k = 2.0 * k as f64;
        two_k * (n as f64).ln() + two_k * two_k / d
    });
    let runs = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let sigma = PermutationDemand::random(n, &seeds, i);
            let run_seeds = seeds.subtree("run", i);
            let r = route_in_space(
                &walk,
                &space,
                profile.lazified,
                &sigma,
                &run_seeds,
                SimulationConfig::default(),
            )?;
            Ok(DelayRun {
                delay: r.result.delay,
                max_coincidence: r.max_coincidence,
                bound: r.bound,
                normalized: scale.map(|s| r.result.delay as f64 / s),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DelayStatistics {
        n,
        k,
        max_delay: runs.iter().map(|r| r.delay).max().unwrap_or(0),
        mean_delay: runs.iter().map(|r| r.delay as f64).sum::<f64>() / count as f64,
        max_normalized: runs.iter().filter_map(|r| r.normalized).reduce(f64::max),
        bound_violations: runs.iter().filter(|r| r.delay > r.bound).count(),
        runs,
    })
}
