//! Statistical invariant suites with per-check measured values.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::demand::{demands, DemandKind};
use crate::eval::opt::opt_lower_bound_degree;
use crate::generators::{complete, cycle, grid, hypercube, random_regular};
use crate::graph::Graph;
use crate::packet::delay_statistics;
use crate::paths::{build_sample_space, is_valid_path, load_statistics};
use crate::seed::SeedTree;
use crate::spectral::{lazify_if_needed, TransitionMatrix};
use crate::splittable::{
    peak_step, reverse_operator, route_splittable, rw_congestion, PolicyOptions,
};
use crate::unsplittable::{build_policy, ratio_audit, DEFAULT_AUDIT_CONSTANT};

pub const SUITES: &[&str] = &["lemmas"];

/// Below this many trials the statistical checks are not meaningful.
pub const MIN_TRIALS: usize = 100;

pub const DEFAULT_TRIALS: usize = 1000;

const TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub limit: f64,
    pub detail: String,
}

impl Check {
    fn at_most(name: &str, measured: f64, limit: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: measured <= limit,
            measured,
            limit,
            detail,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub suite: String,
    pub seed: u64,
    pub trials: usize,
    pub warnings: Vec<String>,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs the named suite.
pub fn run_suite(name: &str, seed: u64, trials: usize) -> Result<VerifyReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let checks = match name {
        "lemmas" => lemma_checks(seed, trials)?,
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown suite `{other}` (known: {})",
                SUITES.join(", ")
            )))
        }
    };
    let mut warnings = Vec::new();
    if trials < MIN_TRIALS {
        let msg = format!(
            "insufficient samples: {trials} trials (at least {MIN_TRIALS} needed for the statistical checks)"
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(VerifyReport {
        suite: name.into(),
        seed,
        trials,
        warnings,
        checks,
    })
}

fn deterministic_suite(seed: u64) -> Result<Vec<Graph>> {
    Ok(vec![
        complete(4)?,
        cycle(5)?,
        hypercube(3)?,
        random_regular(10, 3, seed)?,
    ])
}

fn lemma_checks(seed: u64, trials: usize) -> Result<Vec<Check>> {
    let seeds = SeedTree::new(seed);
    let mut checks = Vec::new();

    let mut inv = 0.0f64;
    let mut row = 0.0f64;
    let mut peak_gap = 0.0f64;
    let mut late_peaks = 0usize;
    let graphs = [
        complete(5)?,
        cycle(7)?,
        hypercube(3)?,
        grid(3, 4)?,
        random_regular(12, 3, seed)?,
    ];
    for (gi, g) in graphs.iter().enumerate() {
        let a = TransitionMatrix::new(g)?;
        let mut rng = seeds.rng("vectors", gi as u64);
        for _ in 0..10 {
            let v: Vec<f64> = (0..g.n()).map(|_| rng.random::<f64>()).collect();
            let m = reverse_operator(&v, &a, g)?;
            let back = m.apply(&a.apply(&v)?)?;
            inv = inv.max(
                back.iter()
                    .zip(&v)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max),
            );
            row = row.max(m.max_row_sum_error());
            let (max, step) = peak_step(&rw_congestion(&v, g, 2 * g.n())?);
            let want = (0..g.n()).map(|x| v[x] / g.degree(x)).fold(0.0, f64::max);
            peak_gap = peak_gap.max((max - want).abs());
            late_peaks += usize::from(step != 1);
        }
    }
    checks.push(Check::at_most(
        "inversion",
        inv.max(row),
        TOL,
        format!("max |vAM - v| = {inv:.3e}, max row-sum error = {row:.3e}"),
    ));
    checks.push(Check {
        passed: peak_gap <= TOL && late_peaks == 0,
        ..Check::at_most(
            "max-principle",
            peak_gap,
            TOL,
            format!("max |peak - max v_x/d_x| = {peak_gap:.3e}, peaks after step 1: {late_peaks}"),
        )
    });

    let (mut div, mut term, mut dom) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for g in deterministic_suite(seed)? {
        let routing = route_splittable(&g, PolicyOptions { keep_traces: true })?;
        let a = TransitionMatrix::new(&routing.walk_graph)?;
        div = div.max(routing.policy.diagnostics.divergence_residual);
        for t in routing.traces.as_ref().into_iter().flat_map(|t| t.values()) {
            term = term.max(t.terminal_residual());
            dom = dom.max(t.domination_excess(&a)?);
        }
    }
    checks.push(Check::at_most(
        "unit-flow",
        div.max(term),
        TOL,
        format!("divergence residual {div:.3e}, terminal residual {term:.3e}"),
    ));
    checks.push(Check::at_most(
        "domination",
        dom,
        TOL,
        format!("max (v(k+s) - 3 e_j A^(k-s)) = {dom:.3e}"),
    ));

    let g = random_regular(16, 4, seed)?;
    let n = g.n();
    let (walk, profile) = lazify_if_needed(&g)?;
    let builds = trials.min(50);
    let mut empty = 0usize;
    let mut paths_ok = true;
    for b in 0..builds {
        let space = build_sample_space(&walk, &profile, seeds.child_seed("space", b as u64))?;
        empty += usize::from(space.empty_buckets() > 0);
        paths_ok &= space
            .paths()
            .all(|p| p.len() == profile.k + 1 && is_valid_path(&walk, p));
    }
    let frac = empty as f64 / builds as f64;
    checks.push(Check {
        passed: frac <= 0.1 && paths_ok,
        ..Check::at_most(
            "empty-buckets",
            frac,
            0.1,
            format!("{empty}/{builds} builds with an empty bucket, paths valid = {paths_ok}"),
        )
    });

    let q3 = hypercube(3)?;
    let (q3_walk, q3_profile) = lazify_if_needed(&q3)?;
    let stats = load_statistics(
        &q3_walk,
        &q3_profile,
        trials,
        seeds.child_seed("loads", 0),
        1.0,
    )?;
    let leg = &stats.first_leg;
    let b = &stats.bounds;
    let total_err = (leg.total - b.expected_total).abs() / b.expected_total;
    checks.push(Check::at_most(
        "load-total",
        total_err,
        0.05,
        format!(
            "sum of mean loads {:.4} vs k/pi_max {:.4}",
            leg.total, b.expected_total
        ),
    ));
    checks.push(Check::at_most(
        "load-spread",
        leg.spread,
        3.5,
        format!("max/min mean load over links, {trials} trials"),
    ));
    let band_excess = leg
        .mean
        .iter()
        .map(|&(_, _, mu)| (0.9 * b.lower - mu).max(mu - 1.1 * b.upper))
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::at_most(
        "load-band",
        band_excess,
        0.0,
        format!(
            "mean loads in [{:.4}, {:.4}], band [{:.4}, {:.4}]",
            leg.min,
            leg.max,
            0.9 * b.lower,
            1.1 * b.upper
        ),
    ));

    let tail_trials = trials.min(200);
    let tail = load_statistics(
        &walk,
        &profile,
        tail_trials,
        seeds.child_seed("tail", 0),
        1.0,
    )?;
    checks.push(Check::at_most(
        "tail",
        tail.first_leg.tail.frequency,
        3.0 / n as f64,
        format!(
            "{} of {} trials above {:.3}",
            tail.first_leg.tail.exceedances,
            tail.first_leg.tail.samples,
            tail.first_leg.tail.threshold
        ),
    ));

    let mut holds = true;
    let mut worst = f64::NEG_INFINITY;
    let rr12 = random_regular(12, 3, seed)?;
    for t in 0..10u64 {
        let policy = build_policy(&rr12, seeds.child_seed("policy", t))?;
        let d = demands(
            &rr12,
            &DemandKind::Random {
                seed: seeds.child_seed("demand", t),
                density: 0.5,
            },
        )?;
        let opt = opt_lower_bound_degree(&rr12, &d)?;
        let audit = ratio_audit(&rr12, &d, &policy, opt, DEFAULT_AUDIT_CONSTANT)?;
        holds &= audit.first_leg.holds && audit.second_leg.holds;
        worst = worst
            .max(audit.first_leg.max_excess)
            .max(audit.second_leg.max_excess);
    }
    checks.push(Check {
        passed: holds,
        ..Check::at_most(
            "decomposition",
            worst,
            0.0,
            "max over links of lhs - rhs (tolerance 1e-9 relative)".into(),
        )
    });

    let runs = trials.min(50);
    let delays = delay_statistics(&hypercube(4)?, runs, seeds.child_seed("valiant", 0))?;
    checks.push(Check::at_most(
        "valiant-delay",
        delays.bound_violations as f64,
        0.0,
        format!(
            "{runs} permutations, max delay {}, max delay/bound {:.4}",
            delays.max_delay,
            delays.max_normalized.unwrap_or(0.0)
        ),
    ));

    Ok(checks)
}
