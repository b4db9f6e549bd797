use nalgebra::DMatrix;
use proptest::prelude::*;

use obroute::eval::demand::DemandMatrix;
use obroute::packet::{max_coincidence, simulate, PermutationDemand, SimulationConfig};
use obroute::splittable::{compute_policy, reverse_operator, row_norm, PolicyOptions};
use obroute::{lazify_if_needed, Capacity, Graph, SeedTree, TransitionMatrix};

/// A connected graph: a tree given by parent choices plus extra edges.
fn graph_strategy(max_n: usize) -> impl Strategy<Value = Graph> {
    (2..=max_n)
        .prop_flat_map(|n| {
            (
                Just(n),
                proptest::collection::vec((any::<prop::sample::Index>(), 1u32..=3), n - 1),
                proptest::collection::vec((0..n, 0..n, 1u32..=3), 0..=n),
            )
        })
        .prop_map(|(n, parents, extra)| {
            let mut seen = std::collections::HashSet::new();
            let mut edges = Vec::new();
            for (v, (p, c)) in parents.into_iter().enumerate() {
                let v = v + 1;
                let u = p.index(v);
                seen.insert((u, v));
                edges.push((u, v, Capacity::from_integer(c.into())));
            }
            for (a, b, c) in extra {
                let (u, v) = (a.min(b), a.max(b));
                if u != v && seen.insert((u, v)) {
                    edges.push((u, v, Capacity::from_integer(c.into())));
                }
            }
            Graph::new(n, &edges).unwrap()
        })
}

fn vector_for(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(prop_oneof![Just(0.0), 0.0..10.0f64], n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn row_norm_is_stochastic_on_support(
        (g, seed) in (graph_strategy(12), any::<u64>())
    ) {
        use rand::Rng;
        let n = g.n();
        let mut rng = SeedTree::new(seed).rng("m", 0);
        let mut m = DMatrix::zeros(n, n);
        for x in 0..n {
            for &(y, _) in g.neighbors(x) {
                if rng.random::<f64>() < 0.7 {
                    m[(x, y)] = rng.random::<f64>();
                }
            }
        }
        let r = row_norm(&m, &g).unwrap();
        for x in 0..n {
            let s: f64 = r.row(x).iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
            for y in 0..n {
                prop_assert!(r[(x, y)] >= 0.0);
                if r[(x, y)] > 0.0 {
                    prop_assert!(g.is_step(x, y));
                }
            }
        }
    }

    #[test]
    fn stationary_distribution_is_fixed(g in graph_strategy(16)) {
        let a = TransitionMatrix::new(&g).unwrap();
        let total = g.total_degree();
        let pi: Vec<f64> = (0..g.n()).map(|x| g.degree(x) / total).collect();
        let next = a.apply(&pi).unwrap();
        for (p, q) in pi.iter().zip(&next) {
            prop_assert!((p - q).abs() <= 1e-12);
        }
        prop_assert!(a.max_row_sum_error() <= 1e-12);
    }

    #[test]
    fn reverse_operator_inverts_a_step(
        (g, v) in graph_strategy(16).prop_flat_map(|g| { let n = g.n(); (Just(g), vector_for(n)) })
    ) {
        prop_assume!(v.iter().any(|&x| x > 0.0));
        let a = TransitionMatrix::new(&g).unwrap();
        let m = reverse_operator(&v, &a, &g).unwrap();
        let back = m.apply(&a.apply(&v).unwrap()).unwrap();
        let scale = v.iter().copied().fold(1.0, f64::max);
        for (b, x) in back.iter().zip(&v) {
            prop_assert!((b - x).abs() <= 1e-9 * scale);
        }
        prop_assert!(m.max_row_sum_error() <= 1e-9);
        prop_assert!(m.respects(&g));
    }

    #[test]
    fn lazy_graph_keeps_stationary_distribution(g in graph_strategy(12)) {
        let lazy = g.lazy().unwrap();
        for x in 0..g.n() {
            prop_assert!((lazy.degree(x) - 2.0 * g.degree(x)).abs() <= 1e-12);
        }
    }

    #[test]
    fn demand_csv_round_trips(
        rows in (2usize..6).prop_flat_map(|n| proptest::collection::vec(
            proptest::collection::vec(prop_oneof![Just(0.0), 0.0..5.0f64], n), n))
    ) {
        let n = rows.len();
        let mut rows = rows;
        for (i, r) in rows.iter_mut().enumerate() {
            r[i] = 0.0;
        }
        let d = DemandMatrix::from_rows(&rows).unwrap();
        let back = DemandMatrix::parse(&d.to_csv_string()).unwrap();
        prop_assert_eq!(back.n(), n);
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(back.get(i, j), d.get(i, j));
            }
        }
    }

    #[test]
    fn permutation_text_round_trips(seed in any::<u64>(), n in 1usize..20) {
        let sigma = PermutationDemand::random(n, &SeedTree::new(seed), 0);
        let text: Vec<String> = sigma.as_slice().iter().map(|x| x.to_string()).collect();
        let parsed = PermutationDemand::parse(&text.join(" ")).unwrap();
        prop_assert_eq!(parsed.as_slice(), sigma.as_slice());
    }

    #[test]
    fn edge_list_round_trips(g in graph_strategy(12)) {
        let back = Graph::parse(&g.to_edge_list_string()).unwrap();
        prop_assert_eq!(back.edge_triples(), g.edge_triples());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn policy_flows_are_unit_flows(g in graph_strategy(7)) {
        let (walk, profile) = lazify_if_needed(&g).unwrap();
        let c = compute_policy(&walk, profile.k, PolicyOptions { keep_traces: true }).unwrap();
        for f in &c.policy.flows {
            prop_assert!(f.divergence_residual(&walk) <= 1e-9);
            let m = f.to_matrix(&walk);
            prop_assert!((&m + m.transpose()).abs().max() <= 1e-12);
        }
        for t in c.traces.unwrap().values() {
            prop_assert!(t.terminal_residual() <= 1e-9);
            prop_assert!(t.operators_stochastic());
            prop_assert!(t.operators_respect(&walk));
        }
    }

    #[test]
    fn packets_on_own_paths_never_exceed_coincidence_bound(
        (n, seed) in (3usize..10, any::<u64>())
    ) {
        let g = obroute::generators::cycle(n).unwrap();
        let sigma = PermutationDemand::random(n, &SeedTree::new(seed), 0);
        let paths: Vec<Vec<usize>> = (0..n)
            .map(|x| {
                let t = sigma.target(x);
                let fwd = (t + n - x) % n;
                if fwd <= n / 2 {
                    (0..=fwd).map(|s| (x + s) % n).collect()
                } else {
                    (0..=n - fwd).map(|s| (x + n - s) % n).collect()
                }
            })
            .collect();
        let config = SimulationConfig { per_direction: false, record_trace: false };
        let r = simulate(&g, &sigma, &paths, config).unwrap();
        let longest = paths.iter().map(|p| p.len() - 1).max().unwrap();
        let c = max_coincidence(&g, &sigma, &paths);
        prop_assert!(r.delay <= longest * (1 + c));
        for (x, a) in r.arrivals.iter().enumerate() {
            if sigma.target(x) == x {
                prop_assert!(a.is_none());
            } else {
                prop_assert!(a.unwrap() >= paths[x].len() - 1);
            }
        }
    }
}
