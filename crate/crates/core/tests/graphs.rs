use gossip_rate::graph::{
    fail_links, generate, is_bipartite, is_connected, radius_for_mean_degree, rewire_random, Family, Graph, GraphSpec,
};
use proptest::prelude::*;

fn average_shortest_path(g: &Graph) -> f64 {
    let (mut total, mut pairs) = (0usize, 0usize);
    for s in 0..g.n() {
        for d in g.bfs_distances(s).into_iter().flatten().filter(|&d| d > 0) {
            total += d;
            pairs += 1;
        }
    }
    total as f64 / pairs as f64
}

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![
        (0.15f64..0.6).prop_map(|p| Family::ErdosRenyi { p }),
        (0.3f64..0.6).prop_map(|radius| Family::GeometricRandom { radius }),
        (2usize..4, 0.0f64..0.6).prop_map(|(h, rewire)| Family::SmallWorld { k: 2 * h, rewire }),
        (2usize..4, 0.0f64..1.0).prop_map(|(m, triad)| Family::ScaleFreeClustered { m, triad }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_graphs_are_simple_connected_and_not_bipartite(n in 12usize..60, fam in family(), seed in any::<u64>()) {
        let g = generate(&GraphSpec::new(n, fam, seed)).unwrap();
        prop_assert!(g.validate().is_ok());
        prop_assert!(is_connected(&g));
        prop_assert!(!is_bipartite(&g));
        for v in 0..n {
            prop_assert!(!g.has_edge(v, v));
            for &u in g.neighbors(v) {
                prop_assert!(g.has_edge(u, v));
            }
        }
    }

    #[test]
    fn generation_is_deterministic(n in 12usize..60, fam in family(), seed in any::<u64>()) {
        let spec = GraphSpec::new(n, fam, seed);
        prop_assert!(generate(&spec).unwrap() == generate(&spec).unwrap());
    }

    #[test]
    fn edge_list_round_trips(n in 12usize..60, fam in family(), seed in any::<u64>()) {
        let g = generate(&GraphSpec::new(n, fam, seed)).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let back = Graph::read_edge_list(buf.as_slice()).unwrap();
        prop_assert!(back == g);
    }

    #[test]
    fn rewiring_preserves_edge_count(p in 0.0f64..1.0, seed in any::<u64>()) {
        let lattice = Graph::ring_lattice(60, 6).unwrap();
        if let Ok(g) = rewire_random(&lattice, p, seed) {
            prop_assert_eq!(g.edge_count(), lattice.edge_count());
            prop_assert!(g.validate().is_ok());
        }
    }
}

#[test]
fn rewiring_shortens_paths() {
    let lattice = Graph::ring_lattice(200, 6).unwrap();
    let base = average_shortest_path(&lattice);
    for seed in 0..10 {
        let g = rewire_random(&lattice, 0.1, seed).unwrap();
        let asp = average_shortest_path(&g);
        assert!(asp < 0.5 * base, "seed {seed}: {asp} vs lattice {base}");
    }
}

#[test]
fn geometric_mean_degree_matches_target() {
    let n = 200;
    let radius = radius_for_mean_degree(n, 25.0);
    for seed in 0..20 {
        let g = generate(&GraphSpec::new(n, Family::GeometricRandom { radius }, seed)).unwrap();
        assert!(
            (g.mean_degree() - 25.0).abs() <= 3.0,
            "seed {seed}: {}",
            g.mean_degree()
        );
    }
}

#[test]
fn link_failures_thin_the_graph() {
    let n = 500;
    let g = generate(&GraphSpec::new(
        n,
        Family::ErdosRenyi {
            p: 50.0 / (n - 1) as f64,
        },
        11,
    ))
    .unwrap();
    for seed in 0..5 {
        let thinned = fail_links(&g, 0.7, seed);
        assert!(
            (thinned.mean_degree() - 15.0).abs() <= 2.0,
            "seed {seed}: {}",
            thinned.mean_degree()
        );
        assert!(thinned.edges().iter().all(|&(u, v)| g.has_edge(u, v)));
    }
}
