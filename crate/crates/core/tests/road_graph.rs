mod common;

use common::*;
use gvrn::road_graph::*;
use gvrn::Error;
use proptest::prelude::*;
use rand::Rng;

/// Fourteen-node example network; node n_i has id i - 1.
fn reference_network() -> RoadNetwork {
    let links = [
        (1, 2, 10.0),
        (2, 3, 9.0),
        (2, 8, 7.0),
        (8, 4, 8.0),
        (6, 8, 4.0),
        (3, 4, 20.0),
        (1, 9, 6.0),
        (9, 10, 5.0),
        (10, 5, 7.0),
        (5, 4, 12.0),
        (5, 6, 9.0),
        (6, 7, 6.0),
        (7, 11, 5.0),
        (11, 12, 8.0),
        (12, 13, 3.0),
        (13, 14, 4.0),
    ];
    let nodes = (0..14).map(|id| Node { id, x: id as f64, y: (id % 3) as f64 }).collect();
    let edges = links
        .iter()
        .enumerate()
        .map(|(i, &(a, b, w))| Edge {
            id: i as u32,
            u: a - 1,
            v: b - 1,
            weight: w,
        })
        .collect();
    RoadNetwork::new(nodes, edges).unwrap()
}

#[test]
fn reference_network_distances() {
    let net = reference_network();
    let d = node_distances(&net, 0);
    assert_eq!(d[3], 25.0);
    assert_eq!(node_distances(&net, 2)[5], 20.0);
    let p = shortest_path(&net, net.node_position(0), net.node_position(3));
    assert_eq!(p.total_distance, 25.0);
    let walked: f64 = p.edge_ids.iter().map(|&e| net.edge(e).weight).sum();
    assert_eq!(walked, 25.0);
}

#[test]
fn dijkstra_matches_bellman_ford() {
    let mut rng = rng(30);
    for _ in 0..20 {
        let n = rng.random_range(2..150);
        let extra = rng.random_range(0..n as usize);
        let net = random_network(&mut rng, n, extra, 20);
        for _ in 0..5 {
            let s = rng.random_range(0..n);
            assert_eq!(node_distances(&net, s), bellman_ford(&net, s));
        }
    }
}

#[test]
fn position_distances_match_all_pairs() {
    let mut rng = rng(31);
    for _ in 0..10 {
        let net = random_network(&mut rng, 60, 40, 12);
        let apsp = floyd_warshall(&net);
        for _ in 0..40 {
            let (a, b) = (dyadic_position(&mut rng, &net), dyadic_position(&mut rng, &net));
            let want = oracle_distance(&net, &apsp, a, b);
            let from_a = distances_from(&net, a);
            assert_eq!(distance_to_position(&net, a, &from_a, b), want);
            assert_eq!(shortest_path(&net, a, b).total_distance, want);
        }
    }
}

#[test]
fn normalized_distances_stay_in_unit_range() {
    let mut rng = rng(32);
    for _ in 0..20 {
        let n = rng.random_range(2..200);
        let extra = rng.random_range(0..n as usize);
        let mut net = random_network(&mut rng, n, extra, 20);
        let dia = compute_diameter(&mut net, &DiameterConfig::default());
        let apsp = floyd_warshall(&net);
        let max = apsp.iter().flatten().fold(0.0f64, |m, &d| m.max(d));
        assert_eq!(dia, max);
        for row in &apsp {
            for &d in row {
                assert!((0.0..=1.0).contains(&(d / dia)));
            }
        }
    }
}

#[test]
fn sampled_diameter_is_a_lower_bound() {
    let mut rng = rng(33);
    let mut net = random_network(&mut rng, 300, 100, 20);
    let exact = compute_diameter(&mut net.clone(), &DiameterConfig::default());
    let approx = compute_diameter(
        &mut net,
        &DiameterConfig {
            exact_threshold: 0,
            ..Default::default()
        },
    );
    assert!(approx <= exact && approx >= exact / 2.0, "{approx} vs {exact}");
}

#[test]
fn text_round_trip() {
    let mut rng = rng(34);
    let net = random_network(&mut rng, 40, 10, 9);
    let nodes: String = net.nodes().iter().map(|n| format!("{} {} {}\n", n.id, n.x, n.y)).collect();
    let edges: String = net.edges().iter().map(|e| format!("{} {} {} {}\n", e.id, e.u, e.v, e.weight)).collect();
    let back = load_network(&nodes, &edges).unwrap();
    assert_eq!(back.nodes(), net.nodes());
    assert_eq!(back.edges(), net.edges());
}

#[test]
fn malformed_input_is_rejected() {
    let nodes = "0 0 0\n1 1 0\n2 2 0\n";
    assert!(matches!(load_network("0 0 0\n2 1 0\n", "0 0 2 1\n"), Err(Error::SparseIds { .. })));
    assert!(matches!(load_network(nodes, "0 0 7 1\n1 0 1 1\n"), Err(Error::DanglingNode { .. })));
    assert!(matches!(load_network(nodes, "0 0 1 -1\n1 1 2 1\n"), Err(Error::InvalidWeight { .. })));
    assert!(matches!(load_network(nodes, "0 0 1 1\n0 1 2 1\n"), Err(Error::DuplicateId { .. })));
    assert!(matches!(load_network(nodes, "0 0 1 1\n"), Err(Error::Disconnected { .. })));
    assert!(matches!(load_network("0 0\n", ""), Err(Error::Parse { line: 1, .. })));
    let net = load_network(nodes, "0 0 1 1\n1 1 2 1\n").unwrap();
    assert!(matches!(net.validate_position(EdgePosition::new(0, 1.5)), Err(Error::OffsetOutOfRange { .. })));
    assert!(matches!(net.validate_position(EdgePosition::new(9, 0.0)), Err(Error::UnknownEdge(9))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn distance_is_symmetric_and_satisfies_triangle(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let (n, extra) = (rng.random_range(2..40), rng.random_range(0..30));
        let net = random_network(&mut rng, n, extra, 15);
        let (a, b, c) = (dyadic_position(&mut rng, &net), dyadic_position(&mut rng, &net), dyadic_position(&mut rng, &net));
        let d = |x: EdgePosition, y: EdgePosition| distance_to_position(&net, x, &distances_from(&net, x), y);
        prop_assert_eq!(d(a, b), d(b, a));
        prop_assert!(d(a, c) <= d(a, b) + d(b, c));
        prop_assert_eq!(d(a, a), 0.0);
    }
}
