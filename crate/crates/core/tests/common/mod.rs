//! Shared fixtures and independent oracles for integration tests.
#![allow(dead_code)]

use gvrn::gtree::{build_gtree, GTree, GTreeConfig};
use gvrn::road_graph::{
    compute_diameter, DiameterConfig, Edge, EdgePosition, GeoVisualObject, Location, Node, RoadNetwork,
};
use gvrn::snapshot_query::ResultSet;
use gvrn::vig_index::{build_index, VigTree};
use gvrn::visual::VisualDescriptor;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random connected graph with integer weights in [1, max_w], so every
/// shortest-path sum is exact in floating point.
pub fn random_network(rng: &mut ChaCha8Rng, n: u32, extra_edges: usize, max_w: u32) -> RoadNetwork {
    let nodes: Vec<Node> = (0..n)
        .map(|id| Node {
            id,
            x: rng.random_range(0.0..1000.0),
            y: rng.random_range(0.0..1000.0),
        })
        .collect();
    let mut pairs = std::collections::BTreeSet::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        pairs.insert((u, v));
    }
    let mut attempts = 0;
    while pairs.len() < (n as usize - 1) + extra_edges && attempts < 10 * extra_edges + 10 {
        attempts += 1;
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            pairs.insert((a.min(b), a.max(b)));
        }
    }
    let mut pairs: Vec<(u32, u32)> = pairs.into_iter().collect();
    // Shuffle edge ids so they do not follow node order.
    for i in (1..pairs.len()).rev() {
        let j = rng.random_range(0..=i);
        pairs.swap(i, j);
    }
    let edges = pairs
        .into_iter()
        .enumerate()
        .map(|(id, (u, v))| {
            let (u, v) = if rng.random_bool(0.5) { (u, v) } else { (v, u) };
            Edge {
                id: id as u32,
                u,
                v,
                weight: rng.random_range(1..=max_w) as f64,
            }
        })
        .collect();
    RoadNetwork::new(nodes, edges).unwrap()
}

/// Offset on an edge that is a multiple of 1/8, including both ends.
pub fn dyadic_position(rng: &mut ChaCha8Rng, net: &RoadNetwork) -> EdgePosition {
    let e = rng.random_range(0..net.num_edges() as u32);
    let w = net.edge(e).weight;
    let steps = (w * 8.0) as u32;
    EdgePosition::new(e, rng.random_range(0..=steps) as f64 / 8.0)
}

pub fn random_words(rng: &mut ChaCha8Rng, vocab: u32, max_len: usize) -> VisualDescriptor {
    let len = rng.random_range(1..=max_len);
    VisualDescriptor::new((0..len).map(|_| rng.random_range(0..vocab)))
}

pub fn random_objects(rng: &mut ChaCha8Rng, net: &RoadNetwork, count: usize, vocab: u32, max_len: usize) -> Vec<GeoVisualObject> {
    // Sparse, shuffled ids so internal order differs from insertion order.
    let mut ids: Vec<u64> = (0..count as u64).map(|i| i * 3 + 7).collect();
    for i in (1..ids.len()).rev() {
        let j = rng.random_range(0..=i);
        ids.swap(i, j);
    }
    ids.into_iter()
        .map(|id| GeoVisualObject {
            id,
            position: dyadic_position(rng, net),
            words: random_words(rng, vocab, max_len),
        })
        .collect()
}

pub struct Instance {
    pub index: VigTree,
}

impl Instance {
    pub fn net(&self) -> &RoadNetwork {
        self.index.network()
    }

    pub fn tree(&self) -> &GTree {
        self.index.gtree()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct InstanceSpec {
    pub nodes: u32,
    pub extra_edges: usize,
    pub objects: usize,
    pub vocab: u32,
    pub max_words: usize,
    pub fanout: usize,
    pub leaf_capacity: usize,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        InstanceSpec {
            nodes: 120,
            extra_edges: 60,
            objects: 300,
            vocab: 60,
            max_words: 8,
            fanout: 4,
            leaf_capacity: 8,
        }
    }
}

pub fn random_instance(rng: &mut ChaCha8Rng, spec: InstanceSpec) -> Instance {
    let mut net = random_network(rng, spec.nodes, spec.extra_edges, 20);
    compute_diameter(&mut net, &DiameterConfig::default());
    let objects = random_objects(rng, &net, spec.objects, spec.vocab, spec.max_words);
    let net = net.attach_objects(objects).unwrap();
    let tree = build_gtree(
        &net,
        &GTreeConfig {
            fanout: spec.fanout,
            leaf_capacity: spec.leaf_capacity,
            seed: rng.random(),
        },
    )
    .unwrap();
    Instance {
        index: build_index(net, tree, 0.5).unwrap(),
    }
}

/// Single-source distances by Bellman-Ford relaxation.
pub fn bellman_ford(net: &RoadNetwork, source: u32) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; net.num_nodes()];
    dist[source as usize] = 0.0;
    for _ in 0..net.num_nodes() {
        let mut changed = false;
        for e in net.edges() {
            let (u, v) = (e.u as usize, e.v as usize);
            if dist[u] + e.weight < dist[v] {
                dist[v] = dist[u] + e.weight;
                changed = true;
            }
            if dist[v] + e.weight < dist[u] {
                dist[u] = dist[v] + e.weight;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    dist
}

/// All-pairs distances by Floyd-Warshall.
pub fn floyd_warshall(net: &RoadNetwork) -> Vec<Vec<f64>> {
    let n = net.num_nodes();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for e in net.edges() {
        let (u, v) = (e.u as usize, e.v as usize);
        d[u][v] = d[u][v].min(e.weight);
        d[v][u] = d[v][u].min(e.weight);
    }
    for k in 0..n {
        let row_k = d[k].clone();
        for row in d.iter_mut() {
            let dik = row[k];
            if dik == f64::INFINITY {
                continue;
            }
            for (dij, &dkj) in row.iter_mut().zip(&row_k) {
                *dij = dij.min(dik + dkj);
            }
        }
    }
    d
}

/// Position-to-position distance from an all-pairs node table.
pub fn oracle_distance(net: &RoadNetwork, apsp: &[Vec<f64>], a: EdgePosition, b: EdgePosition) -> f64 {
    let ends = |p: EdgePosition| -> Vec<(usize, f64)> {
        match net.locate(p) {
            Location::Node(n) => vec![(n as usize, 0.0)],
            Location::Interior(e, t) => {
                let edge = net.edge(e);
                vec![(edge.u as usize, t), (edge.v as usize, edge.weight - t)]
            }
        }
    };
    let mut best = f64::INFINITY;
    for (x, cx) in ends(a) {
        for (y, cy) in ends(b) {
            best = best.min(cx + apsp[x][y] + cy);
        }
    }
    if let (Location::Interior(ea, s), Location::Interior(eb, t)) = (net.locate(a), net.locate(b)) {
        if ea == eb {
            best = best.min((s - t).abs());
        }
    }
    best
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

/// Compares two result sets: identical ids in order and scores within
/// `rel`. Adjacent entries whose scores differ by less than `rel` may appear
/// swapped, as may the last entry with an equally scored outsider.
pub fn results_match(got: &ResultSet, want: &ResultSet, rel: f64) -> Result<(), String> {
    let (g, w) = (got.entries(), want.entries());
    if g.len() != w.len() {
        return Err(format!("length {} vs {}", g.len(), w.len()));
    }
    for (i, (a, b)) in g.iter().zip(w).enumerate() {
        if !close(a.score, b.score, rel) {
            return Err(format!("rank {i}: score {} vs {}", a.score, b.score));
        }
        if a.object_id != b.object_id {
            let tied = |x: f64| w.iter().any(|e| e.object_id == a.object_id && close(e.score, x, rel));
            if !tied(b.score) && !close(a.score, w[w.len() - 1].score, rel) {
                return Err(format!("rank {i}: id {} vs {}", a.object_id, b.object_id));
            }
        }
    }
    Ok(())
}

pub fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    items.choose(rng).unwrap()
}
