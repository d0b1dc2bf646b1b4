//! Random road networks and geo-visual objects.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson, Zipf};

use super::seeded;
use crate::error::{Error, Result};
use crate::road_graph::{Edge, EdgePosition, GeoVisualObject, Node, RoadNetwork};
use crate::visual::VisualDescriptor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorSpec {
    pub node_count: usize,
    pub avg_degree: f64,
    pub object_count: usize,
    pub vocab_size: u32,
    pub mean_words_per_object: f64,
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            node_count: 10_000,
            avg_degree: 2.5,
            object_count: 10_000,
            vocab_size: 50_000,
            mean_words_per_object: 128.6,
            zipf_exponent: 1.0,
            seed: 0,
        }
    }
}

const CELL: f64 = 100.0;
const JITTER: f64 = 0.35;
/// A jittered grid with one diagonal per cell has average degree just under 6.
pub const MAX_AVG_DEGREE: f64 = 5.5;

/// Jittered grid points linked to their grid and diagonal neighbours, then
/// thinned to the target degree while keeping a random spanning tree.
pub fn gen_network(spec: &GeneratorSpec) -> Result<RoadNetwork> {
    if spec.node_count < 2 {
        return Err(Error::InvalidParameter("node_count must be at least 2".into()));
    }
    if !(spec.avg_degree >= 2.0 && spec.avg_degree <= MAX_AVG_DEGREE) {
        return Err(Error::InvalidParameter(format!(
            "avg_degree must lie in [2, {MAX_AVG_DEGREE}], got {}",
            spec.avg_degree
        )));
    }
    let mut rng = seeded(spec.seed);
    let n = spec.node_count;
    let side = (n as f64).sqrt().ceil() as usize;
    let nodes: Vec<Node> = (0..n)
        .map(|i| {
            let (row, col) = (i / side, i % side);
            Node {
                id: i as u32,
                x: (col as f64 + rng.random_range(-JITTER..JITTER)) * CELL,
                y: (row as f64 + rng.random_range(-JITTER..JITTER)) * CELL,
            }
        })
        .collect();

    let mut links = Vec::new();
    for i in 0..n {
        let (row, col) = (i / side, i % side);
        let at = |r: usize, c: usize| (c < side && r * side + c < n).then_some(r * side + c);
        if let Some(j) = at(row, col + 1) {
            links.push((i, j));
        }
        if let Some(j) = at(row + 1, col) {
            links.push((i, j));
        }
        // One diagonal per cell keeps the links planar.
        let diagonal = if rng.random_bool(0.5) {
            at(row + 1, col + 1).map(|j| (i, j))
        } else {
            at(row, col + 1).zip(at(row + 1, col))
        };
        links.extend(diagonal);
    }
    links.shuffle(&mut rng);

    // Kruskal over the shuffled links gives a random spanning tree.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let (mut tree, mut rest) = (Vec::new(), Vec::new());
    for (a, b) in links {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            tree.push((a, b));
        } else {
            rest.push((a, b));
        }
    }
    let target = ((n as f64 * spec.avg_degree / 2.0).round() as usize).max(n - 1);
    let extra = target.saturating_sub(tree.len()).min(rest.len());
    tree.extend_from_slice(&rest[..extra]);
    tree.sort_unstable();

    let edges = tree
        .into_iter()
        .enumerate()
        .map(|(id, (a, b))| {
            let (p, q) = (&nodes[a], &nodes[b]);
            Edge {
                id: id as u32,
                u: a as u32,
                v: b as u32,
                weight: (p.x - q.x).hypot(p.y - q.y),
            }
        })
        .collect();
    RoadNetwork::new(nodes, edges)
}

/// Objects at uniformly random edge offsets; word counts are Poisson around
/// the mean and word ids Zipf-distributed over the vocabulary.
pub fn gen_objects(net: &RoadNetwork, spec: &GeneratorSpec) -> Result<Vec<GeoVisualObject>> {
    if spec.object_count == 0 {
        return Ok(Vec::new());
    }
    if !(spec.vocab_size > 0 && spec.mean_words_per_object > 0.0) {
        return Err(Error::InvalidParameter("vocab_size and mean_words_per_object must be positive".into()));
    }
    let zipf = Zipf::new(spec.vocab_size as f64, spec.zipf_exponent)
        .map_err(|e| Error::InvalidParameter(format!("zipf: {e}")))?;
    let poisson = Poisson::new(spec.mean_words_per_object)
        .map_err(|e| Error::InvalidParameter(format!("poisson: {e}")))?;
    let mut rng = seeded(spec.seed ^ 0x6f62_6a65_6374_7321);
    let vocab = spec.vocab_size as usize;
    let mut objects = Vec::with_capacity(spec.object_count);
    let mut words = BTreeSet::new();
    for id in 0..spec.object_count as u64 {
        let edge = rng.random_range(0..net.num_edges() as u32);
        let offset = rng.random_range(0.0..=net.edge(edge).weight);
        let size = (poisson.sample(&mut rng) as usize).clamp(1, vocab);
        words.clear();
        let mut attempts = 0;
        while words.len() < size && attempts < 20 * size {
            words.insert(zipf.sample(&mut rng) as u32 - 1);
            attempts += 1;
        }
        // Tail fill for word counts close to the vocabulary size.
        while words.len() < size {
            words.insert(rng.random_range(0..spec.vocab_size));
        }
        objects.push(GeoVisualObject {
            id,
            position: EdgePosition::new(edge, offset),
            words: VisualDescriptor::new(words.iter().copied()),
        });
    }
    Ok(objects)
}

pub fn format_nodes(net: &RoadNetwork) -> String {
    let mut out = String::new();
    for n in net.nodes() {
        let _ = writeln!(out, "{} {} {}", n.id, n.x, n.y);
    }
    out
}

pub fn format_edges(net: &RoadNetwork) -> String {
    let mut out = String::new();
    for e in net.edges() {
        let _ = writeln!(out, "{} {} {} {}", e.id, e.u, e.v, e.weight);
    }
    out
}

pub fn format_objects(objects: &[GeoVisualObject]) -> String {
    let mut out = String::new();
    for o in objects {
        let words: Vec<String> = o.words.words().iter().map(u32::to_string).collect();
        let _ = writeln!(out, "{} {} {} {}", o.id, o.position.edge, o.position.offset, words.join(","));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GeneratorSpec {
        GeneratorSpec {
            node_count: 100,
            avg_degree: 2.5,
            object_count: 200,
            vocab_size: 500,
            mean_words_per_object: 20.0,
            seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn network_is_deterministic_and_on_target() {
        let a = gen_network(&small()).unwrap();
        let b = gen_network(&small()).unwrap();
        assert_eq!(format_nodes(&a), format_nodes(&b));
        assert_eq!(format_edges(&a), format_edges(&b));
        let ratio = a.num_edges() as f64 / a.num_nodes() as f64;
        assert!((ratio - 1.25).abs() <= 0.125, "ratio {ratio}");
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(gen_network(&GeneratorSpec { node_count: 1, ..small() }).is_err());
        assert!(gen_network(&GeneratorSpec { avg_degree: 7.0, ..small() }).is_err());
    }

    #[test]
    fn objects_round_trip_through_text() {
        let net = gen_network(&small()).unwrap();
        let objs = gen_objects(&net, &small()).unwrap();
        assert_eq!(objs.len(), 200);
        let text = format_objects(&objs);
        assert_eq!(crate::road_graph::parse_objects(&text).unwrap(), objs);
        assert!(gen_objects(&net, &GeneratorSpec { object_count: 0, ..small() }).unwrap().is_empty());
    }
}
