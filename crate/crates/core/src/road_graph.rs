//! Road network model: parsing, validation, exact shortest paths and diameter.
//!
//! The network is a connected, undirected graph with strictly positive edge
//! weights. Locations are [`EdgePosition`]s, i.e. an edge plus an offset
//! measured from the edge's `u` endpoint.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::visual::VisualDescriptor;

pub type NodeId = u32;
pub type EdgeId = u32;
/// External object id as it appears in object files.
pub type ObjectId = u64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub u: NodeId,
    pub v: NodeId,
    pub weight: f64,
}

impl Edge {
    /// The endpoint opposite to `node`.
    pub fn other(&self, node: NodeId) -> NodeId {
        if node == self.u {
            self.v
        } else {
            self.u
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgePosition {
    pub edge: EdgeId,
    pub offset: f64,
}

impl EdgePosition {
    pub fn new(edge: EdgeId, offset: f64) -> Self {
        EdgePosition { edge, offset }
    }
}

/// A position after snapping edge ends onto nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    Node(NodeId),
    /// Strictly inside an edge: `(edge, offset from u)`.
    Interior(EdgeId, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    /// Traversed edges in order; the first and last may be traversed only
    /// partially when the path starts or ends inside an edge.
    pub edge_ids: Vec<EdgeId>,
    pub total_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoVisualObject {
    pub id: ObjectId,
    pub position: EdgePosition,
    pub words: VisualDescriptor,
}

/// Diameter computation settings.
#[derive(Debug, Clone, Copy)]
pub struct DiameterConfig {
    /// Networks with at most this many nodes get the exact all-pairs value.
    pub exact_threshold: usize,
    /// Double-sweep iterations for larger networks.
    pub sweeps: usize,
    pub seed: u64,
}

impl Default for DiameterConfig {
    fn default() -> Self {
        DiameterConfig {
            exact_threshold: 2000,
            sweeps: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RoadNetwork {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<EdgeId>>,
    diameter: Option<f64>,
    /// Sorted by id; internal object index = position in this vector.
    objects: Vec<GeoVisualObject>,
    /// Object indexes per edge, sorted by offset.
    edge_objects: Vec<Vec<u32>>,
}

impl RoadNetwork {
    /// Builds and validates a network from already-parsed parts.
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self> {
        if nodes.is_empty() || edges.is_empty() {
            return Err(Error::EmptyNetwork);
        }
        for (i, n) in nodes.iter().enumerate() {
            if n.id as usize != i {
                return Err(Error::SparseIds {
                    kind: "node",
                    count: nodes.len(),
                    missing: i as u64,
                });
            }
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (i, e) in edges.iter().enumerate() {
            if e.id as usize != i {
                return Err(Error::SparseIds {
                    kind: "edge",
                    count: edges.len(),
                    missing: i as u64,
                });
            }
            for end in [e.u, e.v] {
                if end as usize >= nodes.len() {
                    return Err(Error::DanglingNode {
                        edge: e.id,
                        node: end as u64,
                    });
                }
            }
            if e.u == e.v {
                return Err(Error::SelfLoop {
                    edge: e.id,
                    node: e.u,
                });
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(Error::InvalidWeight {
                    edge: e.id,
                    weight: e.weight,
                });
            }
            adjacency[e.u as usize].push(e.id);
            adjacency[e.v as usize].push(e.id);
        }
        let net = RoadNetwork {
            edge_objects: vec![Vec::new(); edges.len()],
            nodes,
            edges,
            adjacency,
            diameter: None,
            objects: Vec::new(),
        };
        let components = net.count_components();
        if components > 1 {
            return Err(Error::Disconnected { components });
        }
        Ok(net)
    }

    fn count_components(&self) -> usize {
        let mut seen = vec![false; self.nodes.len()];
        let mut components = 0;
        let mut stack = Vec::new();
        for start in 0..self.nodes.len() {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start as NodeId);
            while let Some(n) = stack.pop() {
                for &e in &self.adjacency[n as usize] {
                    let m = self.edges[e as usize].other(n);
                    if !seen[m as usize] {
                        seen[m as usize] = true;
                        stack.push(m);
                    }
                }
            }
        }
        components
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id as usize]
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id as usize]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Incident edge ids of `node`.
    pub fn incident(&self, node: NodeId) -> &[EdgeId] {
        &self.adjacency[node as usize]
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.adjacency[node as usize].len()
    }

    pub fn diameter(&self) -> Option<f64> {
        self.diameter
    }

    pub fn set_diameter(&mut self, diameter: f64) -> Result<()> {
        if !(diameter.is_finite() && diameter > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "diameter must be positive, got {diameter}"
            )));
        }
        self.diameter = Some(diameter);
        Ok(())
    }

    pub fn objects(&self) -> &[GeoVisualObject] {
        &self.objects
    }

    pub fn object(&self, index: u32) -> &GeoVisualObject {
        &self.objects[index as usize]
    }

    /// Object indexes residing on `edge`, sorted by offset.
    pub fn objects_on(&self, edge: EdgeId) -> &[u32] {
        &self.edge_objects[edge as usize]
    }

    pub fn validate_position(&self, pos: EdgePosition) -> Result<()> {
        let edge = self
            .edges
            .get(pos.edge as usize)
            .ok_or(Error::UnknownEdge(pos.edge))?;
        if !(pos.offset >= 0.0 && pos.offset <= edge.weight) {
            return Err(Error::OffsetOutOfRange {
                edge: pos.edge,
                offset: pos.offset,
                weight: edge.weight,
            });
        }
        Ok(())
    }

    /// Snaps positions at either end of an edge onto the node.
    pub fn locate(&self, pos: EdgePosition) -> Location {
        let e = self.edge(pos.edge);
        if pos.offset <= 0.0 {
            Location::Node(e.u)
        } else if pos.offset >= e.weight {
            Location::Node(e.v)
        } else {
            Location::Interior(pos.edge, pos.offset)
        }
    }

    /// An edge position denoting `node` itself.
    pub fn node_position(&self, node: NodeId) -> EdgePosition {
        let e = self.edge(self.adjacency[node as usize][0]);
        let offset = if e.u == node { 0.0 } else { e.weight };
        EdgePosition::new(e.id, offset)
    }

    /// Graph vertices a position can be left through, with the cost of
    /// reaching each.
    pub fn access_points(&self, pos: EdgePosition) -> Vec<(NodeId, f64)> {
        match self.locate(pos) {
            Location::Node(n) => vec![(n, 0.0)],
            Location::Interior(e, t) => {
                let edge = self.edge(e);
                vec![(edge.u, t), (edge.v, edge.weight - t)]
            }
        }
    }

    /// Attaches objects; each must sit on an existing edge within range.
    /// Objects are kept sorted by id, and per-edge lists by offset.
    pub fn attach_objects(mut self, mut objects: Vec<GeoVisualObject>) -> Result<Self> {
        objects.sort_by_key(|o| o.id);
        for pair in objects.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::DuplicateId {
                    kind: "object",
                    id: pair[0].id,
                });
            }
        }
        let mut edge_objects = vec![Vec::new(); self.edges.len()];
        for (i, o) in objects.iter().enumerate() {
            self.validate_position(o.position)?;
            edge_objects[o.position.edge as usize].push(i as u32);
        }
        for list in &mut edge_objects {
            list.sort_by(|&a, &b| {
                let (pa, pb) = (&objects[a as usize].position, &objects[b as usize].position);
                pa.offset.total_cmp(&pb.offset).then(a.cmp(&b))
            });
        }
        self.objects = objects;
        self.edge_objects = edge_objects;
        Ok(self)
    }
}

/// Min-heap entry for Dijkstra over `f64` keys.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct HeapItem {
    pub dist: f64,
    pub node: u32,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single- or multi-source Dijkstra over the whole network.
///
/// Returns node distances and, per node, the edge used to reach it.
fn dijkstra(net: &RoadNetwork, sources: &[(NodeId, f64)]) -> (Vec<f64>, Vec<Option<EdgeId>>) {
    let n = net.num_nodes();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![None; n];
    let mut heap = BinaryHeap::new();
    for &(s, d) in sources {
        if d < dist[s as usize] {
            dist[s as usize] = d;
            heap.push(HeapItem { dist: d, node: s });
        }
    }
    while let Some(HeapItem { dist: d, node }) = heap.pop() {
        if d > dist[node as usize] {
            continue;
        }
        for &eid in net.incident(node) {
            let e = net.edge(eid);
            let m = e.other(node);
            let nd = d + e.weight;
            if nd < dist[m as usize] {
                dist[m as usize] = nd;
                pred[m as usize] = Some(eid);
                heap.push(HeapItem { dist: nd, node: m });
            }
        }
    }
    (dist, pred)
}

/// Shortest network distances from `pos` to every node.
pub fn distances_from(net: &RoadNetwork, pos: EdgePosition) -> Vec<f64> {
    dijkstra(net, &net.access_points(pos)).0
}

/// Shortest network distances from `node` to every node.
pub fn node_distances(net: &RoadNetwork, node: NodeId) -> Vec<f64> {
    dijkstra(net, &[(node, 0.0)]).0
}

/// Distance to `target` given node distances from a source position.
pub fn distance_to_position(
    net: &RoadNetwork,
    source: EdgePosition,
    node_dist: &[f64],
    target: EdgePosition,
) -> f64 {
    let via_nodes = match net.locate(target) {
        Location::Node(n) => node_dist[n as usize],
        Location::Interior(e, t) => {
            let edge = net.edge(e);
            (node_dist[edge.u as usize] + t).min(node_dist[edge.v as usize] + (edge.weight - t))
        }
    };
    match (net.locate(source), net.locate(target)) {
        (Location::Interior(a, s), Location::Interior(b, t)) if a == b => via_nodes.min((s - t).abs()),
        _ => via_nodes,
    }
}

/// Minimum-distance path between two positions.
pub fn shortest_path(net: &RoadNetwork, a: EdgePosition, b: EdgePosition) -> Path {
    let (la, lb) = (net.locate(a), net.locate(b));
    if la == lb {
        return Path {
            edge_ids: Vec::new(),
            total_distance: 0.0,
        };
    }
    let (dist, pred) = dijkstra(net, &net.access_points(a));

    // Pick the cheapest way into b: a node, one of its edge ends, or directly
    // along a shared edge.
    let direct = match (la, lb) {
        (Location::Interior(ea, s), Location::Interior(eb, t)) if ea == eb => Some((ea, (s - t).abs())),
        _ => None,
    };
    let (total, end_node, last_edge) = match lb {
        Location::Node(n) => (dist[n as usize], n, None),
        Location::Interior(e, t) => {
            let edge = net.edge(e);
            let via_u = dist[edge.u as usize] + t;
            let via_v = dist[edge.v as usize] + (edge.weight - t);
            if via_u <= via_v {
                (via_u, edge.u, Some(e))
            } else {
                (via_v, edge.v, Some(e))
            }
        }
    };
    if let Some((edge, d)) = direct {
        if d <= total {
            return Path {
                edge_ids: vec![edge],
                total_distance: d,
            };
        }
    }

    let sources: Vec<NodeId> = net.access_points(a).iter().map(|&(n, _)| n).collect();
    let mut edges = Vec::new();
    let mut cur = end_node;
    while let Some(e) = pred[cur as usize] {
        edges.push(e);
        cur = net.edge(e).other(cur);
    }
    edges.reverse();
    if let Location::Interior(e, _) = la {
        debug_assert!(sources.contains(&cur));
        edges.insert(0, e);
    }
    if let Some(e) = last_edge {
        edges.push(e);
    }
    Path {
        edge_ids: edges,
        total_distance: total,
    }
}

/// Network diameter; stores the result on `net`.
///
/// Exact (all-pairs) up to `config.exact_threshold` nodes, otherwise the
/// largest eccentricity found by repeated double sweeps from random seeds.
pub fn compute_diameter(net: &mut RoadNetwork, config: &DiameterConfig) -> f64 {
    let n = net.num_nodes();
    let farthest = |dist: &[f64]| {
        dist.iter()
            .enumerate()
            .fold((0usize, 0.0f64), |best, (i, &d)| if d > best.1 { (i, d) } else { best })
    };
    let diameter = if n <= config.exact_threshold {
        (0..n)
            .map(|s| farthest(&node_distances(net, s as NodeId)).1)
            .fold(0.0, f64::max)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut best = 0.0f64;
        for _ in 0..config.sweeps.max(1) {
            let start = rng.random_range(0..n) as NodeId;
            let (far, _) = farthest(&node_distances(net, start));
            let (_, ecc) = farthest(&node_distances(net, far as NodeId));
            best = best.max(ecc);
        }
        best
    };
    net.diameter = Some(diameter);
    diameter
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, line: usize, what: &str) -> Result<T> {
    let raw = field.ok_or_else(|| Error::Parse {
        line,
        message: format!("missing {what}"),
    })?;
    raw.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {what} {raw:?}"),
    })
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn expect_end<'a>(mut fields: impl Iterator<Item = &'a str>, line: usize) -> Result<()> {
    match fields.next() {
        None => Ok(()),
        Some(extra) => Err(Error::Parse {
            line,
            message: format!("unexpected trailing field {extra:?}"),
        }),
    }
}

/// Parses `<id> <x> <y>` lines.
pub fn parse_nodes(text: &str) -> Result<Vec<Node>> {
    let mut nodes: Vec<Option<Node>> = Vec::new();
    let mut count = 0usize;
    for (line, raw) in data_lines(text) {
        let mut f = raw.split_whitespace();
        let id: u64 = parse_field(f.next(), line, "node id")?;
        let x: f64 = parse_field(f.next(), line, "x coordinate")?;
        let y: f64 = parse_field(f.next(), line, "y coordinate")?;
        expect_end(f, line)?;
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::Parse {
                line,
                message: "non-finite coordinate".into(),
            });
        }
        let id32 = u32::try_from(id).map_err(|_| Error::Parse {
            line,
            message: format!("node id {id} out of range"),
        })?;
        let slot = id32 as usize;
        if slot >= nodes.len() {
            nodes.resize(slot + 1, None);
        }
        if nodes[slot].is_some() {
            return Err(Error::DuplicateId { kind: "node", id });
        }
        nodes[slot] = Some(Node { id: id32, x, y });
        count += 1;
    }
    collect_dense(nodes, count, "node")
}

fn collect_dense<T>(slots: Vec<Option<T>>, count: usize, kind: &'static str) -> Result<Vec<T>> {
    let total = slots.len();
    let mut out = Vec::with_capacity(total);
    for (i, s) in slots.into_iter().enumerate() {
        match s {
            Some(v) => out.push(v),
            None => {
                return Err(Error::SparseIds {
                    kind,
                    count: count.max(i),
                    missing: i as u64,
                })
            }
        }
    }
    Ok(out)
}

/// Parses `<edge_id> <node_u> <node_v> <weight>` lines.
pub fn parse_edges(text: &str) -> Result<Vec<Edge>> {
    let mut edges: Vec<Option<Edge>> = Vec::new();
    let mut count = 0usize;
    for (line, raw) in data_lines(text) {
        let mut f = raw.split_whitespace();
        let id: u64 = parse_field(f.next(), line, "edge id")?;
        let u: u64 = parse_field(f.next(), line, "node u")?;
        let v: u64 = parse_field(f.next(), line, "node v")?;
        let weight: f64 = parse_field(f.next(), line, "weight")?;
        expect_end(f, line)?;
        let id32 = u32::try_from(id).map_err(|_| Error::Parse {
            line,
            message: format!("edge id {id} out of range"),
        })?;
        let node = |n: u64| {
            u32::try_from(n).map_err(|_| Error::DanglingNode { edge: id32, node: n })
        };
        let (u, v) = (node(u)?, node(v)?);
        if u == v {
            return Err(Error::SelfLoop { edge: id32, node: u });
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidWeight { edge: id32, weight });
        }
        let slot = id32 as usize;
        if slot >= edges.len() {
            edges.resize(slot + 1, None);
        }
        if edges[slot].is_some() {
            return Err(Error::DuplicateId { kind: "edge", id });
        }
        edges[slot] = Some(Edge {
            id: id32,
            u,
            v,
            weight,
        });
        count += 1;
    }
    collect_dense(edges, count, "edge")
}

/// Parses `<object_id> <edge_id> <offset> <w1,w2,...>` lines.
pub fn parse_objects(text: &str) -> Result<Vec<GeoVisualObject>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (line, raw) in data_lines(text) {
        let mut f = raw.split_whitespace();
        let id: u64 = parse_field(f.next(), line, "object id")?;
        let edge: u32 = parse_field(f.next(), line, "edge id")?;
        let offset: f64 = parse_field(f.next(), line, "offset")?;
        let words_raw = f.next().ok_or_else(|| Error::Parse {
            line,
            message: "missing visual word list".into(),
        })?;
        expect_end(f, line)?;
        let words = words_raw
            .split(',')
            .filter(|w| !w.is_empty())
            .map(|w| {
                w.parse::<u32>().map_err(|_| Error::Parse {
                    line,
                    message: format!("invalid visual word {w:?}"),
                })
            })
            .collect::<Result<Vec<u32>>>()
            .map(VisualDescriptor::new)?;
        if !seen.insert(id) {
            return Err(Error::DuplicateId { kind: "object", id });
        }
        out.push(GeoVisualObject {
            id,
            position: EdgePosition::new(edge, offset),
            words,
        });
    }
    Ok(out)
}

/// Parses both streams and validates the resulting network.
pub fn load_network(node_stream: &str, edge_stream: &str) -> Result<RoadNetwork> {
    RoadNetwork::new(parse_nodes(node_stream)?, parse_edges(edge_stream)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> RoadNetwork {
        load_network("0 0 0\n1 1 0\n2 2 0\n3 3 0\n", "0 0 1 1\n1 1 2 2\n2 2 3 3\n").unwrap()
    }

    #[test]
    fn minimal_network() {
        let net = load_network("0 0.0 0.0\n1 1.0 0.0\n", "0 0 1 10.0\n").unwrap();
        assert_eq!(net.num_nodes(), 2);
        assert_eq!(net.num_edges(), 1);
        assert_eq!(net.edge(0).weight, 10.0);
        assert!(net.objects().is_empty());
        assert!(net.diameter().is_none());
    }

    #[test]
    fn rejects_self_loop() {
        let err = load_network("0 0 0\n1 1 0\n", "0 0 0 5.0\n").unwrap_err();
        assert!(matches!(err, Error::SelfLoop { .. }), "{err}");
    }

    #[test]
    fn rejects_disconnected() {
        let err = load_network("0 0 0\n1 1 0\n2 2 0\n3 3 0\n", "0 0 1 1\n1 2 3 1\n").unwrap_err();
        assert!(matches!(err, Error::Disconnected { components: 2 }), "{err}");
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_nodes("0 0 0\n\n1 x 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(matches!(parse_edges("0 0 1\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn rejects_bad_ids_and_weights() {
        assert!(matches!(parse_nodes("0 0 0\n0 1 1\n"), Err(Error::DuplicateId { .. })));
        assert!(matches!(parse_nodes("0 0 0\n2 1 1\n"), Err(Error::SparseIds { .. })));
        assert!(matches!(parse_edges("0 0 1 0\n"), Err(Error::InvalidWeight { .. })));
        assert!(matches!(parse_edges("0 0 1 -2\n"), Err(Error::InvalidWeight { .. })));
        let err = load_network("0 0 0\n1 1 0\n", "0 0 5 1\n").unwrap_err();
        assert!(matches!(err, Error::DanglingNode { node: 5, .. }), "{err}");
    }

    #[test]
    fn diameter_of_path_and_star() {
        let mut net = path3();
        assert_eq!(compute_diameter(&mut net, &DiameterConfig::default()), 6.0);
        let mut star = load_network("0 0 0\n1 1 0\n2 2 0\n", "0 0 1 2\n1 0 2 5\n").unwrap();
        assert_eq!(compute_diameter(&mut star, &DiameterConfig::default()), 7.0);
        assert_eq!(star.diameter(), Some(7.0));
    }

    #[test]
    fn sweep_diameter_on_path_is_exact() {
        let mut net = path3();
        let cfg = DiameterConfig {
            exact_threshold: 0,
            ..Default::default()
        };
        assert_eq!(compute_diameter(&mut net, &cfg), 6.0);
    }

    #[test]
    fn same_position_is_empty_path() {
        let net = path3();
        let p = EdgePosition::new(1, 0.5);
        let path = shortest_path(&net, p, p);
        assert_eq!(path.total_distance, 0.0);
        assert!(path.edge_ids.is_empty());
        // Edge ends and their nodes are the same location.
        let path = shortest_path(&net, EdgePosition::new(0, 1.0), EdgePosition::new(1, 0.0));
        assert_eq!(path.total_distance, 0.0);
    }

    #[test]
    fn interior_positions() {
        let net = path3();
        let path = shortest_path(&net, EdgePosition::new(0, 0.25), EdgePosition::new(2, 1.0));
        assert_eq!(path.total_distance, 0.75 + 2.0 + 1.0);
        assert_eq!(path.edge_ids, vec![0, 1, 2]);
        let path = shortest_path(&net, EdgePosition::new(1, 0.5), EdgePosition::new(1, 1.75));
        assert_eq!(path.total_distance, 1.25);
        assert_eq!(path.edge_ids, vec![1]);
    }

    #[test]
    fn same_edge_can_route_around() {
        // Triangle 0-1 (10), 1-2 (1), 2-0 (1): the ends of edge 0 are close
        // through node 2.
        let net = load_network("0 0 0\n1 1 0\n2 2 0\n", "0 0 1 10\n1 1 2 1\n2 2 0 1\n").unwrap();
        let d = shortest_path(&net, EdgePosition::new(0, 0.5), EdgePosition::new(0, 9.5)).total_distance;
        assert_eq!(d, 0.5 + 2.0 + 0.5);
    }

    #[test]
    fn attach_sorts_by_offset_and_validates() {
        let net = path3();
        let obj = |id, edge, offset| GeoVisualObject {
            id,
            position: EdgePosition::new(edge, offset),
            words: VisualDescriptor::new([1]),
        };
        let net2 = net
            .clone()
            .attach_objects(vec![obj(9, 1, 1.5), obj(3, 1, 0.5), obj(4, 0, 0.0)])
            .unwrap();
        assert_eq!(net2.objects()[0].id, 3);
        let on1: Vec<u64> = net2.objects_on(1).iter().map(|&i| net2.object(i).id).collect();
        assert_eq!(on1, vec![3, 9]);
        assert!(matches!(
            net.clone().attach_objects(vec![obj(1, 7, 0.0)]),
            Err(Error::UnknownEdge(7))
        ));
        assert!(matches!(
            net.attach_objects(vec![obj(1, 0, 1.5)]),
            Err(Error::OffsetOutOfRange { .. })
        ));
    }

    #[test]
    fn parses_objects() {
        let objs = parse_objects("5 0 0.5 3,1,3\n").unwrap();
        assert_eq!(objs[0].words.words(), &[1, 3]);
        assert!(parse_objects("5 0 0.5\n").is_err());
        assert!(parse_objects("5 0 0.5 1,a\n").is_err());
    }
}
