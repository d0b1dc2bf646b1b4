//! G-Tree: a hierarchical partition of the road network with border sets and
//! distance matrices, giving exact network distances and per-node distance
//! lower bounds without touching most of the graph.
//!
//! Node ids are assigned breadth-first, so parents precede children and the
//! root is node 0.
//!
//! Matrix layout:
//! - leaf: rows are the node's borders, columns its vertices (sorted order);
//! - internal: a square matrix over the concatenated borders of its children
//!   (child order), which contains the node's own borders.
//!
//! All entries are full-graph shortest-path distances.

use std::collections::{BinaryHeap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::partition::{partition, LocalGraph};
use crate::road_graph::{EdgeId, EdgePosition, HeapItem, Location, NodeId, RoadNetwork};

/// Axis-aligned bounding rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mbr {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Mbr {
    pub fn empty() -> Self {
        Mbr {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        }
    }

    pub fn include(&mut self, x: f64, y: f64) {
        self.min_x = self.min_x.min(x);
        self.min_y = self.min_y.min(y);
        self.max_x = self.max_x.max(x);
        self.max_y = self.max_y.max(y);
    }

    pub fn merge(&mut self, other: &Mbr) {
        self.min_x = self.min_x.min(other.min_x);
        self.min_y = self.min_y.min(other.min_y);
        self.max_x = self.max_x.max(other.max_x);
        self.max_y = self.max_y.max(other.max_y);
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }

    /// Euclidean distance from a point to the rectangle (0 inside).
    pub fn min_dist(&self, x: f64, y: f64) -> f64 {
        let dx = (self.min_x - x).max(0.0).max(x - self.max_x);
        let dy = (self.min_y - y).max(0.0).max(y - self.max_y);
        dx.hypot(dy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GTreeNode {
    pub id: u32,
    pub parent: Option<u32>,
    pub children: Vec<u32>,
    /// Covered road-network vertices, sorted.
    pub vertices: Vec<NodeId>,
    /// Vertices adjacent to a vertex outside this node, sorted.
    pub borders: Vec<NodeId>,
    pub mbr: Mbr,
    /// Road edges assigned to this leaf (empty for internal nodes).
    pub edge_ids: Vec<EdgeId>,
    matrix: Vec<f64>,
    width: usize,
    depth: u32,
    /// Matrix column of each border.
    border_cols: Vec<u32>,
    /// Where this node's borders start among the parent's columns.
    col_offset: u32,
    /// Longest cut edge assigned inside this subtree that leaves it.
    slack: f64,
}

impl GTreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Width of the distance matrix.
    pub fn columns(&self) -> usize {
        self.width
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    #[inline]
    fn at(&self, row: usize, col: usize) -> f64 {
        self.matrix[row * self.width + col]
    }

    /// Matrix row holding border `i`.
    #[inline]
    fn border_row(&self, i: usize) -> usize {
        if self.is_leaf() {
            i
        } else {
            self.border_cols[i] as usize
        }
    }

    /// Distance between borders `i` and `j` of this node.
    fn border_to_border(&self, i: usize, j: usize) -> f64 {
        self.at(self.border_row(i), self.border_cols[j] as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GTreeConfig {
    pub fanout: usize,
    pub leaf_capacity: usize,
    pub seed: u64,
}

impl Default for GTreeConfig {
    fn default() -> Self {
        GTreeConfig {
            fanout: 4,
            leaf_capacity: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GTree {
    nodes: Vec<GTreeNode>,
    config: GTreeConfig,
    leaf_of_vertex: Vec<u32>,
    /// Index of each vertex within its leaf's vertex list.
    pos_in_leaf: Vec<u32>,
}

/// Serialized form of a tree node: everything except derived bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct NodeParts {
    pub parent: Option<u32>,
    pub children: Vec<u32>,
    pub vertices: Vec<NodeId>,
    pub borders: Vec<NodeId>,
    pub mbr: Mbr,
    pub edge_ids: Vec<EdgeId>,
    pub matrix: Vec<f64>,
}

impl GTree {
    pub fn root(&self) -> u32 {
        0
    }

    pub fn nodes(&self) -> &[GTreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: u32) -> &GTreeNode {
        &self.nodes[id as usize]
    }

    pub fn config(&self) -> GTreeConfig {
        self.config
    }

    pub fn fanout(&self) -> usize {
        self.config.fanout
    }

    pub fn leaf_capacity(&self) -> usize {
        self.config.leaf_capacity
    }

    pub fn leaf_of_vertex(&self, v: NodeId) -> u32 {
        self.leaf_of_vertex[v as usize]
    }

    /// Leaf that owns an edge: the leaf of its lower-numbered endpoint.
    pub fn leaf_of_edge(&self, net: &RoadNetwork, e: EdgeId) -> u32 {
        let edge = net.edge(e);
        self.leaf_of_vertex(edge.u.min(edge.v))
    }

    pub fn height(&self) -> u32 {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0) + 1
    }

    /// Whether `ancestor` is `node` or one of its ancestors.
    pub fn is_ancestor(&self, ancestor: u32, mut node: u32) -> bool {
        let target = self.node(ancestor).depth;
        while self.node(node).depth > target {
            node = self.node(node).parent.expect("non-root has a parent");
        }
        node == ancestor
    }

    /// Vertices naming the columns of a node's matrix.
    pub fn column_vertices(&self, id: u32) -> Vec<NodeId> {
        let n = self.node(id);
        if n.is_leaf() {
            n.vertices.clone()
        } else {
            n.children
                .iter()
                .flat_map(|&c| self.node(c).borders.iter().copied())
                .collect()
        }
    }

    /// Stored distance between border `b` of node `id` and a column vertex.
    pub fn matrix_distance(&self, id: u32, b: NodeId, col_vertex: NodeId) -> Option<f64> {
        let n = self.node(id);
        let i = n.borders.binary_search(&b).ok()?;
        let j = self.column_vertices(id).iter().position(|&v| v == col_vertex)?;
        Some(n.at(n.border_row(i), j))
    }

    pub(crate) fn to_parts(&self) -> Vec<NodeParts> {
        self.nodes
            .iter()
            .map(|n| NodeParts {
                parent: n.parent,
                children: n.children.clone(),
                vertices: n.vertices.clone(),
                borders: n.borders.clone(),
                mbr: n.mbr,
                edge_ids: n.edge_ids.clone(),
                matrix: n.matrix.clone(),
            })
            .collect()
    }

    /// Reassembles a tree from stored parts, recomputing derived fields.
    pub(crate) fn from_parts(net: &RoadNetwork, config: GTreeConfig, parts: Vec<NodeParts>) -> Result<GTree> {
        let corrupt = |m: &str| Error::Corrupt(format!("g-tree: {m}"));
        if parts.is_empty() || parts[0].parent.is_some() {
            return Err(corrupt("missing root"));
        }
        let count = parts.len() as u32;
        for (i, p) in parts.iter().enumerate() {
            if p.children.iter().any(|&c| c <= i as u32 || c >= count) {
                return Err(corrupt("child ids must follow their parent"));
            }
            if let Some(par) = p.parent {
                if par >= i as u32 || !parts[par as usize].children.contains(&(i as u32)) {
                    return Err(corrupt("parent link"));
                }
            }
            if p.vertices.iter().chain(&p.borders).any(|&v| v as usize >= net.num_nodes())
                || p.edge_ids.iter().any(|&e| e as usize >= net.num_edges())
            {
                return Err(corrupt("vertex or edge out of range"));
            }
        }
        let mut nodes: Vec<GTreeNode> = parts
            .into_iter()
            .enumerate()
            .map(|(i, p)| GTreeNode {
                id: i as u32,
                parent: p.parent,
                children: p.children,
                vertices: p.vertices,
                borders: p.borders,
                mbr: p.mbr,
                edge_ids: p.edge_ids,
                matrix: p.matrix,
                width: 0,
                depth: 0,
                border_cols: Vec::new(),
                col_offset: 0,
                slack: 0.0,
            })
            .collect();
        let (leaf_of_vertex, pos_in_leaf) = leaf_maps(net, &nodes).ok_or_else(|| corrupt("leaves must partition the vertices"))?;
        derive(net, &mut nodes, &leaf_of_vertex, &pos_in_leaf).ok_or_else(|| corrupt("border layout"))?;
        for n in &nodes {
            let rows = if n.is_leaf() { n.borders.len() } else { n.width };
            if n.matrix.len() != rows * n.width {
                return Err(corrupt("matrix size"));
            }
        }
        Ok(GTree {
            nodes,
            config,
            leaf_of_vertex,
            pos_in_leaf,
        })
    }

    /// Nearest point on the network to raw coordinates, found by best-first
    /// descent over node rectangles.
    pub fn snap(&self, net: &RoadNetwork, x: f64, y: f64) -> EdgePosition {
        #[derive(PartialEq)]
        struct Entry(f64, u32);
        impl Eq for Entry {}
        impl Ord for Entry {
            fn cmp(&self, o: &Self) -> std::cmp::Ordering {
                o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
            }
        }
        impl PartialOrd for Entry {
            fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(o))
            }
        }
        let mut heap = BinaryHeap::from([Entry(self.nodes[0].mbr.min_dist(x, y), 0)]);
        let mut best: Option<(f64, EdgePosition)> = None;
        while let Some(Entry(d, id)) = heap.pop() {
            if best.is_some_and(|(bd, _)| d > bd) {
                break;
            }
            let node = self.node(id);
            for &c in &node.children {
                heap.push(Entry(self.node(c).mbr.min_dist(x, y), c));
            }
            for &e in &node.edge_ids {
                let edge = net.edge(e);
                let (a, b) = (net.node(edge.u), net.node(edge.v));
                let (dx, dy) = (b.x - a.x, b.y - a.y);
                let len2 = dx * dx + dy * dy;
                let t = if len2 > 0.0 {
                    (((x - a.x) * dx + (y - a.y) * dy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let d = (a.x + t * dx - x).hypot(a.y + t * dy - y);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, EdgePosition::new(e, t * edge.weight)));
                }
            }
        }
        best.map(|(_, p)| p).expect("network has edges")
    }
}

fn leaf_maps(net: &RoadNetwork, nodes: &[GTreeNode]) -> Option<(Vec<u32>, Vec<u32>)> {
    let mut leaf_of_vertex = vec![u32::MAX; net.num_nodes()];
    let mut pos_in_leaf = vec![0u32; net.num_nodes()];
    for n in nodes.iter().filter(|n| n.is_leaf()) {
        for (i, &v) in n.vertices.iter().enumerate() {
            if leaf_of_vertex[v as usize] != u32::MAX {
                return None;
            }
            leaf_of_vertex[v as usize] = n.id;
            pos_in_leaf[v as usize] = i as u32;
        }
    }
    if leaf_of_vertex.contains(&u32::MAX) {
        return None;
    }
    Some((leaf_of_vertex, pos_in_leaf))
}

/// Fills depth, column bookkeeping and slack from the stored structure.
fn derive(net: &RoadNetwork, nodes: &mut [GTreeNode], leaf_of_vertex: &[u32], pos_in_leaf: &[u32]) -> Option<()> {
    for i in 1..nodes.len() {
        let p = nodes[i].parent? as usize;
        nodes[i].depth = nodes[p].depth + 1;
    }
    for i in 0..nodes.len() {
        let mut offset = 0u32;
        for k in 0..nodes[i].children.len() {
            let c = nodes[i].children[k] as usize;
            nodes[c].col_offset = offset;
            offset += nodes[c].borders.len() as u32;
        }
        nodes[i].width = if nodes[i].is_leaf() {
            nodes[i].vertices.len()
        } else {
            offset as usize
        };
    }
    for i in 0..nodes.len() {
        let cols: Option<Vec<u32>> = if nodes[i].is_leaf() {
            nodes[i]
                .borders
                .iter()
                .map(|&b| (leaf_of_vertex[b as usize] == i as u32).then_some(pos_in_leaf[b as usize]))
                .collect()
        } else {
            nodes[i]
                .borders
                .iter()
                .map(|&b| {
                    nodes[i].children.iter().find_map(|&c| {
                        let child = &nodes[c as usize];
                        child.borders.binary_search(&b).ok().map(|j| child.col_offset + j as u32)
                    })
                })
                .collect()
        };
        nodes[i].border_cols = cols?;
    }
    for_each_cut_edge(net, nodes, leaf_of_vertex, |nodes, node, endpoint, other, w| {
        if endpoint < other {
            let n = &mut nodes[node as usize];
            n.slack = n.slack.max(w);
        }
    });
    Some(())
}

/// Walks every cut edge from both leaves up to (excluding) their common
/// ancestor, calling `visit(nodes, node, endpoint_inside, endpoint_outside, weight)`.
fn for_each_cut_edge(
    net: &RoadNetwork,
    nodes: &mut [GTreeNode],
    leaf_of_vertex: &[u32],
    mut visit: impl FnMut(&mut [GTreeNode], u32, NodeId, NodeId, f64),
) {
    for e in net.edges() {
        let (mut a, mut b) = (leaf_of_vertex[e.u as usize], leaf_of_vertex[e.v as usize]);
        while a != b {
            let (da, db) = (nodes[a as usize].depth, nodes[b as usize].depth);
            if da >= db {
                visit(nodes, a, e.u, e.v, e.weight);
                a = nodes[a as usize].parent.expect("distinct leaves share the root");
            }
            if db >= da {
                visit(nodes, b, e.v, e.u, e.weight);
                b = nodes[b as usize].parent.expect("distinct leaves share the root");
            }
        }
    }
}

/// Builds the partition hierarchy and its distance matrices.
pub fn build_gtree(net: &RoadNetwork, config: &GTreeConfig) -> Result<GTree> {
    if config.fanout < 2 {
        return Err(Error::InvalidParameter(format!("fanout must be at least 2, got {}", config.fanout)));
    }
    if config.leaf_capacity < config.fanout {
        return Err(Error::InvalidParameter(format!(
            "leaf capacity {} is below fanout {}",
            config.leaf_capacity, config.fanout
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut nodes = vec![blank_node(0, None, (0..net.num_nodes() as NodeId).collect())];
    let mut scratch = vec![u32::MAX; net.num_nodes()];
    let mut i = 0;
    while i < nodes.len() {
        if nodes[i].vertices.len() > config.leaf_capacity {
            let groups = split(net, &nodes[i].vertices, config.fanout, &mut rng, &mut scratch);
            for g in groups {
                let id = nodes.len() as u32;
                nodes[i].children.push(id);
                nodes.push(blank_node(id, Some(i as u32), g));
            }
        }
        i += 1;
    }
    for i in 1..nodes.len() {
        nodes[i].depth = nodes[nodes[i].parent.unwrap() as usize].depth + 1;
    }
    let (leaf_of_vertex, pos_in_leaf) = leaf_maps(net, &nodes).expect("leaves partition the vertices");

    let mut borders: Vec<Vec<NodeId>> = vec![Vec::new(); nodes.len()];
    for_each_cut_edge(net, &mut nodes, &leaf_of_vertex, |_, node, inside, _, _| {
        borders[node as usize].push(inside);
    });
    for (n, mut b) in nodes.iter_mut().zip(borders) {
        b.sort_unstable();
        b.dedup();
        n.borders = b;
    }
    for e in net.edges() {
        let leaf = leaf_of_vertex[e.u.min(e.v) as usize] as usize;
        nodes[leaf].edge_ids.push(e.id);
    }
    for i in (0..nodes.len()).rev() {
        let mut mbr = Mbr::empty();
        if nodes[i].is_leaf() {
            for &v in &nodes[i].vertices {
                let p = net.node(v);
                mbr.include(p.x, p.y);
            }
            for &e in &nodes[i].edge_ids {
                let edge = net.edge(e);
                for v in [edge.u, edge.v] {
                    let p = net.node(v);
                    mbr.include(p.x, p.y);
                }
            }
        } else {
            for &c in &nodes[i].children {
                mbr.merge(&nodes[c as usize].mbr);
            }
        }
        nodes[i].mbr = mbr;
    }
    derive(net, &mut nodes, &leaf_of_vertex, &pos_in_leaf).expect("borders are consistent by construction");

    let mut tree = GTree {
        nodes,
        config: *config,
        leaf_of_vertex,
        pos_in_leaf,
    };
    tree.build_local_matrices(net);
    tree.refine_to_global();
    Ok(tree)
}

fn blank_node(id: u32, parent: Option<u32>, vertices: Vec<NodeId>) -> GTreeNode {
    GTreeNode {
        id,
        parent,
        children: Vec::new(),
        vertices,
        borders: Vec::new(),
        mbr: Mbr::empty(),
        edge_ids: Vec::new(),
        matrix: Vec::new(),
        width: 0,
        depth: 0,
        border_cols: Vec::new(),
        col_offset: 0,
        slack: 0.0,
    }
}

/// Splits a vertex set into up to `fanout` nonempty sorted groups.
fn split(net: &RoadNetwork, vertices: &[NodeId], fanout: usize, rng: &mut ChaCha8Rng, scratch: &mut [u32]) -> Vec<Vec<NodeId>> {
    for (i, &v) in vertices.iter().enumerate() {
        scratch[v as usize] = i as u32;
    }
    let mut edges = Vec::new();
    for &v in vertices {
        for &e in net.incident(v) {
            let u = net.edge(e).other(v);
            let lu = scratch[u as usize];
            if lu != u32::MAX && v < u {
                edges.push((scratch[v as usize], lu));
            }
        }
    }
    let graph = LocalGraph::from_edges(vertices.len(), edges);
    let labels = partition(&graph, fanout, rng);
    for &v in vertices {
        scratch[v as usize] = u32::MAX;
    }
    let mut groups: Vec<Vec<NodeId>> = vec![Vec::new(); fanout];
    for (i, &v) in vertices.iter().enumerate() {
        groups[labels[i] as usize].push(v);
    }
    groups.retain(|g| !g.is_empty());
    if groups.len() < 2 {
        let chunk = vertices.len().div_ceil(fanout);
        groups = vertices.chunks(chunk).map(<[NodeId]>::to_vec).collect();
    }
    groups
}

impl GTree {
    /// Distances confined to each node's own subgraph, leaves first.
    fn build_local_matrices(&mut self, net: &RoadNetwork) {
        for i in (0..self.nodes.len()).rev() {
            let matrix = if self.nodes[i].is_leaf() {
                let node = &self.nodes[i];
                node.borders
                    .par_iter()
                    .flat_map_iter(|&b| self.leaf_dijkstra(net, i as u32, b))
                    .collect()
            } else {
                self.internal_local_matrix(net, i)
            };
            self.nodes[i].matrix = matrix;
        }
    }

    /// Dijkstra from `source` using only edges with both ends in `leaf`.
    /// Indexed by position in the leaf's vertex list.
    fn leaf_dijkstra(&self, net: &RoadNetwork, leaf: u32, source: NodeId) -> Vec<f64> {
        let node = self.node(leaf);
        let mut dist = vec![f64::INFINITY; node.vertices.len()];
        let mut heap = BinaryHeap::new();
        dist[self.pos_in_leaf[source as usize] as usize] = 0.0;
        heap.push(HeapItem { dist: 0.0, node: source });
        while let Some(HeapItem { dist: d, node: v }) = heap.pop() {
            if d > dist[self.pos_in_leaf[v as usize] as usize] {
                continue;
            }
            for &e in net.incident(v) {
                let edge = net.edge(e);
                let u = edge.other(v);
                if self.leaf_of_vertex[u as usize] != leaf {
                    continue;
                }
                let nd = d + edge.weight;
                let slot = &mut dist[self.pos_in_leaf[u as usize] as usize];
                if nd < *slot {
                    *slot = nd;
                    heap.push(HeapItem { dist: nd, node: u });
                }
            }
        }
        dist
    }

    fn internal_local_matrix(&self, net: &RoadNetwork, i: usize) -> Vec<f64> {
        let cols = self.column_vertices(i as u32);
        let c = cols.len();
        let index: HashMap<NodeId, u32> = cols.iter().enumerate().map(|(k, &v)| (v, k as u32)).collect();
        let mut adj: Vec<Vec<(u32, f64)>> = vec![Vec::new(); c];
        for &child in &self.nodes[i].children {
            let ch = self.node(child);
            let off = ch.col_offset as usize;
            let nb = ch.borders.len();
            for a in 0..nb {
                for b in 0..nb {
                    let w = ch.border_to_border(a, b);
                    if a != b && w.is_finite() {
                        adj[off + a].push(((off + b) as u32, w));
                    }
                }
            }
        }
        for (k, &v) in cols.iter().enumerate() {
            for &e in net.incident(v) {
                let edge = net.edge(e);
                if let Some(&u) = index.get(&edge.other(v)) {
                    adj[k].push((u, edge.weight));
                }
            }
        }
        (0..c)
            .into_par_iter()
            .flat_map_iter(|s| {
                let mut dist = vec![f64::INFINITY; c];
                let mut heap = BinaryHeap::new();
                dist[s] = 0.0;
                heap.push(HeapItem { dist: 0.0, node: s as u32 });
                while let Some(HeapItem { dist: d, node: v }) = heap.pop() {
                    if d > dist[v as usize] {
                        continue;
                    }
                    for &(u, w) in &adj[v as usize] {
                        let nd = d + w;
                        if nd < dist[u as usize] {
                            dist[u as usize] = nd;
                            heap.push(HeapItem { dist: nd, node: u });
                        }
                    }
                }
                dist
            })
            .collect()
    }

    /// Top-down pass turning subgraph-local distances into full-graph ones:
    /// a path that leaves a node does so through its borders, whose mutual
    /// distances the (already global) parent matrix knows.
    fn refine_to_global(&mut self) {
        for i in 1..self.nodes.len() {
            let node = &self.nodes[i];
            let parent = &self.nodes[node.parent.unwrap() as usize];
            let nb = node.borders.len();
            if nb == 0 {
                continue;
            }
            let off = node.col_offset as usize;
            let pc = parent.columns();
            let outer: Vec<f64> = (0..nb)
                .flat_map(|a| (0..nb).map(move |b| (a, b)))
                .map(|(a, b)| parent.matrix[(off + a) * pc + off + b])
                .collect();
            let cols = node.columns();
            let refined: Vec<f64> = if node.is_leaf() {
                (0..nb)
                    .into_par_iter()
                    .flat_map_iter(|a| {
                        let outer = &outer;
                        (0..cols).map(move |y| {
                            let mut best = node.at(a, y);
                            for b in 0..nb {
                                best = best.min(outer[a * nb + b] + node.at(b, y));
                            }
                            best
                        })
                    })
                    .collect()
            } else {
                let bc: Vec<usize> = node.border_cols.iter().map(|&c| c as usize).collect();
                (0..cols)
                    .into_par_iter()
                    .flat_map_iter(|x| {
                        // Best way from x to the outside, ending at border b.
                        let exit: Vec<f64> = (0..nb)
                            .map(|b| {
                                (0..nb)
                                    .map(|a| node.at(x, bc[a]) + outer[a * nb + b])
                                    .fold(f64::INFINITY, f64::min)
                            })
                            .collect();
                        let bc = &bc;
                        (0..cols).map(move |y| {
                            let mut best = node.at(x, y);
                            for b in 0..nb {
                                best = best.min(exit[b] + node.at(bc[b], y));
                            }
                            best
                        })
                    })
                    .collect()
            };
            self.nodes[i].matrix = refined;
        }
    }
}

struct Source {
    vertex: NodeId,
    cost: f64,
    leaf: u32,
    /// Root-to-leaf path, indexed by depth.
    path: Vec<u32>,
    /// Distances from the source vertex to each node's borders.
    to_borders: Vec<Option<Vec<f64>>>,
    in_leaf: Option<Vec<f64>>,
}

/// Distances from one query position, computed lazily through the tree and
/// memoized per node.
pub struct QueryDistances<'a> {
    tree: &'a GTree,
    net: &'a RoadNetwork,
    location: Location,
    sources: Vec<Source>,
    bounds: Vec<f64>,
}

impl<'a> QueryDistances<'a> {
    pub fn new(tree: &'a GTree, net: &'a RoadNetwork, position: EdgePosition) -> Self {
        let sources = net
            .access_points(position)
            .into_iter()
            .map(|(vertex, cost)| {
                let leaf = tree.leaf_of_vertex(vertex);
                let mut path = vec![leaf];
                let mut cur = leaf;
                while let Some(p) = tree.node(cur).parent {
                    path.push(p);
                    cur = p;
                }
                path.reverse();
                Source {
                    vertex,
                    cost,
                    leaf,
                    path,
                    to_borders: vec![None; tree.nodes.len()],
                    in_leaf: None,
                }
            })
            .collect();
        QueryDistances {
            tree,
            net,
            location: net.locate(position),
            sources,
            bounds: vec![f64::NAN; tree.nodes.len()],
        }
    }

    fn on_path(&self, s: usize, node: u32) -> bool {
        let d = self.tree.node(node).depth as usize;
        self.sources[s].path.get(d) == Some(&node)
    }

    /// Node whose border vector `node`'s vector is derived from.
    fn dependency(&self, s: usize, node: u32) -> Option<u32> {
        let src = &self.sources[s];
        if node == src.leaf {
            return None;
        }
        let tree = self.tree;
        if self.on_path(s, node) {
            return Some(src.path[tree.node(node).depth as usize + 1]);
        }
        let p = tree.node(node).parent.expect("root is always on the path");
        if self.on_path(s, p) {
            Some(src.path[tree.node(p).depth as usize + 1])
        } else {
            Some(p)
        }
    }

    fn ensure_borders(&mut self, s: usize, node: u32) {
        let mut chain = Vec::new();
        let mut cur = Some(node);
        while let Some(n) = cur {
            if self.sources[s].to_borders[n as usize].is_some() {
                break;
            }
            chain.push(n);
            cur = self.dependency(s, n);
        }
        for &n in chain.iter().rev() {
            let v = self.compute_borders(s, n);
            self.sources[s].to_borders[n as usize] = Some(v);
        }
    }

    fn compute_borders(&self, s: usize, node: u32) -> Vec<f64> {
        let tree = self.tree;
        let src = &self.sources[s];
        let n = tree.node(node);
        let Some(dep) = self.dependency(s, node) else {
            let col = tree.pos_in_leaf[src.vertex as usize] as usize;
            return (0..n.borders.len()).map(|i| n.at(i, col)).collect();
        };
        let from = src.to_borders[dep as usize].as_deref().expect("dependency computed first");
        let min_plus = |m: &GTreeNode, rows: &dyn Fn(usize) -> usize, cols: &dyn Fn(usize) -> usize| -> Vec<f64> {
            (0..n.borders.len())
                .map(|j| {
                    from.iter()
                        .enumerate()
                        .map(|(i, &d)| d + m.at(rows(i), cols(j)))
                        .fold(f64::INFINITY, f64::min)
                })
                .collect()
        };
        if self.on_path(s, node) {
            let child = tree.node(dep);
            let off = child.col_offset as usize;
            min_plus(n, &|i| off + i, &|j| n.border_cols[j] as usize)
        } else {
            let parent = tree.node(n.parent.unwrap());
            let target = n.col_offset as usize;
            if tree.node(dep).parent == n.parent {
                let off = tree.node(dep).col_offset as usize;
                min_plus(parent, &|i| off + i, &|j| target + j)
            } else {
                min_plus(parent, &|i| parent.border_cols[i] as usize, &|j| target + j)
            }
        }
    }

    fn vertex_from_source(&mut self, s: usize, y: NodeId) -> f64 {
        let tree = self.tree;
        let leaf = tree.leaf_of_vertex(y);
        let col = tree.pos_in_leaf[y as usize] as usize;
        let ln = tree.node(leaf);
        let mut best = f64::INFINITY;
        if leaf == self.sources[s].leaf {
            if self.sources[s].in_leaf.is_none() {
                let v = tree.leaf_dijkstra(self.net, leaf, self.sources[s].vertex);
                self.sources[s].in_leaf = Some(v);
            }
            best = self.sources[s].in_leaf.as_ref().unwrap()[col];
        }
        if !ln.borders.is_empty() {
            self.ensure_borders(s, leaf);
            let to_b = self.sources[s].to_borders[leaf as usize].as_ref().unwrap();
            for (i, &d) in to_b.iter().enumerate() {
                best = best.min(d + ln.at(i, col));
            }
        }
        best
    }

    /// Network distance from the query position to vertex `y`.
    pub fn to_vertex(&mut self, y: NodeId) -> f64 {
        (0..self.sources.len())
            .map(|s| self.sources[s].cost + self.vertex_from_source(s, y))
            .fold(f64::INFINITY, f64::min)
    }

    /// Network distance from the query position to any position.
    pub fn to_position(&mut self, target: EdgePosition) -> f64 {
        let loc = self.net.locate(target);
        let via_nodes = match loc {
            Location::Node(n) => self.to_vertex(n),
            Location::Interior(e, t) => {
                let edge = *self.net.edge(e);
                (self.to_vertex(edge.u) + t).min(self.to_vertex(edge.v) + (edge.weight - t))
            }
        };
        match (self.location, loc) {
            (Location::Interior(a, s), Location::Interior(b, t)) if a == b => via_nodes.min((s - t).abs()),
            _ => via_nodes,
        }
    }

    pub fn location(&self) -> Location {
        self.location
    }

    /// Whether the query position touches a vertex covered by `node`.
    pub fn inside(&self, node: u32) -> bool {
        (0..self.sources.len()).any(|s| self.on_path(s, node))
    }

    /// Lower bound on the distance to anything stored beneath `node`:
    /// 0 when the query is inside, otherwise the nearest border less the
    /// longest cut edge hanging out of the subtree, and never below the
    /// parent's bound.
    pub fn node_bound(&mut self, node: u32) -> f64 {
        let cached = self.bounds[node as usize];
        if !cached.is_nan() {
            return cached;
        }
        let parent = self.tree.node(node).parent.map_or(0.0, |p| self.node_bound(p));
        let own = if self.inside(node) {
            0.0
        } else {
            let mut nearest = f64::INFINITY;
            for s in 0..self.sources.len() {
                self.ensure_borders(s, node);
                let to_b = self.sources[s].to_borders[node as usize].as_ref().unwrap();
                let m = to_b.iter().copied().fold(f64::INFINITY, f64::min);
                nearest = nearest.min(self.sources[s].cost + m);
            }
            (nearest - self.tree.node(node).slack).max(0.0)
        };
        let bound = own.max(parent);
        self.bounds[node as usize] = bound;
        bound
    }
}

/// Exact network distance between two positions through the tree.
pub fn gtree_distance(tree: &GTree, net: &RoadNetwork, a: EdgePosition, b: EdgePosition) -> f64 {
    if net.locate(a) == net.locate(b) {
        return 0.0;
    }
    QueryDistances::new(tree, net, a).to_position(b)
}

/// Lower bound on the network distance from `q` to any object on an edge
/// assigned beneath `node`.
pub fn min_network_distance(tree: &GTree, net: &RoadNetwork, q: EdgePosition, node: u32) -> f64 {
    QueryDistances::new(tree, net, q).node_bound(node)
}
