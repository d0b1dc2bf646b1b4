//! The VIG-Tree: a G-Tree whose nodes also carry visual inverted files,
//! per-leaf edge arrays, and an (edge, word) → objects posting store.

use crate::error::{Error, Result};
use crate::gtree::{GTree, QueryDistances};
use crate::road_graph::{compute_diameter, DiameterConfig, EdgeId, NodeId, RoadNetwork};
use crate::snapshot_query::Query;
use crate::visual::{jaccard_distance, visual_lower_bound, InvertedFile, VisualDescriptor};

/// Weighting between network proximity and visual dissimilarity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreParams {
    pub mu: f64,
    pub diameter: f64,
}

impl ScoreParams {
    pub fn new(mu: f64, diameter: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::InvalidParameter(format!("mu must be in [0, 1], got {mu}")));
        }
        if !(diameter > 0.0 && diameter.is_finite()) {
            return Err(Error::InvalidParameter(format!("diameter must be positive, got {diameter}")));
        }
        Ok(ScoreParams { mu, diameter })
    }
}

/// Scores are snapped to multiples of 2^-40. Two objects that tie exactly
/// would otherwise get scores an ulp apart, in an order that depends on how
/// each was summed, and rankings along a moving trace would flicker.
const SCORE_GRID: f64 = (1u64 << 40) as f64;

/// `mu * dist / diameter + (1 - mu) * vdist`. Smaller is better. The
/// proximity term is not clamped when an estimated diameter is exceeded.
#[inline]
pub fn score(params: ScoreParams, dist: f64, vdist: f64) -> f64 {
    let raw = params.mu * (dist / params.diameter) + (1.0 - params.mu) * vdist;
    (raw * SCORE_GRID).round() / SCORE_GRID
}

/// Loosens a lower bound by a few ulps so that bounds assembled through a
/// different summation order than the exact score can never exceed it.
#[inline]
pub(crate) fn relax(bound: f64) -> f64 {
    (bound - 1e-12 * bound.abs().max(1.0)).max(0.0)
}

/// Sorted map from (edge id, word id) to the objects on that edge holding
/// the word, laid out edge-major so one edge's words form a contiguous run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgePostings {
    /// Per edge, the range of its entries in `words`.
    edge_offsets: Vec<u32>,
    words: Vec<u32>,
    /// Per (edge, word) key, the range of its objects.
    word_offsets: Vec<u32>,
    objects: Vec<u32>,
}

impl EdgePostings {
    fn build(net: &RoadNetwork) -> Self {
        let mut p = EdgePostings {
            edge_offsets: vec![0],
            words: Vec::new(),
            word_offsets: vec![0],
            objects: Vec::new(),
        };
        let mut pairs: Vec<(u32, u32)> = Vec::new();
        for e in 0..net.num_edges() as EdgeId {
            pairs.clear();
            for &o in net.objects_on(e) {
                pairs.extend(net.object(o).words.words().iter().map(|&w| (w, o)));
            }
            pairs.sort_unstable();
            for (i, &(w, o)) in pairs.iter().enumerate() {
                if i == 0 || pairs[i - 1].0 != w {
                    if i > 0 {
                        p.word_offsets.push(p.objects.len() as u32);
                    }
                    p.words.push(w);
                }
                p.objects.push(o);
            }
            if !pairs.is_empty() {
                p.word_offsets.push(p.objects.len() as u32);
            }
            p.edge_offsets.push(p.words.len() as u32);
        }
        p
    }

    fn key_range(&self, edge: EdgeId) -> std::ops::Range<usize> {
        self.edge_offsets[edge as usize] as usize..self.edge_offsets[edge as usize + 1] as usize
    }

    /// Sorted distinct words of the objects on `edge`.
    pub fn edge_words(&self, edge: EdgeId) -> &[u32] {
        &self.words[self.key_range(edge)]
    }

    /// Objects (internal indexes, ascending) on `edge` whose descriptor holds `word`.
    pub fn get(&self, edge: EdgeId, word: u32) -> &[u32] {
        let range = self.key_range(edge);
        match self.words[range.clone()].binary_search(&word) {
            Ok(i) => {
                let k = range.start + i;
                &self.objects[self.word_offsets[k] as usize..self.word_offsets[k + 1] as usize]
            }
            Err(_) => &[],
        }
    }

    /// All (word, objects) entries of one edge in word order.
    pub fn scan(&self, edge: EdgeId) -> impl Iterator<Item = (u32, &[u32])> + '_ {
        self.key_range(edge).map(move |k| {
            (
                self.words[k],
                &self.objects[self.word_offsets[k] as usize..self.word_offsets[k + 1] as usize],
            )
        })
    }

    /// Number of (edge, word) keys.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// One row of a leaf's edge array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubnetworkEdge {
    pub edge: EdgeId,
    pub u: NodeId,
    pub v: NodeId,
    pub length: f64,
}

/// What a lower bound is asked for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Node(u32),
    Edge(EdgeId),
    /// Internal object index (position in id order).
    Object(u32),
}

#[derive(Debug, Clone)]
pub struct VigTree {
    pub(crate) net: RoadNetwork,
    pub(crate) tree: GTree,
    pub(crate) node_files: Vec<InvertedFile>,
    pub(crate) postings: EdgePostings,
    /// Per object, distances to its edge's u and v endpoints.
    pub(crate) object_ends: Vec<(f64, f64)>,
    pub(crate) subnetworks: Vec<Vec<SubnetworkEdge>>,
    pub(crate) mu_default: f64,
}

impl VigTree {
    pub fn network(&self) -> &RoadNetwork {
        &self.net
    }

    pub fn gtree(&self) -> &GTree {
        &self.tree
    }

    pub fn diameter(&self) -> f64 {
        self.net.diameter().expect("index networks carry a diameter")
    }

    pub fn mu_default(&self) -> f64 {
        self.mu_default
    }

    pub fn params(&self, mu: f64) -> Result<ScoreParams> {
        ScoreParams::new(mu, self.diameter())
    }

    /// Inverted file of a tree node: word → edges at leaves, word → children
    /// elsewhere.
    pub fn node_file(&self, node: u32) -> &InvertedFile {
        &self.node_files[node as usize]
    }

    /// Union of the words of every object beneath `node`.
    pub fn node_words(&self, node: u32) -> &[u32] {
        self.node_files[node as usize].words()
    }

    pub fn postings(&self) -> &EdgePostings {
        &self.postings
    }

    /// Distances from object `index` to its edge's (u, v) endpoints.
    pub fn object_ends(&self, index: u32) -> (f64, f64) {
        self.object_ends[index as usize]
    }

    /// Edge array of a leaf (empty for internal nodes).
    pub fn subnetwork(&self, node: u32) -> &[SubnetworkEdge] {
        &self.subnetworks[node as usize]
    }

    /// Children (or leaf edges) sharing at least one word with `query`, with
    /// the number of shared words, in ascending target order.
    pub(crate) fn shared_targets(&self, node: u32, query: &VisualDescriptor, scanned: &mut u64) -> Vec<(u32, usize)> {
        let file = &self.node_files[node as usize];
        let mut hits: Vec<u32> = Vec::new();
        for &w in query.words() {
            let p = file.postings(w);
            *scanned += p.len() as u64;
            hits.extend_from_slice(p);
        }
        count_runs(hits)
    }

    /// Objects on `edge` sharing at least one word with `query`, with the
    /// number of shared words, in ascending index order.
    pub(crate) fn shared_objects(&self, edge: EdgeId, query: &VisualDescriptor, scanned: &mut u64) -> Vec<(u32, usize)> {
        let mut hits: Vec<u32> = Vec::new();
        for &w in query.words() {
            let p = self.postings.get(edge, w);
            *scanned += p.len() as u64;
            hits.extend_from_slice(p);
        }
        count_runs(hits)
    }
}

fn count_runs(mut hits: Vec<u32>) -> Vec<(u32, usize)> {
    hits.sort_unstable();
    let mut out: Vec<(u32, usize)> = Vec::new();
    for h in hits {
        match out.last_mut() {
            Some((t, n)) if *t == h => *n += 1,
            _ => out.push((h, 1)),
        }
    }
    out
}

/// Assembles the index over a network with attached objects. Computes the
/// diameter first if the network does not carry one.
pub fn build_index(mut net: RoadNetwork, tree: GTree, mu_default: f64) -> Result<VigTree> {
    ScoreParams::new(mu_default, 1.0)?;
    if let Some(o) = net.objects().iter().find(|o| o.words.is_empty()) {
        return Err(Error::EmptyObjectDescriptor(o.id));
    }
    if tree.nodes().iter().filter(|n| n.is_leaf()).map(|n| n.vertices.len()).sum::<usize>() != net.num_nodes() {
        return Err(Error::InvalidParameter("g-tree was built over a different network".into()));
    }
    if net.diameter().is_none() {
        compute_diameter(&mut net, &DiameterConfig::default());
    }
    let postings = EdgePostings::build(&net);
    let node_files = build_node_files(&tree, &postings);
    Ok(finish(net, tree, node_files, postings, mu_default))
}

fn build_node_files(tree: &GTree, postings: &EdgePostings) -> Vec<InvertedFile> {
    let mut files: Vec<InvertedFile> = vec![InvertedFile::default(); tree.nodes().len()];
    for node in tree.nodes().iter().rev() {
        let pairs: Vec<(u32, u32)> = if node.is_leaf() {
            node.edge_ids
                .iter()
                .flat_map(|&e| postings.edge_words(e).iter().map(move |&w| (w, e)))
                .collect()
        } else {
            node.children
                .iter()
                .flat_map(|&c| files[c as usize].words().iter().map(move |&w| (w, c)))
                .collect()
        };
        files[node.id as usize] = InvertedFile::from_pairs(pairs);
    }
    files
}

/// Fills the structures derivable from the network and tree.
pub(crate) fn finish(
    net: RoadNetwork,
    tree: GTree,
    node_files: Vec<InvertedFile>,
    postings: EdgePostings,
    mu_default: f64,
) -> VigTree {
    let object_ends = net
        .objects()
        .iter()
        .map(|o| {
            let w = net.edge(o.position.edge).weight;
            (o.position.offset, w - o.position.offset)
        })
        .collect();
    let subnetworks = tree
        .nodes()
        .iter()
        .map(|n| {
            n.edge_ids
                .iter()
                .map(|&e| {
                    let edge = net.edge(e);
                    SubnetworkEdge {
                        edge: e,
                        u: edge.u,
                        v: edge.v,
                        length: edge.weight,
                    }
                })
                .collect()
        })
        .collect();
    VigTree {
        net,
        tree,
        node_files,
        postings,
        object_ends,
        subnetworks,
        mu_default,
    }
}

impl EdgePostings {
    pub(crate) fn raw_parts(&self) -> [&[u32]; 4] {
        [&self.edge_offsets, &self.words, &self.word_offsets, &self.objects]
    }

    pub(crate) fn from_raw(net: &RoadNetwork, parts: [Vec<u32>; 4]) -> Result<Self> {
        let [edge_offsets, words, word_offsets, objects] = parts;
        let monotone = |v: &[u32], last: usize| {
            v.first() == Some(&0) && v.last().copied() == Some(last as u32) && v.windows(2).all(|w| w[0] <= w[1])
        };
        let ok = edge_offsets.len() == net.num_edges() + 1
            && word_offsets.len() == words.len() + 1
            && monotone(&edge_offsets, words.len())
            && monotone(&word_offsets, objects.len())
            && objects.iter().all(|&o| (o as usize) < net.objects().len());
        if !ok {
            return Err(Error::Corrupt("edge postings layout".into()));
        }
        Ok(EdgePostings {
            edge_offsets,
            words,
            word_offsets,
            objects,
        })
    }
}

/// Lower bound of the score of anything beneath `target` (the exact score
/// for an object).
pub fn min_vnd(index: &VigTree, query: &Query, target: Target) -> f64 {
    let mut dist = QueryDistances::new(&index.tree, &index.net, query.location);
    min_vnd_with(index, query, &mut dist, target)
}

pub(crate) fn min_vnd_with(index: &VigTree, query: &Query, dist: &mut QueryDistances<'_>, target: Target) -> f64 {
    let q = &query.words;
    match target {
        Target::Node(n) => {
            let shared = q.intersection_len(&index.node_files[n as usize].descriptor());
            relax(score(query.params, dist.node_bound(n), visual_lower_bound(shared, q.len())))
        }
        Target::Edge(e) => {
            let shared = VisualDescriptor::from_sorted(index.postings.edge_words(e).to_vec())
                .intersection_len(q);
            relax(score(query.params, edge_distance_bound(index, dist, e), visual_lower_bound(shared, q.len())))
        }
        Target::Object(i) => {
            let o = index.net.object(i);
            let edge = index.net.edge(o.position.edge);
            let (du, dv) = (dist.to_vertex(edge.u), dist.to_vertex(edge.v));
            let d = object_distance(index, dist, i, du, dv);
            let shared = q.intersection_len(&o.words);
            score(query.params, d, jaccard_distance(shared, q.len(), o.words.len()))
        }
    }
}

/// Network distance to object `i` given distances to its edge's endpoints.
#[inline]
pub(crate) fn object_distance(index: &VigTree, dist: &QueryDistances<'_>, i: u32, du: f64, dv: f64) -> f64 {
    let pos = index.net.object(i).position;
    let (to_u, to_v) = index.object_ends[i as usize];
    let mut d = (du + to_u).min(dv + to_v);
    if let crate::road_graph::Location::Interior(qe, qt) = dist.location() {
        if qe == pos.edge {
            d = d.min((qt - pos.offset).abs());
        }
    }
    d
}

/// Nearest endpoint distance of an edge, or 0 when the query sits on it.
pub(crate) fn edge_distance_bound(index: &VigTree, dist: &mut QueryDistances<'_>, e: EdgeId) -> f64 {
    if let crate::road_graph::Location::Interior(qe, _) = dist.location() {
        if qe == e {
            return 0.0;
        }
    }
    let edge = index.net.edge(e);
    dist.to_vertex(edge.u).min(dist.to_vertex(edge.v))
}
