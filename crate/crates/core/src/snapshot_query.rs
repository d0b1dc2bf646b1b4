//! Best-first top-k geo-visual search over a VIG-Tree, and a brute-force
//! reference implementation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gtree::QueryDistances;
use crate::road_graph::{distance_to_position, distances_from, EdgePosition, ObjectId, RoadNetwork};
use crate::vig_index::{edge_distance_bound, object_distance, relax, score, ScoreParams, VigTree};
use crate::visual::{jaccard_distance, visual_lower_bound, VisualDescriptor};

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub location: EdgePosition,
    pub words: VisualDescriptor,
    pub k: usize,
    pub params: ScoreParams,
}

impl Query {
    pub fn new(location: EdgePosition, words: VisualDescriptor, k: usize, params: ScoreParams) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if words.is_empty() {
            return Err(Error::EmptyQueryDescriptor);
        }
        Ok(Query {
            location,
            words,
            k,
            params,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoredObject {
    pub object_id: ObjectId,
    pub score: f64,
    pub dist: f64,
    pub vdist: f64,
}

impl ScoredObject {
    /// Ranking order: score, then id.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        self.score.total_cmp(&other.score).then(self.object_id.cmp(&other.object_id))
    }
}

/// Up to k results in ascending (score, id) order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultSet {
    entries: Vec<ScoredObject>,
}

impl ResultSet {
    pub fn from_unsorted(mut entries: Vec<ScoredObject>, k: usize) -> Self {
        entries.sort_by(ScoredObject::rank_cmp);
        entries.truncate(k);
        ResultSet { entries }
    }

    pub fn entries(&self) -> &[ScoredObject] {
        &self.entries
    }

    pub fn ids(&self) -> Vec<ObjectId> {
        self.entries.iter().map(|e| e.object_id).collect()
    }

    /// Member ids in ascending id order, for set comparisons.
    pub fn id_set(&self) -> Vec<ObjectId> {
        let mut ids = self.ids();
        ids.sort_unstable();
        ids
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Score of the k-th entry once full, +inf before.
    fn threshold(&self, k: usize) -> f64 {
        if self.entries.len() == k {
            self.entries[k - 1].score
        } else {
            f64::INFINITY
        }
    }

    /// Inserts keeping order and size; returns whether the entry made it in.
    fn offer(&mut self, entry: ScoredObject, k: usize) -> bool {
        if self.entries.len() == k && entry.rank_cmp(&self.entries[k - 1]) != Ordering::Less {
            return false;
        }
        let at = self
            .entries
            .partition_point(|e| e.rank_cmp(&entry) == Ordering::Less);
        self.entries.insert(at, entry);
        self.entries.truncate(k);
        true
    }
}

/// Counters collected during one search.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SearchStats {
    pub nodes_popped: u64,
    pub edges_popped: u64,
    pub objects_popped: u64,
    pub postings_scanned: u64,
    pub objects_scored: u64,
    /// Threshold after every admission once k results are held.
    pub gamma_trace: Vec<f64>,
    pub admissions: Vec<Admission>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Admission {
    pub object_id: ObjectId,
    pub bound: f64,
    /// Threshold in force when the object was admitted.
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Object,
    Edge,
    Node,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    bound: f64,
    kind: Kind,
    id: u32,
    /// Exact score parts for objects.
    dist: f64,
    vdist: f64,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl Ord for Entry {
    // Reversed for a min-heap on (bound, kind, id).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(other.kind.cmp(&self.kind))
            .then(other.id.cmp(&self.id))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The k objects with the lowest score among those sharing a word with the
/// query.
pub fn top_k(index: &VigTree, query: &Query) -> Result<ResultSet> {
    search(index, query, true).map(|(r, _)| r)
}

/// [`top_k`] plus instrumentation.
pub fn search_trace(index: &VigTree, query: &Query) -> Result<(ResultSet, SearchStats)> {
    search(index, query, true)
}

/// Search that expands every relevant entry; same answer, no pruning.
pub fn search_trace_unpruned(index: &VigTree, query: &Query) -> Result<(ResultSet, SearchStats)> {
    search(index, query, false)
}

fn search(index: &VigTree, query: &Query, prune: bool) -> Result<(ResultSet, SearchStats)> {
    let net = index.network();
    net.validate_position(query.location)?;
    let tree = index.gtree();
    let q = &query.words;
    let (k, params) = (query.k, query.params);
    let mut dist = QueryDistances::new(tree, net, query.location);
    let mut stats = SearchStats::default();
    let mut results = ResultSet::default();
    let mut heap = BinaryHeap::new();

    let root = tree.root();
    let shared = q.intersection_len(&index.node_file(root).descriptor());
    if shared > 0 {
        heap.push(Entry {
            bound: relax(score(params, dist.node_bound(root), visual_lower_bound(shared, q.len()))),
            kind: Kind::Node,
            id: root,
            dist: 0.0,
            vdist: 0.0,
        });
    }

    while let Some(top) = heap.pop() {
        let gamma = results.threshold(k);
        if prune && top.bound > gamma {
            break;
        }
        match top.kind {
            Kind::Node => {
                stats.nodes_popped += 1;
                let node = tree.node(top.id);
                for (target, shared) in index.shared_targets(top.id, q, &mut stats.postings_scanned) {
                    let vlb = visual_lower_bound(shared, q.len());
                    let (kind, dlb) = if node.is_leaf() {
                        (Kind::Edge, edge_distance_bound(index, &mut dist, target))
                    } else {
                        (Kind::Node, dist.node_bound(target))
                    };
                    let bound = relax(score(params, dlb, vlb));
                    if !prune || bound <= gamma {
                        heap.push(Entry {
                            bound,
                            kind,
                            id: target,
                            dist: 0.0,
                            vdist: 0.0,
                        });
                    }
                }
            }
            Kind::Edge => {
                stats.edges_popped += 1;
                let edge = net.edge(top.id);
                let (du, dv) = (dist.to_vertex(edge.u), dist.to_vertex(edge.v));
                for (obj, shared) in index.shared_objects(top.id, q, &mut stats.postings_scanned) {
                    stats.objects_scored += 1;
                    let d = object_distance(index, &dist, obj, du, dv);
                    let vd = jaccard_distance(shared, q.len(), net.object(obj).words.len());
                    let s = score(params, d, vd);
                    if !prune || s <= gamma {
                        heap.push(Entry {
                            bound: s,
                            kind: Kind::Object,
                            id: obj,
                            dist: d,
                            vdist: vd,
                        });
                    }
                }
            }
            Kind::Object => {
                stats.objects_popped += 1;
                let entry = ScoredObject {
                    object_id: net.object(top.id).id,
                    score: top.bound,
                    dist: top.dist,
                    vdist: top.vdist,
                };
                if results.offer(entry, k) {
                    stats.admissions.push(Admission {
                        object_id: entry.object_id,
                        bound: top.bound,
                        gamma,
                    });
                    if results.len() == k {
                        stats.gamma_trace.push(results.threshold(k));
                    }
                }
            }
        }
    }
    Ok((results, stats))
}

/// Scores every relevant object from one full Dijkstra expansion.
pub fn brute_force_top_k(net: &RoadNetwork, query: &Query) -> Result<ResultSet> {
    net.validate_position(query.location)?;
    let node_dist = distances_from(net, query.location);
    let q = &query.words;
    let entries = net
        .objects()
        .iter()
        .filter_map(|o| {
            let shared = q.intersection_len(&o.words);
            if shared == 0 {
                return None;
            }
            let d = distance_to_position(net, query.location, &node_dist, o.position);
            let vd = jaccard_distance(shared, q.len(), o.words.len());
            Some(ScoredObject {
                object_id: o.id,
                score: score(query.params, d, vd),
                dist: d,
                vdist: vd,
            })
        })
        .collect();
    Ok(ResultSet::from_unsorted(entries, query.k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn so(id: u64, score: f64) -> ScoredObject {
        ScoredObject {
            object_id: id,
            score,
            dist: 0.0,
            vdist: 0.0,
        }
    }

    #[test]
    fn bounded_buffer_keeps_best_with_id_ties() {
        let mut r = ResultSet::default();
        assert!(r.offer(so(5, 0.3), 2));
        assert!(r.offer(so(7, 0.1), 2));
        assert!(r.offer(so(2, 0.3), 2));
        assert_eq!(r.ids(), vec![7, 2]);
        assert!(!r.offer(so(9, 0.3), 2));
        assert_eq!(r.threshold(2), 0.3);
        assert_eq!(r.threshold(3), f64::INFINITY);
    }

    #[test]
    fn heap_order_prefers_objects_on_ties() {
        let mut h = BinaryHeap::new();
        for (kind, id) in [(Kind::Node, 0), (Kind::Object, 3), (Kind::Edge, 1), (Kind::Object, 2)] {
            h.push(Entry {
                bound: 0.5,
                kind,
                id,
                dist: 0.0,
                vdist: 0.0,
            });
        }
        let order: Vec<(Kind, u32)> = std::iter::from_fn(|| h.pop().map(|e| (e.kind, e.id))).collect();
        assert_eq!(
            order,
            vec![(Kind::Object, 2), (Kind::Object, 3), (Kind::Edge, 1), (Kind::Node, 0)]
        );
    }

    #[test]
    fn query_validation() {
        let p = ScoreParams::new(0.5, 1.0).unwrap();
        let pos = EdgePosition::new(0, 0.0);
        assert!(Query::new(pos, VisualDescriptor::new([1]), 0, p).is_err());
        assert!(matches!(
            Query::new(pos, VisualDescriptor::default(), 1, p),
            Err(Error::EmptyQueryDescriptor)
        ));
    }
}
