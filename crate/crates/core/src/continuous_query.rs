//! Continuous top-k queries for a moving location.
//!
//! The network is cut into corridors: maximal chains of edges whose inner
//! nodes have degree 2. A server ships, once per corridor visit, a candidate
//! set (objects on the corridor plus the top-k at both corridor ends) with
//! each candidate's distance to both ends. Any position on the corridor can
//! then be answered by rescoring candidates, and a safe sub-range marks
//! where the answer set provably stays the same.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gtree::QueryDistances;
use crate::road_graph::{EdgeId, EdgePosition, NodeId, ObjectId, RoadNetwork};
use crate::snapshot_query::{top_k, Query, ResultSet, ScoredObject};
use crate::vig_index::{object_distance, score, ScoreParams, VigTree};
use crate::visual::{jaccard_distance, VisualDescriptor};

/// A branch-free chain of edges, parameterized by arc length from its start.
#[derive(Debug, Clone, PartialEq)]
pub struct Corridor {
    edges: Vec<EdgeId>,
    /// `nodes[i]` and `nodes[i + 1]` are the ends of `edges[i]`.
    nodes: Vec<NodeId>,
    lengths: Vec<f64>,
    /// Arc length at the start of each edge; the last entry is the total.
    starts: Vec<f64>,
    /// Whether edge i runs u → v in corridor direction.
    forward: Vec<bool>,
    slot: HashMap<EdgeId, usize>,
}

impl Corridor {
    /// The corridor containing `edge`.
    pub fn around(net: &RoadNetwork, edge: EdgeId) -> Corridor {
        let e0 = net.edge(edge);
        let mut seen = vec![edge];
        // Extend from one end, then the other; each side as (edge, far node).
        let walk = |from: NodeId, seen: &mut Vec<EdgeId>| {
            let mut chain: Vec<(EdgeId, NodeId)> = Vec::new();
            let mut cur = from;
            let mut last = edge;
            while net.degree(cur) == 2 {
                let next = *net.incident(cur).iter().find(|&&e| e != last).unwrap_or(&last);
                if seen.contains(&next) {
                    break;
                }
                seen.push(next);
                cur = net.edge(next).other(cur);
                chain.push((next, cur));
                last = next;
            }
            chain
        };
        let ahead = walk(e0.v, &mut seen);
        let behind = walk(e0.u, &mut seen);

        let mut edges = Vec::new();
        let mut nodes = vec![behind.last().map_or(e0.u, |&(_, n)| n)];
        for &(e, _) in behind.iter().rev() {
            edges.push(e);
        }
        edges.push(edge);
        for &(e, _) in &ahead {
            edges.push(e);
        }
        for (i, &e) in edges.iter().enumerate() {
            let next = net.edge(e).other(nodes[i]);
            nodes.push(next);
        }
        let forward = edges
            .iter()
            .zip(&nodes)
            .map(|(&e, &n)| net.edge(e).u == n)
            .collect();
        let lengths: Vec<f64> = edges.iter().map(|&e| net.edge(e).weight).collect();
        let mut starts = vec![0.0];
        for &l in &lengths {
            starts.push(starts.last().unwrap() + l);
        }
        let slot = edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        Corridor {
            edges,
            nodes,
            lengths,
            starts,
            forward,
            slot,
        }
    }

    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn length(&self) -> f64 {
        *self.starts.last().unwrap()
    }

    pub fn start_node(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn end_node(&self) -> NodeId {
        *self.nodes.last().unwrap()
    }

    pub fn contains_edge(&self, e: EdgeId) -> bool {
        self.slot.contains_key(&e)
    }

    /// Arc length of a position whose edge lies on the corridor.
    pub fn offset_of(&self, pos: EdgePosition) -> Option<f64> {
        let i = *self.slot.get(&pos.edge)?;
        let along = if self.forward[i] {
            pos.offset
        } else {
            self.lengths[i] - pos.offset
        };
        Some(self.starts[i] + along)
    }

    /// The network position at arc length `x`.
    pub fn position_at(&self, x: f64) -> EdgePosition {
        let x = x.clamp(0.0, self.length());
        let i = (self.starts.partition_point(|&s| s <= x).max(1) - 1).min(self.edges.len() - 1);
        let along = (x - self.starts[i]).clamp(0.0, self.lengths[i]);
        let offset = if self.forward[i] {
            along
        } else {
            self.lengths[i] - along
        };
        EdgePosition::new(self.edges[i], offset)
    }
}

/// One object the client may need to rank anywhere on a corridor.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub object_id: ObjectId,
    pub words: VisualDescriptor,
    pub vdist: f64,
    /// Network distance from the corridor's start node.
    pub d_start: f64,
    pub d_end: f64,
    /// Arc length, for objects lying on the corridor itself.
    pub offset: Option<f64>,
}

impl Candidate {
    /// Distance from arc length `x` on a corridor of length `len`.
    #[inline]
    pub fn distance_at(&self, x: f64, len: f64) -> f64 {
        let d = (x + self.d_start).min((len - x) + self.d_end);
        match self.offset {
            Some(y) => d.min((x - y).abs()),
            None => d,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub corridor: Corridor,
    /// Sorted by object id.
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn ids(&self) -> Vec<ObjectId> {
        self.candidates.iter().map(|c| c.object_id).collect()
    }
}

/// Objects on the corridor sharing a word with the query, plus the top-k at
/// either corridor end, each with distances to both ends.
pub fn candidate_search(
    index: &VigTree,
    corridor: &Corridor,
    words: &VisualDescriptor,
    k: usize,
    params: ScoreParams,
) -> Result<CandidateSet> {
    let net = index.network();
    let mut chosen: Vec<u32> = Vec::new();
    let mut scanned = 0;
    for &e in corridor.edges() {
        chosen.extend(index.shared_objects(e, words, &mut scanned).into_iter().map(|(o, _)| o));
    }
    for end in [corridor.start_node(), corridor.end_node()] {
        for id in top_k_with_near_ties(index, net.node_position(end), words, k, params)? {
            let i = net
                .objects()
                .binary_search_by_key(&id, |o| o.id)
                .expect("result ids come from the network");
            chosen.push(i as u32);
        }
    }
    chosen.sort_unstable();
    chosen.dedup();

    let mut from_start = QueryDistances::new(index.gtree(), net, net.node_position(corridor.start_node()));
    let mut from_end = QueryDistances::new(index.gtree(), net, net.node_position(corridor.end_node()));
    let candidates = chosen
        .into_iter()
        .map(|i| {
            let o = net.object(i);
            let edge = net.edge(o.position.edge);
            let (su, sv) = (from_start.to_vertex(edge.u), from_start.to_vertex(edge.v));
            let ds = object_distance(index, &from_start, i, su, sv);
            let (eu, ev) = (from_end.to_vertex(edge.u), from_end.to_vertex(edge.v));
            let de = object_distance(index, &from_end, i, eu, ev);
            let shared = words.intersection_len(&o.words);
            Candidate {
                object_id: o.id,
                words: o.words.clone(),
                vdist: jaccard_distance(shared, words.len(), o.words.len()),
                d_start: ds,
                d_end: de,
                offset: corridor.offset_of(o.position),
            }
        })
        .collect();
    Ok(CandidateSet {
        corridor: corridor.clone(),
        candidates,
    })
}

/// Top-k at `pos` plus every object scoring within rounding distance of
/// the k-th. Two objects tied in exact arithmetic can round apart
/// differently at the corridor ends than at an interior position; keeping
/// near-ties keeps the candidate set sufficient in floating point.
fn top_k_with_near_ties(
    index: &VigTree,
    pos: EdgePosition,
    words: &VisualDescriptor,
    k: usize,
    params: ScoreParams,
) -> Result<Vec<ObjectId>> {
    let mut want = k;
    loop {
        let r = top_k(index, &Query::new(pos, words.clone(), want, params)?)?;
        let entries = r.entries();
        if entries.len() < want {
            return Ok(r.ids());
        }
        let cut = entries[k - 1].score;
        let limit = cut + 1e-9 * cut.abs().max(1.0);
        if entries[want - 1].score > limit {
            return Ok(entries.iter().take_while(|e| e.score <= limit).map(|e| e.object_id).collect());
        }
        want *= 2;
    }
}

fn check_offset(cands: &CandidateSet, x: f64) -> Result<()> {
    let len = cands.corridor.length();
    if !(x >= 0.0 && x <= len) {
        return Err(Error::InvalidParameter(format!("offset {x} outside corridor [0, {len}]")));
    }
    Ok(())
}

fn score_candidate(c: &Candidate, x: f64, len: f64, params: ScoreParams) -> ScoredObject {
    let d = c.distance_at(x, len);
    ScoredObject {
        object_id: c.object_id,
        score: score(params, d, c.vdist),
        dist: d,
        vdist: c.vdist,
    }
}

/// Top-k at arc length `x`, by rescoring the candidates.
pub fn evaluate_at(cands: &CandidateSet, x: f64, k: usize, params: ScoreParams) -> Result<ResultSet> {
    check_offset(cands, x)?;
    let len = cands.corridor.length();
    let scored = cands.candidates.iter().map(|c| score_candidate(c, x, len, params)).collect();
    Ok(ResultSet::from_unsorted(scored, k))
}

/// Arc-length range with a constant top-k set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubRange {
    pub start: f64,
    pub end: f64,
    pub start_closed: bool,
    pub end_closed: bool,
}

impl SubRange {
    /// Exact membership.
    pub fn contains(&self, x: f64) -> bool {
        let lower = x > self.start || (self.start_closed && x == self.start);
        let upper = x < self.end || (self.end_closed && x == self.end);
        lower && upper
    }

    /// Membership that treats anything within `tol` of an open or interior
    /// boundary as outside.
    pub fn contains_strictly(&self, x: f64, tol: f64, len: f64) -> bool {
        let lower = if self.start == 0.0 && self.start_closed {
            x >= 0.0
        } else {
            x > self.start + tol
        };
        let upper = if self.end == len && self.end_closed {
            x <= len
        } else {
            x < self.end - tol
        };
        lower && upper
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafeInterval {
    pub corridor: Corridor,
    pub sub_range: SubRange,
}

/// Boundary-classification tolerance for a corridor of length `len`.
pub fn boundary_tolerance(len: f64) -> f64 {
    1e-9 * len
}

/// Linear pieces of a candidate's distance function: `sign * x + intercept`.
fn pieces(c: &Candidate, len: f64) -> Vec<(f64, f64)> {
    let mut p = vec![(1.0, c.d_start), (-1.0, len + c.d_end)];
    if let Some(y) = c.offset {
        p.push((1.0, -y));
        p.push((-1.0, y));
    }
    p
}

fn active(c: &Candidate, piece: (f64, f64), x: f64, len: f64) -> bool {
    let v = piece.0 * x + piece.1;
    (v - c.distance_at(x, len)).abs() <= 1e-9 * (1.0 + v.abs())
}

/// Offsets where the top-k set at `x` could change: crossings between a
/// member's and a non-member's score lines, plus every candidate's own
/// breakpoints.
fn critical_points(cands: &CandidateSet, members: &[usize], params: ScoreParams) -> Vec<f64> {
    let len = cands.corridor.length();
    let c = params.mu / params.diameter;
    let vis = |cand: &Candidate| (1.0 - params.mu) * cand.vdist / c;
    let inside = |x: f64| x > 0.0 && x < len;
    let mut points = Vec::new();
    let all = &cands.candidates;
    for cand in all {
        let ps = pieces(cand, len);
        for (i, a) in ps.iter().enumerate() {
            for b in &ps[i + 1..] {
                if a.0 != b.0 {
                    let x = (b.1 - a.1) / (a.0 - b.0);
                    if inside(x) && active(cand, *a, x, len) && active(cand, *b, x, len) {
                        points.push(x);
                    }
                }
            }
        }
    }
    let mut is_member = vec![false; all.len()];
    for &m in members {
        is_member[m] = true;
    }
    for &m in members {
        let (cm, pm) = (&all[m], pieces(&all[m], len));
        for (j, other) in all.iter().enumerate() {
            if is_member[j] {
                continue;
            }
            let po = pieces(other, len);
            // Scores in units of distance: piece + (1 - mu) * vdist / c.
            let (vm, vo) = (vis(cm), vis(other));
            for a in &pm {
                for b in &po {
                    if a.0 != b.0 {
                        let x = ((b.1 + vo) - (a.1 + vm)) / (a.0 - b.0);
                        if inside(x) && active(cm, *a, x, len) && active(other, *b, x, len) {
                            points.push(x);
                        }
                    }
                }
            }
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
}

/// The maximal sub-range around `x` over which the top-k set equals the
/// set at `x`.
pub fn safe_interval_at(cands: &CandidateSet, x: f64, k: usize, params: ScoreParams) -> Result<SafeInterval> {
    check_offset(cands, x)?;
    let len = cands.corridor.length();
    let whole = SubRange {
        start: 0.0,
        end: len,
        start_closed: true,
        end_closed: true,
    };
    if cands.candidates.len() <= k || params.mu == 0.0 {
        return Ok(SafeInterval {
            corridor: cands.corridor.clone(),
            sub_range: whole,
        });
    }
    let set_at = |p: f64| -> Vec<ObjectId> {
        let scored = cands.candidates.iter().map(|c| score_candidate(c, p, len, params)).collect();
        ResultSet::from_unsorted(scored, k).id_set()
    };
    let base = set_at(x);
    let members: Vec<usize> = cands
        .candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| base.binary_search(&c.object_id).is_ok())
        .map(|(i, _)| i)
        .collect();
    let points = critical_points(cands, &members, params);

    // Walk right.
    let (mut end, mut end_closed) = (len, true);
    let mut cur = x;
    let right: Vec<f64> = points.iter().copied().filter(|&p| p > x).chain([len]).collect();
    for &p in &right {
        if p <= cur {
            continue;
        }
        if set_at(0.5 * (cur + p)) != base {
            (end, end_closed) = (cur, true);
            break;
        }
        if set_at(p) != base {
            (end, end_closed) = (p, false);
            break;
        }
        cur = p;
    }

    // Walk left.
    let (mut start, mut start_closed) = (0.0, true);
    let mut cur = x;
    let left: Vec<f64> = points.iter().rev().copied().filter(|&p| p < x).chain([0.0]).collect();
    for &p in &left {
        if p >= cur {
            continue;
        }
        if set_at(0.5 * (cur + p)) != base {
            (start, start_closed) = (cur, true);
            break;
        }
        if set_at(p) != base {
            (start, start_closed) = (p, false);
            break;
        }
        cur = p;
    }
    Ok(SafeInterval {
        corridor: cands.corridor.clone(),
        sub_range: SubRange {
            start,
            end,
            start_closed,
            end_closed,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub t: f64,
    pub position: EdgePosition,
}

/// Parses `<timestamp> <edge_id> <offset>` lines.
pub fn parse_trace(text: &str) -> Result<Vec<TracePoint>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |m: String| Error::Parse { line: i + 1, message: m };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", f.len())));
        }
        let t: f64 = f[0].parse().map_err(|_| bad(format!("invalid timestamp {:?}", f[0])))?;
        let edge: u32 = f[1].parse().map_err(|_| bad(format!("invalid edge id {:?}", f[1])))?;
        let offset: f64 = f[2].parse().map_err(|_| bad(format!("invalid offset {:?}", f[2])))?;
        out.push(TracePoint {
            t,
            position: EdgePosition::new(edge, offset),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousQuery {
    pub words: VisualDescriptor,
    pub k: usize,
    pub params: ScoreParams,
    pub trace: Vec<TracePoint>,
}

impl ContinuousQuery {
    /// Validates the trace: positions on the network, strictly increasing
    /// timestamps, and consecutive positions on the same or adjacent edges.
    pub fn new(net: &RoadNetwork, words: VisualDescriptor, k: usize, params: ScoreParams, trace: Vec<TracePoint>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if words.is_empty() {
            return Err(Error::EmptyQueryDescriptor);
        }
        for (i, p) in trace.iter().enumerate() {
            net.validate_position(p.position)
                .map_err(|e| Error::InvalidTrace(format!("point {i}: {e}")))?;
            if !p.t.is_finite() {
                return Err(Error::InvalidTrace(format!("point {i}: timestamp is not finite")));
            }
        }
        for (i, w) in trace.windows(2).enumerate() {
            if w[1].t <= w[0].t {
                return Err(Error::InvalidTrace(format!("timestamps not increasing at point {}", i + 1)));
            }
            let (a, b) = (net.edge(w[0].position.edge), net.edge(w[1].position.edge));
            let adjacent = a.id == b.id || a.u == b.u || a.u == b.v || a.v == b.u || a.v == b.v;
            if !adjacent {
                return Err(Error::InvalidTrace(format!(
                    "points {i} and {} lie on non-adjacent edges {} and {}",
                    i + 1,
                    a.id,
                    b.id
                )));
            }
        }
        Ok(ContinuousQuery {
            words,
            k,
            params,
            trace,
        })
    }
}

/// What the server ships for one corridor visit.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerResponse {
    pub candidates: CandidateSet,
    pub interval: SafeInterval,
}

/// The server side of a continuous session.
pub trait CandidateServer {
    fn request(&mut self, position: EdgePosition, words: &VisualDescriptor, k: usize, params: ScoreParams) -> Result<ServerResponse>;
}

/// Serves candidate sets straight from an in-memory index.
pub struct IndexServer<'a> {
    index: &'a VigTree,
    pub calls: u64,
}

impl<'a> IndexServer<'a> {
    pub fn new(index: &'a VigTree) -> Self {
        IndexServer { index, calls: 0 }
    }
}

impl CandidateServer for IndexServer<'_> {
    fn request(&mut self, position: EdgePosition, words: &VisualDescriptor, k: usize, params: ScoreParams) -> Result<ServerResponse> {
        self.calls += 1;
        self.index.network().validate_position(position)?;
        let corridor = Corridor::around(self.index.network(), position.edge);
        let candidates = candidate_search(self.index, &corridor, words, k, params)?;
        let x = corridor.offset_of(position).expect("corridor holds the position's edge");
        let interval = safe_interval_at(&candidates, x, k, params)?;
        Ok(ServerResponse { candidates, interval })
    }
}

/// When the client goes back to the server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RefreshPolicy {
    /// On leaving the current safe sub-range.
    #[default]
    SafeInterval,
    /// Only on leaving the corridor; the client recomputes sub-ranges from
    /// the candidates it already holds.
    Corridor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct SessionStats {
    pub server_calls: u64,
    pub locations_processed: u64,
    pub intervals_entered: u64,
    /// Full candidate rescoring on the client, outside the fast path.
    pub client_reevaluations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub t: f64,
    pub results: ResultSet,
    pub server_call: bool,
}

struct ClientState {
    candidates: CandidateSet,
    interval: SafeInterval,
}

impl ClientState {
    fn covers(&self, x: f64) -> bool {
        let len = self.candidates.corridor.length();
        self.interval.sub_range.contains_strictly(x, boundary_tolerance(len), len)
    }
}

/// Client side of a moving-monitor session, fed one location at a time.
pub struct MonitorSession<'s> {
    server: &'s mut dyn CandidateServer,
    policy: RefreshPolicy,
    words: VisualDescriptor,
    k: usize,
    params: ScoreParams,
    state: Option<ClientState>,
    stats: SessionStats,
}

impl<'s> MonitorSession<'s> {
    pub fn new(server: &'s mut dyn CandidateServer, cq: &ContinuousQuery, policy: RefreshPolicy) -> Self {
        MonitorSession {
            server,
            policy,
            words: cq.words.clone(),
            k: cq.k,
            params: cq.params,
            state: None,
            stats: SessionStats::default(),
        }
    }

    pub fn stats(&self) -> SessionStats {
        self.stats
    }

    /// Answers the query at one trace location.
    pub fn advance(&mut self, point: &TracePoint) -> Result<Step> {
        let (k, params) = (self.k, self.params);
        self.stats.locations_processed += 1;
        let pos = point.position;
        let held = self
            .state
            .as_ref()
            .and_then(|s| s.candidates.corridor.offset_of(pos).map(|x| (s, x)));
        let mut server_call = false;
        let results = match held {
            Some((s, x)) if s.covers(x) => evaluate_at(&s.candidates, x, k, params)?,
            Some((_, x)) if self.policy == RefreshPolicy::Corridor => {
                let s = self.state.take().unwrap();
                self.stats.client_reevaluations += 1;
                let results = evaluate_at(&s.candidates, x, k, params)?;
                let interval = safe_interval_at(&s.candidates, x, k, params)?;
                self.state = Some(ClientState {
                    candidates: s.candidates,
                    interval,
                });
                results
            }
            _ => {
                server_call = true;
                self.stats.server_calls += 1;
                if self.state.is_some() {
                    self.stats.intervals_entered += 1;
                }
                let response = self.server.request(pos, &self.words, k, params)?;
                let x = response
                    .candidates
                    .corridor
                    .offset_of(pos)
                    .expect("server corridor holds the position");
                let results = evaluate_at(&response.candidates, x, k, params)?;
                self.state = Some(ClientState {
                    candidates: response.candidates,
                    interval: response.interval,
                });
                results
            }
        };
        Ok(Step {
            t: point.t,
            results,
            server_call,
        })
    }
}

/// Moving monitor: answers every trace location, contacting the server only
/// when the location leaves what the client can answer alone.
pub fn moving_monitor(
    server: &mut dyn CandidateServer,
    cq: &ContinuousQuery,
    policy: RefreshPolicy,
) -> Result<(Vec<Step>, SessionStats)> {
    let mut session = MonitorSession::new(server, cq, policy);
    let steps = cq.trace.iter().map(|p| session.advance(p)).collect::<Result<_>>()?;
    Ok((steps, session.stats()))
}

/// Baseline: a fresh snapshot query at every location.
pub fn naive_step(index: &VigTree, cq: &ContinuousQuery, point: &TracePoint) -> Result<Step> {
    let q = Query::new(point.position, cq.words.clone(), cq.k, cq.params)?;
    Ok(Step {
        t: point.t,
        results: top_k(index, &q)?,
        server_call: true,
    })
}

pub fn naive_monitor(index: &VigTree, cq: &ContinuousQuery) -> Result<(Vec<Step>, SessionStats)> {
    let steps = cq.trace.iter().map(|p| naive_step(index, cq, p)).collect::<Result<_>>()?;
    let n = cq.trace.len() as u64;
    Ok((
        steps,
        SessionStats {
            server_calls: n,
            locations_processed: n,
            intervals_entered: n.saturating_sub(1),
            client_reevaluations: 0,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::road_graph::{Edge, Node};

    /// A star hub 0 with a chain 0-1-2-3-4 (4 is another hub), and extra
    /// spokes so 0 and 4 have degree 3.
    fn chain_net() -> RoadNetwork {
        let nodes = (0..9).map(|id| Node { id, x: id as f64, y: 0.0 }).collect();
        let pairs = [(0, 1), (2, 1), (2, 3), (3, 4), (0, 5), (0, 6), (4, 7), (4, 8)];
        let edges = pairs
            .iter()
            .enumerate()
            .map(|(i, &(u, v))| Edge {
                id: i as u32,
                u,
                v,
                weight: (i + 1) as f64,
            })
            .collect();
        RoadNetwork::new(nodes, edges).unwrap()
    }

    #[test]
    fn corridor_follows_degree_two_nodes() {
        let net = chain_net();
        let c = Corridor::around(&net, 2);
        assert_eq!(c.edges(), &[0, 1, 2, 3]);
        assert_eq!(c.nodes(), &[0, 1, 2, 3, 4]);
        assert_eq!(c.length(), 10.0);
        // Edge 1 runs 2 → 1, against corridor direction.
        assert_eq!(c.offset_of(EdgePosition::new(1, 0.5)), Some(1.0 + 1.5));
        assert_eq!(c.position_at(2.5), EdgePosition::new(1, 0.5));
        assert_eq!(c.offset_of(EdgePosition::new(5, 1.0)), None);
        let spoke = Corridor::around(&net, 4);
        assert_eq!(spoke.edges(), &[4]);
    }

    #[test]
    fn corridor_on_a_cycle_terminates() {
        let nodes = (0..4).map(|id| Node { id, x: 0.0, y: 0.0 }).collect();
        let edges = (0..4)
            .map(|i| Edge {
                id: i,
                u: i,
                v: (i + 1) % 4,
                weight: 1.0,
            })
            .collect();
        let net = RoadNetwork::new(nodes, edges).unwrap();
        let c = Corridor::around(&net, 1);
        assert_eq!(c.edges().len(), 4);
        assert_eq!(c.start_node(), c.end_node());
        assert_eq!(c.length(), 4.0);
    }

    fn cand(id: u64, vdist: f64, ds: f64, de: f64, y: Option<f64>) -> Candidate {
        Candidate {
            object_id: id,
            words: VisualDescriptor::new([1]),
            vdist,
            d_start: ds,
            d_end: de,
            offset: y,
        }
    }

    fn set(cands: Vec<Candidate>, len: f64) -> CandidateSet {
        let net = {
            let nodes = (0..2).map(|id| Node { id, x: 0.0, y: 0.0 }).collect();
            RoadNetwork::new(
                nodes,
                vec![Edge {
                    id: 0,
                    u: 0,
                    v: 1,
                    weight: len,
                }],
            )
            .unwrap()
        };
        CandidateSet {
            corridor: Corridor::around(&net, 0),
            candidates: cands,
        }
    }

    #[test]
    fn evaluate_boundaries() {
        let p = ScoreParams::new(0.5, 100.0).unwrap();
        let cs = set(vec![cand(1, 0.5, 3.0, 4.0, None)], 10.0);
        let r = evaluate_at(&cs, 0.0, 1, p).unwrap();
        assert_eq!(r.entries()[0].dist, 3.0);
        let cs = set(vec![cand(1, 0.5, 2.0, 2.0, None)], 10.0);
        assert_eq!(evaluate_at(&cs, 5.0, 1, p).unwrap().entries()[0].dist, 7.0);
        assert!(evaluate_at(&cs, 10.5, 1, p).is_err());
    }

    #[test]
    fn trivial_safe_intervals_cover_corridor() {
        let p = ScoreParams::new(0.5, 100.0).unwrap();
        let cs = set(vec![cand(1, 0.5, 3.0, 4.0, None)], 10.0);
        let s = safe_interval_at(&cs, 4.0, 1, p).unwrap();
        assert_eq!((s.sub_range.start, s.sub_range.end), (0.0, 10.0));
        let p0 = ScoreParams::new(0.0, 100.0).unwrap();
        let cs = set(vec![cand(1, 0.5, 0.0, 10.0, None), cand(2, 0.5, 10.0, 0.0, None)], 10.0);
        let s = safe_interval_at(&cs, 4.0, 1, p0).unwrap();
        assert_eq!((s.sub_range.start, s.sub_range.end), (0.0, 10.0));
    }

    #[test]
    fn crossing_splits_the_corridor() {
        // Object 1 near the start, object 2 near the end, equal visuals:
        // the nearer one wins and they swap at the midpoint.
        let p = ScoreParams::new(0.5, 100.0).unwrap();
        let cs = set(vec![cand(1, 0.5, 1.0, 11.0, None), cand(2, 0.5, 11.0, 1.0, None)], 10.0);
        let s = safe_interval_at(&cs, 2.0, 1, p).unwrap();
        assert_eq!(s.sub_range.start, 0.0);
        assert!((s.sub_range.end - 5.0).abs() < 1e-12);
        // At exactly 5 the tie goes to the lower id, so 5 still belongs.
        assert!(s.sub_range.end_closed);
        let s = safe_interval_at(&cs, 7.0, 1, p).unwrap();
        assert!((s.sub_range.start - 5.0).abs() < 1e-12);
        assert!(!s.sub_range.start_closed);
        assert_eq!(s.sub_range.end, 10.0);
    }

    #[test]
    fn strict_membership_is_conservative() {
        let r = SubRange {
            start: 2.0,
            end: 5.0,
            start_closed: true,
            end_closed: false,
        };
        assert!(r.contains(2.0));
        assert!(!r.contains(5.0));
        assert!(!r.contains_strictly(2.0, 1e-6, 10.0));
        assert!(r.contains_strictly(3.0, 1e-6, 10.0));
        assert!(!r.contains_strictly(5.0 - 1e-7, 1e-6, 10.0));
    }

    #[test]
    fn trace_parsing_and_validation() {
        let pts = parse_trace("# t edge offset\n0 0 0.5\n1 1 0.25\n").unwrap();
        assert_eq!(pts.len(), 2);
        assert!(matches!(parse_trace("0 0"), Err(Error::Parse { line: 1, .. })));
        let net = chain_net();
        let p = ScoreParams::new(0.5, 10.0).unwrap();
        let w = VisualDescriptor::new([1]);
        assert!(ContinuousQuery::new(&net, w.clone(), 1, p, pts.clone()).is_ok());
        let far = vec![pts[0], TracePoint { t: 2.0, position: EdgePosition::new(7, 0.0) }];
        assert!(matches!(ContinuousQuery::new(&net, w.clone(), 1, p, far), Err(Error::InvalidTrace(_))));
        let back = vec![pts[1], pts[0]];
        assert!(ContinuousQuery::new(&net, w, 1, p, back).is_err());
    }
}
