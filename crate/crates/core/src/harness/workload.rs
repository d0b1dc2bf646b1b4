//! Continuous-query workloads: query words plus a random-walk trace each.
//!
//! On disk a workload is a directory holding `queries.txt` and one
//! `trace_<id>.txt` per query. `queries.txt` starts with a
//! `# network-hash <hex>` line, followed by `<id> <k> <mu> <w1,w2,...>` lines.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::seeded;
use crate::codec::network_hash;
use crate::continuous_query::{parse_trace, ContinuousQuery, TracePoint};
use crate::error::{Error, Result};
use crate::road_graph::{EdgePosition, NodeId, RoadNetwork};
use crate::vig_index::ScoreParams;
use crate::visual::VisualDescriptor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkloadSpec {
    pub query_count: usize,
    pub query_length: usize,
    pub words_per_query: usize,
    pub k: usize,
    pub mu: f64,
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            query_count: 100,
            query_length: 100,
            words_per_query: 40,
            k: 10,
            mu: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadQuery {
    pub id: usize,
    pub words: VisualDescriptor,
    pub k: usize,
    pub mu: f64,
    pub trace: Vec<TracePoint>,
}

impl WorkloadQuery {
    pub fn to_continuous(&self, net: &RoadNetwork, diameter: f64) -> Result<ContinuousQuery> {
        let params = ScoreParams::new(self.mu, diameter)?;
        ContinuousQuery::new(net, self.words.clone(), self.k, params, self.trace.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub network_hash: String,
    pub queries: Vec<WorkloadQuery>,
}

/// Step lengths are drawn from this range, in units of the mean edge weight,
/// and rounded to multiples of 1/8.
const STEP_RANGE: (f64, f64) = (0.1, 0.5);

/// A walk of `len` positions from `start`. Each step moves forward; at a node
/// it turns onto a random other incident edge (or back on a dead end) and
/// stops within that edge, so consecutive positions share an edge or a node.
pub fn random_walk(net: &RoadNetwork, start: EdgePosition, len: usize, rng: &mut ChaCha8Rng) -> Vec<EdgePosition> {
    let mean_w = net.edges().iter().map(|e| e.weight).sum::<f64>() / net.num_edges() as f64;
    let mut out = Vec::with_capacity(len);
    let mut pos = start;
    // Heading towards edge.v when true.
    let mut towards_v = rng.random_bool(0.5);
    for _ in 0..len {
        out.push(pos);
        let raw = rng.random_range(STEP_RANGE.0..STEP_RANGE.1) * mean_w;
        let step = ((raw * 8.0).round() / 8.0).max(0.125);
        let edge = net.edge(pos.edge);
        let room = if towards_v { edge.weight - pos.offset } else { pos.offset };
        if step < room {
            let offset = if towards_v { pos.offset + step } else { pos.offset - step };
            pos = EdgePosition::new(edge.id, offset);
            continue;
        }
        let node: NodeId = if towards_v { edge.v } else { edge.u };
        let left = step - room;
        let choices: Vec<u32> = net.incident(node).iter().copied().filter(|&e| e != edge.id).collect();
        let next = if choices.is_empty() {
            edge.id
        } else {
            choices[rng.random_range(0..choices.len())]
        };
        let ne = net.edge(next);
        let along = left.min(ne.weight);
        towards_v = ne.u == node;
        let offset = if towards_v { along } else { ne.weight - along };
        pos = EdgePosition::new(next, offset);
    }
    out
}

/// Query words drawn from random objects' words, so every query shares words
/// with some object.
fn sample_words(net: &RoadNetwork, count: usize, rng: &mut ChaCha8Rng) -> VisualDescriptor {
    let objects = net.objects();
    let mut words = BTreeSet::new();
    let mut attempts = 0;
    while words.len() < count && attempts < 50 * count {
        let o = &objects[rng.random_range(0..objects.len())];
        let w = o.words.words();
        words.insert(w[rng.random_range(0..w.len())]);
        attempts += 1;
    }
    VisualDescriptor::new(words)
}

pub fn gen_workload(net: &RoadNetwork, spec: &WorkloadSpec) -> Result<Workload> {
    if net.objects().is_empty() {
        return Err(Error::InvalidParameter("workload generation needs objects on the network".into()));
    }
    if spec.query_length == 0 || spec.words_per_query == 0 || spec.k == 0 {
        return Err(Error::InvalidParameter("query_length, words_per_query and k must be positive".into()));
    }
    if !(0.0..=1.0).contains(&spec.mu) {
        return Err(Error::InvalidParameter(format!("mu must lie in [0, 1], got {}", spec.mu)));
    }
    let mut rng = seeded(spec.seed ^ 0x776f_726b_6c6f_6164);
    let queries = (0..spec.query_count)
        .map(|id| {
            let words = sample_words(net, spec.words_per_query, &mut rng);
            let start = net.objects()[rng.random_range(0..net.objects().len())].position;
            let trace = random_walk(net, start, spec.query_length, &mut rng)
                .into_iter()
                .enumerate()
                .map(|(t, position)| TracePoint { t: t as f64, position })
                .collect();
            WorkloadQuery {
                id,
                words,
                k: spec.k,
                mu: spec.mu,
                trace,
            }
        })
        .collect();
    Ok(Workload {
        network_hash: network_hash(net),
        queries,
    })
}

pub fn format_trace(trace: &[TracePoint]) -> String {
    let mut out = String::new();
    for p in trace {
        let _ = writeln!(out, "{} {} {}", p.t, p.position.edge, p.position.offset);
    }
    out
}

pub fn write_workload(workload: &Workload, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut index = format!("# network-hash {}\n", workload.network_hash);
    for q in &workload.queries {
        let words: Vec<String> = q.words.words().iter().map(u32::to_string).collect();
        let _ = writeln!(index, "{} {} {} {}", q.id, q.k, q.mu, words.join(","));
        std::fs::write(dir.join(format!("trace_{}.txt", q.id)), format_trace(&q.trace))?;
    }
    std::fs::write(dir.join("queries.txt"), index)?;
    Ok(())
}

pub fn read_workload(dir: &Path) -> Result<Workload> {
    let text = std::fs::read_to_string(dir.join("queries.txt"))?;
    let mut network_hash = None;
    let mut queries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let bad = |m: String| Error::Parse { line: i + 1, message: m };
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(h) = rest.trim().strip_prefix("network-hash") {
                network_hash = Some(h.trim().to_string());
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", f.len())));
        }
        let id: usize = f[0].parse().map_err(|_| bad(format!("invalid query id {:?}", f[0])))?;
        let k: usize = f[1].parse().map_err(|_| bad(format!("invalid k {:?}", f[1])))?;
        let mu: f64 = f[2].parse().map_err(|_| bad(format!("invalid mu {:?}", f[2])))?;
        let words = f[3]
            .split(',')
            .map(|w| w.parse::<u32>().map_err(|_| bad(format!("invalid word {w:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let trace = parse_trace(&std::fs::read_to_string(dir.join(format!("trace_{id}.txt")))?)?;
        queries.push(WorkloadQuery {
            id,
            words: VisualDescriptor::new(words),
            k,
            mu,
            trace,
        });
    }
    let network_hash = network_hash.ok_or_else(|| Error::Parse {
        line: 1,
        message: "missing `# network-hash` header".into(),
    })?;
    Ok(Workload { network_hash, queries })
}

/// Fails unless the workload was generated for this network.
pub fn check_network(workload: &Workload, net: &RoadNetwork) -> Result<()> {
    let index = network_hash(net);
    if workload.network_hash != index {
        return Err(Error::WorkloadMismatch {
            workload: workload.network_hash.clone(),
            index,
        });
    }
    Ok(())
}
