//! Multilevel recursive bisection used to split G-Tree nodes.
//!
//! Coarsening by heavy-edge matching, greedy graph growing on the coarsest
//! graph, then Fiduccia-Mattheyses style boundary refinement while
//! uncoarsening. Edge weights count original road edges, so the objective is
//! the number of cut road edges.

use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Stop coarsening at this many vertices.
const COARSEN_TO: usize = 60;
/// Greedy-growing attempts on the coarsest graph.
const INITIAL_TRIES: usize = 6;
const REFINE_PASSES: usize = 8;
/// Relative imbalance allowed on each side of a bisection.
const IMBALANCE: f64 = 0.03;

/// Undirected graph in CSR form with vertex and edge weights.
#[derive(Debug, Clone)]
pub(crate) struct LocalGraph {
    xadj: Vec<usize>,
    adj: Vec<u32>,
    ewgt: Vec<u32>,
    vwgt: Vec<u32>,
}

impl LocalGraph {
    /// Builds from an edge list over `n` vertices; parallel edges merge.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut pairs: Vec<(u32, u32)> = Vec::new();
        for (a, b) in edges {
            if a != b {
                pairs.push((a, b));
                pairs.push((b, a));
            }
        }
        pairs.sort_unstable();
        let mut xadj = vec![0usize; n + 1];
        let mut adj = Vec::with_capacity(pairs.len());
        let mut ewgt: Vec<u32> = Vec::with_capacity(pairs.len());
        let mut last: Option<(u32, u32)> = None;
        for (a, b) in pairs {
            if last == Some((a, b)) {
                *ewgt.last_mut().unwrap() += 1;
                continue;
            }
            last = Some((a, b));
            adj.push(b);
            ewgt.push(1);
            xadj[a as usize + 1] += 1;
        }
        for i in 0..n {
            xadj[i + 1] += xadj[i];
        }
        LocalGraph {
            xadj,
            adj,
            ewgt,
            vwgt: vec![1; n],
        }
    }

    pub fn len(&self) -> usize {
        self.vwgt.len()
    }

    fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, u32)> + '_ {
        let r = self.xadj[v]..self.xadj[v + 1];
        self.adj[r.clone()]
            .iter()
            .zip(&self.ewgt[r])
            .map(|(&u, &w)| (u as usize, w))
    }

    fn total_weight(&self) -> u64 {
        self.vwgt.iter().map(|&w| w as u64).sum()
    }

    fn induced(&self, keep: &[usize]) -> LocalGraph {
        let mut local = vec![u32::MAX; self.len()];
        for (i, &v) in keep.iter().enumerate() {
            local[v] = i as u32;
        }
        let mut xadj = Vec::with_capacity(keep.len() + 1);
        xadj.push(0);
        let mut adj = Vec::new();
        let mut ewgt = Vec::new();
        let mut vwgt = Vec::with_capacity(keep.len());
        for &v in keep {
            for (u, w) in self.neighbors(v) {
                if local[u] != u32::MAX {
                    adj.push(local[u]);
                    ewgt.push(w);
                }
            }
            xadj.push(adj.len());
            vwgt.push(self.vwgt[v]);
        }
        LocalGraph {
            xadj,
            adj,
            ewgt,
            vwgt,
        }
    }

    #[cfg(test)]
    pub fn edge_cut(&self, part: &[u32]) -> u64 {
        let mut cut = 0u64;
        for v in 0..self.len() {
            for (u, w) in self.neighbors(v) {
                if part[u] != part[v] {
                    cut += w as u64;
                }
            }
        }
        cut / 2
    }
}

/// Splits `g` into `parts` labelled pieces, `0..parts`. Pieces are balanced by
/// vertex weight; some may be empty only when `g` has fewer vertices than
/// `parts`.
pub(crate) fn partition(g: &LocalGraph, parts: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut labels = vec![0u32; g.len()];
    let all: Vec<usize> = (0..g.len()).collect();
    split_recursive(g, &all, parts, 0, rng, &mut labels);
    labels
}

fn split_recursive(
    g: &LocalGraph,
    members: &[usize],
    parts: usize,
    base: u32,
    rng: &mut ChaCha8Rng,
    labels: &mut [u32],
) {
    if parts <= 1 || members.is_empty() {
        for &v in members {
            labels[v] = base;
        }
        return;
    }
    if members.len() <= parts {
        for (i, &v) in members.iter().enumerate() {
            labels[v] = base + i as u32;
        }
        return;
    }
    let sub = g.induced(members);
    let left_parts = parts / 2;
    let side = bisect(&sub, left_parts as f64 / parts as f64, rng);
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for (i, &v) in members.iter().enumerate() {
        if side[i] == 0 {
            left.push(v);
        } else {
            right.push(v);
        }
    }
    split_recursive(g, &left, left_parts, base, rng, labels);
    split_recursive(g, &right, parts - left_parts, base + left_parts as u32, rng, labels);
}

struct Level {
    graph: LocalGraph,
    /// Fine vertex → coarse vertex.
    cmap: Vec<u32>,
}

/// Two-way split; returns side 0/1 per vertex with side 0 targeting
/// `left_fraction` of the vertex weight.
pub(crate) fn bisect(g: &LocalGraph, left_fraction: f64, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let total = g.total_weight();
    let target0 = ((total as f64 * left_fraction).floor() as u64).clamp(1, total.saturating_sub(1).max(1));
    let balance = Balance::new(total, target0);

    let mut levels: Vec<Level> = Vec::new();
    loop {
        let current = levels.last().map_or(g, |l| &l.graph);
        if current.len() <= COARSEN_TO {
            break;
        }
        let level = coarsen(current, total, rng);
        if level.graph.len() as f64 > 0.9 * current.len() as f64 {
            break;
        }
        levels.push(level);
    }

    let coarsest = levels.last().map_or(g, |l| &l.graph);
    let mut part = initial_bisection(coarsest, &balance, rng);

    for i in (0..levels.len()).rev() {
        let fine = if i == 0 { g } else { &levels[i - 1].graph };
        let cmap = &levels[i].cmap;
        let mut fine_part: Vec<u8> = (0..fine.len()).map(|v| part[cmap[v] as usize]).collect();
        refine(fine, &mut fine_part, &balance, rng);
        part = fine_part;
    }
    part
}

fn coarsen(g: &LocalGraph, total: u64, rng: &mut ChaCha8Rng) -> Level {
    let n = g.len();
    let max_vwgt = ((1.5 * total as f64 / COARSEN_TO as f64).ceil() as u32).max(1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut mate = vec![u32::MAX; n];
    for &u in &order {
        if mate[u] != u32::MAX {
            continue;
        }
        let mut best: Option<(usize, u32)> = None;
        for (v, w) in g.neighbors(u) {
            if mate[v] == u32::MAX
                && v != u
                && g.vwgt[u] + g.vwgt[v] <= max_vwgt
                && best.is_none_or(|(_, bw)| w > bw)
            {
                best = Some((v, w));
            }
        }
        match best {
            Some((v, _)) => {
                mate[u] = v as u32;
                mate[v] = u as u32;
            }
            None => mate[u] = u as u32,
        }
    }
    let mut cmap = vec![u32::MAX; n];
    let mut nc = 0u32;
    for u in 0..n {
        if cmap[u] == u32::MAX {
            cmap[u] = nc;
            cmap[mate[u] as usize] = nc;
            nc += 1;
        }
    }
    let nc = nc as usize;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); nc];
    for u in 0..n {
        members[cmap[u] as usize].push(u);
    }
    let mut xadj = Vec::with_capacity(nc + 1);
    xadj.push(0);
    let mut adj = Vec::new();
    let mut ewgt = Vec::new();
    let mut vwgt = Vec::with_capacity(nc);
    let mut slot = vec![usize::MAX; nc];
    for (c, fine) in members.iter().enumerate() {
        let start = adj.len();
        let mut weight = 0;
        for &u in fine {
            weight += g.vwgt[u];
            for (v, w) in g.neighbors(u) {
                let cv = cmap[v] as usize;
                if cv == c {
                    continue;
                }
                if slot[cv] >= start && slot[cv] < adj.len() && adj[slot[cv]] == cv as u32 {
                    ewgt[slot[cv]] += w;
                } else {
                    slot[cv] = adj.len();
                    adj.push(cv as u32);
                    ewgt.push(w);
                }
            }
        }
        xadj.push(adj.len());
        vwgt.push(weight);
    }
    Level {
        graph: LocalGraph {
            xadj,
            adj,
            ewgt,
            vwgt,
        },
        cmap,
    }
}

#[derive(Debug, Clone, Copy)]
struct Balance {
    target0: u64,
    total: u64,
    max0: u64,
    max1: u64,
}

impl Balance {
    fn new(total: u64, target0: u64) -> Self {
        let tol = (IMBALANCE * total as f64).floor() as u64;
        let target1 = total - target0;
        Balance {
            target0,
            total,
            max0: target0 + tol,
            max1: target1 + tol,
        }
    }

    fn max_for(&self, side: u8) -> u64 {
        if side == 0 {
            self.max0
        } else {
            self.max1
        }
    }

    /// (overweight, deviation from target): smaller is better.
    fn key(&self, w0: u64) -> (u64, u64) {
        let w1 = self.total - w0;
        let over = w0.saturating_sub(self.max0) + w1.saturating_sub(self.max1);
        (over, w0.abs_diff(self.target0))
    }
}

fn side_weight(g: &LocalGraph, part: &[u8], side: u8) -> u64 {
    part.iter()
        .zip(&g.vwgt)
        .filter(|(&p, _)| p == side)
        .map(|(_, &w)| w as u64)
        .sum()
}

fn cut_of(g: &LocalGraph, part: &[u8]) -> u64 {
    let mut cut = 0u64;
    for v in 0..g.len() {
        for (u, w) in g.neighbors(v) {
            if part[u] != part[v] {
                cut += w as u64;
            }
        }
    }
    cut / 2
}

fn initial_bisection(g: &LocalGraph, balance: &Balance, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let n = g.len();
    let mut best: Option<((u64, u64, u64), Vec<u8>)> = None;
    for _ in 0..INITIAL_TRIES {
        let mut part = vec![1u8; n];
        let mut w0 = 0u64;
        let mut heap: BinaryHeap<(i64, u32)> = BinaryHeap::new();
        let mut gain = vec![0i64; n];
        for (v, slot) in gain.iter_mut().enumerate() {
            *slot = -(g.neighbors(v).map(|(_, w)| w as i64).sum::<i64>());
        }
        while w0 < balance.target0 {
            let next = loop {
                match heap.pop() {
                    Some((gv, v)) if part[v as usize] == 1 && gain[v as usize] == gv => break Some(v as usize),
                    Some(_) => continue,
                    None => break None,
                }
            };
            let v = match next {
                Some(v) => v,
                None => {
                    // Start (or restart, for disconnected graphs) from a
                    // random unassigned vertex.
                    let free: Vec<usize> = (0..n).filter(|&v| part[v] == 1).collect();
                    if free.is_empty() {
                        break;
                    }
                    free[rng.random_range(0..free.len())]
                }
            };
            if w0 + g.vwgt[v] as u64 > balance.max0 && w0 > 0 {
                break;
            }
            part[v] = 0;
            w0 += g.vwgt[v] as u64;
            for (u, w) in g.neighbors(v) {
                if part[u] == 1 {
                    gain[u] += 2 * w as i64;
                    heap.push((gain[u], u as u32));
                }
            }
        }
        refine(g, &mut part, balance, rng);
        let w0 = side_weight(g, &part, 0);
        let (over, dev) = balance.key(w0);
        let key = (over, cut_of(g, &part), dev);
        if best.as_ref().is_none_or(|(k, _)| key < *k) {
            best = Some((key, part));
        }
    }
    best.map(|(_, p)| p).unwrap_or_else(|| vec![0; n])
}

/// FM refinement: single-vertex moves by best gain with rollback to the best
/// prefix of each pass.
fn refine(g: &LocalGraph, part: &mut [u8], balance: &Balance, rng: &mut ChaCha8Rng) {
    let n = g.len();
    if n < 2 {
        return;
    }
    let stall_limit = 50.max(n / 20);
    for _ in 0..REFINE_PASSES {
        let mut w = [side_weight(g, part, 0), side_weight(g, part, 1)];
        let mut gain = vec![0i64; n];
        for (v, slot) in gain.iter_mut().enumerate() {
            *slot = g
                .neighbors(v)
                .map(|(u, wt)| if part[u] != part[v] { wt as i64 } else { -(wt as i64) })
                .sum();
        }
        let tiebreak: Vec<u32> = (0..n).map(|_| rng.random()).collect();
        let mut heaps: [BinaryHeap<(i64, u32, u32)>; 2] = [BinaryHeap::new(), BinaryHeap::new()];
        for v in 0..n {
            heaps[part[v] as usize].push((gain[v], tiebreak[v], v as u32));
        }
        let mut locked = vec![false; n];
        let mut cut = cut_of(g, part) as i64;
        let start_key = {
            let (over, dev) = balance.key(w[0]);
            (over, cut, dev)
        };
        let mut best_key = start_key;
        let mut best_len = 0usize;
        let mut moves: Vec<usize> = Vec::new();

        loop {
            if moves.len() - best_len > stall_limit {
                break;
            }
            // Unlocked vertices never change side, so an entry is live iff
            // its gain is current.
            let top = |heaps: &mut [BinaryHeap<(i64, u32, u32)>; 2], side: usize, locked: &[bool], gain: &[i64]| {
                while let Some(&(gv, _, v)) = heaps[side].peek() {
                    if locked[v as usize] || gain[v as usize] != gv {
                        heaps[side].pop();
                        continue;
                    }
                    return Some((gv, v as usize));
                }
                None
            };
            let c0 = top(&mut heaps, 0, &locked, &gain);
            let c1 = top(&mut heaps, 1, &locked, &gain);
            let over0 = w[0] > balance.max0;
            let over1 = w[1] > balance.max1;
            let fits = |from: usize, v: usize, w: &[u64; 2]| {
                let to = 1 - from;
                w[to] + g.vwgt[v] as u64 <= balance.max_for(to as u8)
            };
            let pick = match (c0, c1) {
                _ if over0 => c0.map(|(_, v)| (0usize, v)),
                _ if over1 => c1.map(|(_, v)| (1usize, v)),
                (Some((g0, v0)), Some((g1, v1))) => {
                    let ok0 = fits(0, v0, &w);
                    let ok1 = fits(1, v1, &w);
                    match (ok0, ok1) {
                        (true, true) => Some(if g0 >= g1 { (0, v0) } else { (1, v1) }),
                        (true, false) => Some((0, v0)),
                        (false, true) => Some((1, v1)),
                        (false, false) => None,
                    }
                }
                (Some((_, v0)), None) if fits(0, v0, &w) => Some((0, v0)),
                (None, Some((_, v1))) if fits(1, v1, &w) => Some((1, v1)),
                _ => None,
            };
            let Some((from, v)) = pick else { break };
            heaps[from].pop();
            let to = 1 - from;
            cut -= gain[v];
            part[v] = to as u8;
            locked[v] = true;
            w[from] -= g.vwgt[v] as u64;
            w[to] += g.vwgt[v] as u64;
            gain[v] = -gain[v];
            for (u, wt) in g.neighbors(v) {
                if locked[u] {
                    continue;
                }
                // u's edge to v flipped between internal and external.
                if part[u] as usize == to {
                    gain[u] -= 2 * wt as i64;
                } else {
                    gain[u] += 2 * wt as i64;
                }
                heaps[part[u] as usize].push((gain[u], tiebreak[u], u as u32));
            }
            moves.push(v);
            let (over, dev) = balance.key(w[0]);
            let key = (over, cut, dev);
            if key < best_key {
                best_key = key;
                best_len = moves.len();
            }
        }
        for &v in &moves[best_len..] {
            part[v] = 1 - part[v];
        }
        if best_key >= start_key {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn path_splits_in_the_middle() {
        let g = LocalGraph::from_edges(4, [(0, 1), (1, 2), (2, 3)]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let labels = partition(&g, 2, &mut rng);
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[2], labels[3]);
        assert_ne!(labels[1], labels[2]);
    }

    #[test]
    fn grid_bisection_is_balanced_with_small_cut() {
        let side = 30u32;
        let mut edges = Vec::new();
        for r in 0..side {
            for c in 0..side {
                let v = r * side + c;
                if c + 1 < side {
                    edges.push((v, v + 1));
                }
                if r + 1 < side {
                    edges.push((v, v + side));
                }
            }
        }
        let g = LocalGraph::from_edges((side * side) as usize, edges);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let labels = partition(&g, 4, &mut rng);
        let mut sizes = [0usize; 4];
        for &l in &labels {
            sizes[l as usize] += 1;
        }
        for s in sizes {
            assert!((200..=250).contains(&s), "{sizes:?}");
        }
        // A perfect 2x2 split cuts 60 edges.
        assert!(g.edge_cut(&labels) <= 120, "cut {}", g.edge_cut(&labels));
    }

    #[test]
    fn disconnected_input_still_splits() {
        let g = LocalGraph::from_edges(6, [(0, 1), (2, 3), (4, 5)]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let labels = partition(&g, 2, &mut rng);
        let zeros = labels.iter().filter(|&&l| l == 0).count();
        assert_eq!(zeros, 3);
    }

    #[test]
    fn deterministic_for_seed() {
        let edges: Vec<(u32, u32)> = (0..99).map(|i| (i, i + 1)).chain([(0, 50), (10, 90)]).collect();
        let g = LocalGraph::from_edges(100, edges);
        let a = partition(&g, 4, &mut ChaCha8Rng::seed_from_u64(5));
        let b = partition(&g, 4, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }
}
