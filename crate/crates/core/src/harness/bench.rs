//! Benchmark runner: per-query response times and server calls for the
//! moving monitor and the per-location baseline.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::seeded;
use super::workload::{check_network, gen_workload, Workload, WorkloadQuery, WorkloadSpec};
use crate::continuous_query::{naive_step, ContinuousQuery, IndexServer, MonitorSession, RefreshPolicy, Step};
use crate::error::{Error, Result};
use crate::snapshot_query::{brute_force_top_k, Query, ResultSet};
use crate::vig_index::VigTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Mma,
    Naive,
    Both,
}

impl Mode {
    fn mma(self) -> bool {
        self != Mode::Naive
    }
    fn naive(self) -> bool {
        self != Mode::Mma
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mma" => Ok(Mode::Mma),
            "naive" => Ok(Mode::Naive),
            "both" => Ok(Mode::Both),
            _ => Err(Error::InvalidParameter(format!("unknown mode {s:?}; expected mma, naive or both"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    QueryLength,
    Words,
    K,
    Mu,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::QueryLength => "query_length",
            SweepParam::Words => "words",
            SweepParam::K => "k",
            SweepParam::Mu => "mu",
        }
    }

    fn apply(self, spec: &WorkloadSpec, value: f64) -> WorkloadSpec {
        let mut s = *spec;
        match self {
            SweepParam::QueryLength => s.query_length = value.round() as usize,
            SweepParam::Words => s.words_per_query = value.round() as usize,
            SweepParam::K => s.k = value.round() as usize,
            SweepParam::Mu => s.mu = value,
        }
        s
    }
}

/// `param:lo:hi:step`, for example `query_length:100:500:100`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub param: SweepParam,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl FromStr for Sweep {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("sweep {s:?} is not param:lo:hi:step"));
        let f: Vec<&str> = s.split(':').collect();
        if f.len() != 4 {
            return Err(bad());
        }
        let param = match f[0] {
            "query_length" | "length" => SweepParam::QueryLength,
            "words" | "words_per_query" => SweepParam::Words,
            "k" => SweepParam::K,
            "mu" => SweepParam::Mu,
            other => return Err(Error::InvalidParameter(format!("unknown sweep parameter {other:?}"))),
        };
        let num = |x: &str| x.parse::<f64>().map_err(|_| bad());
        let (lo, hi, step) = (num(f[1])?, num(f[2])?, num(f[3])?);
        if !(step > 0.0 && lo <= hi) {
            return Err(bad());
        }
        Ok(Sweep { param, lo, hi, step })
    }
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub mode: Mode,
    /// Worker threads; `None` uses `GVRN_THREADS` or all cores.
    pub threads: Option<usize>,
    /// Share of timestamps re-checked against brute force.
    pub verify_fraction: f64,
    pub warmup: usize,
    pub policy: RefreshPolicy,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            mode: Mode::Both,
            threads: None,
            verify_fraction: 0.01,
            warmup: 3,
            policy: RefreshPolicy::default(),
            seed: 0,
        }
    }
}

/// Reads `GVRN_THREADS`.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("GVRN_THREADS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeMetrics {
    pub server_calls: u64,
    pub intervals: u64,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub param: String,
    pub value: f64,
    pub query_id: usize,
    pub trace_len: usize,
    pub mma: Option<ModeMetrics>,
    pub naive: Option<ModeMetrics>,
    /// Timestamps re-checked against brute force.
    pub verified: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub param: String,
    pub value: f64,
    pub queries: usize,
    pub mean_trace_len: f64,
    pub mma_server_calls: Option<f64>,
    pub naive_server_calls: Option<f64>,
    /// Mean MMA calls over mean baseline calls.
    pub call_ratio: Option<f64>,
    pub mma_mean_ms: Option<f64>,
    pub naive_mean_ms: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

pub const CSV_HEADER: &str = "param,value,query_id,trace_len,mma_server_calls,mma_intervals,mma_mean_ms,mma_median_ms,mma_p95_ms,mma_total_ms,naive_server_calls,naive_intervals,naive_mean_ms,naive_median_ms,naive_p95_ms,naive_total_ms,verified";

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{},{},{},{}", r.param, r.value, r.query_id, r.trace_len);
            for m in [&r.mma, &r.naive] {
                match m {
                    Some(m) => {
                        let _ = write!(
                            out,
                            ",{},{},{:.6},{:.6},{:.6},{:.6}",
                            m.server_calls, m.intervals, m.mean_ms, m.median_ms, m.p95_ms, m.total_ms
                        );
                    }
                    None => out.push_str(",,,,,,"),
                }
            }
            let _ = writeln!(out, ",{}", r.verified);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One line per sweep point, in the order the points were run.
    pub fn summary(&self) -> Vec<SweepSummary> {
        let mut out: Vec<SweepSummary> = Vec::new();
        let mut groups: Vec<(&str, f64, Vec<&BenchRow>)> = Vec::new();
        for r in &self.rows {
            match groups.iter_mut().find(|g| g.0 == r.param && g.1 == r.value) {
                Some(g) => g.2.push(r),
                None => groups.push((&r.param, r.value, vec![r])),
            }
        }
        for (param, value, rows) in groups {
            let n = rows.len() as f64;
            let mean = |f: &dyn Fn(&BenchRow) -> Option<f64>| -> Option<f64> {
                let v: Option<Vec<f64>> = rows.iter().map(|r| f(r)).collect();
                v.map(|v| v.iter().sum::<f64>() / n)
            };
            let mma_calls = mean(&|r| r.mma.map(|m| m.server_calls as f64));
            let naive_calls = mean(&|r| r.naive.map(|m| m.server_calls as f64));
            out.push(SweepSummary {
                param: param.to_string(),
                value,
                queries: rows.len(),
                mean_trace_len: rows.iter().map(|r| r.trace_len as f64).sum::<f64>() / n,
                mma_server_calls: mma_calls,
                naive_server_calls: naive_calls,
                call_ratio: mma_calls.zip(naive_calls).map(|(a, b)| a / b),
                mma_mean_ms: mean(&|r| r.mma.map(|m| m.mean_ms)),
                naive_mean_ms: mean(&|r| r.naive.map(|m| m.mean_ms)),
            });
        }
        out
    }
}

fn metrics(mut times_ms: Vec<f64>, server_calls: u64, intervals: u64) -> ModeMetrics {
    let total: f64 = times_ms.iter().sum();
    times_ms.sort_by(f64::total_cmp);
    let rank = |p: f64| {
        if times_ms.is_empty() {
            return 0.0;
        }
        let i = ((p * times_ms.len() as f64).ceil() as usize).clamp(1, times_ms.len()) - 1;
        times_ms[i]
    };
    ModeMetrics {
        server_calls,
        intervals,
        mean_ms: if times_ms.is_empty() { 0.0 } else { total / times_ms.len() as f64 },
        median_ms: rank(0.5),
        p95_ms: rank(0.95),
        total_ms: total,
    }
}

/// Same ids in the same order with scores within `rel`; entries whose
/// scores tie within `rel` may swap, including at the rank-k cut.
pub fn results_agree(got: &ResultSet, want: &ResultSet, rel: f64) -> bool {
    let (g, w) = (got.entries(), want.entries());
    let close = |a: f64, b: f64| (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0);
    g.len() == w.len()
        && g.iter().zip(w).all(|(a, b)| {
            close(a.score, b.score)
                && (a.object_id == b.object_id
                    || w.iter().any(|e| e.object_id == a.object_id && close(e.score, b.score))
                    || close(a.score, w[w.len() - 1].score))
        })
}

const AGREE_REL: f64 = 1e-9;

fn run_mma(index: &VigTree, cq: &ContinuousQuery, policy: RefreshPolicy) -> Result<(Vec<Step>, ModeMetrics)> {
    let mut server = IndexServer::new(index);
    let mut session = MonitorSession::new(&mut server, cq, policy);
    let mut times = Vec::with_capacity(cq.trace.len());
    let mut steps = Vec::with_capacity(cq.trace.len());
    for p in &cq.trace {
        let started = Instant::now();
        steps.push(session.advance(p)?);
        times.push(started.elapsed().as_secs_f64() * 1e3);
    }
    let s = session.stats();
    Ok((steps, metrics(times, s.server_calls, s.intervals_entered)))
}

fn run_naive(index: &VigTree, cq: &ContinuousQuery) -> Result<(Vec<Step>, ModeMetrics)> {
    let mut times = Vec::with_capacity(cq.trace.len());
    let mut steps = Vec::with_capacity(cq.trace.len());
    for p in &cq.trace {
        let started = Instant::now();
        steps.push(naive_step(index, cq, p)?);
        times.push(started.elapsed().as_secs_f64() * 1e3);
    }
    let n = cq.trace.len() as u64;
    Ok((steps, metrics(times, n, n.saturating_sub(1))))
}

fn run_query(index: &VigTree, q: &WorkloadQuery, config: &BenchConfig, label: (&str, f64)) -> Result<BenchRow> {
    let net = index.network();
    let cq = q.to_continuous(net, index.diameter())?;
    let mma = config.mode.mma().then(|| run_mma(index, &cq, config.policy)).transpose()?;
    let naive = config.mode.naive().then(|| run_naive(index, &cq)).transpose()?;

    if let (Some((a, _)), Some((b, _))) = (&mma, &naive) {
        for (x, y) in a.iter().zip(b) {
            if !results_agree(&x.results, &y.results, AGREE_REL) {
                return Err(Error::OracleMismatch(format!(
                    "query {} at t={}: moving monitor {:?} vs per-location {:?}",
                    q.id,
                    x.t,
                    x.results.ids(),
                    y.results.ids()
                )));
            }
        }
    }

    let mut rng = seeded(config.seed ^ (q.id as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut sampled: Vec<usize> = (0..cq.trace.len())
        .filter(|_| rng.random_bool(config.verify_fraction.clamp(0.0, 1.0)))
        .collect();
    if sampled.is_empty() && !cq.trace.is_empty() && config.verify_fraction > 0.0 {
        sampled.push(rng.random_range(0..cq.trace.len()));
    }
    let steps = mma.as_ref().or(naive.as_ref()).map(|(s, _)| s);
    for &i in &sampled {
        let point = cq.trace[i];
        let query = Query::new(point.position, cq.words.clone(), cq.k, cq.params)?;
        let want = brute_force_top_k(net, &query)?;
        let got = &steps.expect("at least one mode ran")[i].results;
        if !results_agree(got, &want, AGREE_REL) {
            return Err(Error::OracleMismatch(format!(
                "query {} at t={}: {:?} vs brute force {:?}",
                q.id,
                point.t,
                got.ids(),
                want.ids()
            )));
        }
    }
    Ok(BenchRow {
        param: label.0.to_string(),
        value: label.1,
        query_id: q.id,
        trace_len: cq.trace.len(),
        mma: mma.map(|(_, m)| m),
        naive: naive.map(|(_, m)| m),
        verified: sampled.len(),
    })
}

fn pool(config: &BenchConfig) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.threads.or_else(threads_from_env) {
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

/// Runs every query of a workload, labelling rows with a sweep point.
pub fn run_bench(index: &VigTree, workload: &Workload, config: &BenchConfig, label: (&str, f64)) -> Result<Vec<BenchRow>> {
    check_network(workload, index.network())?;
    for q in workload.queries.iter().take(config.warmup) {
        run_query(index, q, &BenchConfig { verify_fraction: 0.0, ..*config }, label)?;
    }
    let pool = pool(config)?;
    pool.install(|| {
        workload
            .queries
            .par_iter()
            .map(|q| run_query(index, q, config, label))
            .collect()
    })
}

/// Generates a workload per sweep point from `base` and benchmarks each.
pub fn sweep(index: &VigTree, base: &WorkloadSpec, sweep: Option<&Sweep>, config: &BenchConfig) -> Result<BenchReport> {
    let points: Vec<(&str, f64, WorkloadSpec)> = match sweep {
        Some(s) => s
            .values()
            .into_iter()
            .map(|v| (s.param.name(), v, s.param.apply(base, v)))
            .collect(),
        None => vec![("none", 0.0, *base)],
    };
    let mut report = BenchReport::default();
    for (name, value, spec) in points {
        let workload = gen_workload(index.network(), &spec)?;
        report.rows.extend(run_bench(index, &workload, config, (name, value))?);
    }
    Ok(report)
}
