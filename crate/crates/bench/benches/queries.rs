use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gvrn::continuous_query::{moving_monitor, naive_monitor, IndexServer, RefreshPolicy};
use gvrn::gtree::gtree_distance;
use gvrn::road_graph::EdgePosition;
use gvrn::snapshot_query::{brute_force_top_k, top_k, Query};

fn snapshot(c: &mut Criterion) {
    let index = gvrn_bench::index(&gvrn_bench::spec(5_000, 5_000));
    let workload = gvrn_bench::workload(&index, 20, 1);
    let queries: Vec<Query> = workload
        .queries
        .iter()
        .map(|q| {
            Query::new(
                q.trace[0].position,
                q.words.clone(),
                q.k,
                index.params(q.mu).unwrap(),
            )
            .unwrap()
        })
        .collect();

    let mut group = c.benchmark_group("snapshot");
    group.bench_function("top_k", |b| {
        b.iter(|| {
            queries
                .iter()
                .map(|q| top_k(&index, q).unwrap().len())
                .sum::<usize>()
        })
    });
    group.sample_size(10);
    group.bench_function("brute_force", |b| {
        b.iter(|| {
            queries
                .iter()
                .map(|q| brute_force_top_k(index.network(), q).unwrap().len())
                .sum::<usize>()
        })
    });
    group.finish();

    let net = index.network();
    let (a, z) = (
        EdgePosition::new(0, 0.0),
        EdgePosition::new(net.num_edges() as u32 - 1, 0.0),
    );
    c.bench_function("gtree_distance", |b| {
        b.iter(|| gtree_distance(index.gtree(), net, black_box(a), black_box(z)))
    });
}

fn continuous(c: &mut Criterion) {
    let index = gvrn_bench::index(&gvrn_bench::spec(5_000, 5_000));
    let mut group = c.benchmark_group("continuous");
    group.sample_size(10);
    for length in [100, 300] {
        let workload = gvrn_bench::workload(&index, 5, length);
        let queries: Vec<_> = workload
            .queries
            .iter()
            .map(|q| q.to_continuous(index.network(), index.diameter()).unwrap())
            .collect();
        group.bench_with_input(BenchmarkId::new("mma", length), &queries, |b, qs| {
            b.iter(|| {
                for q in qs {
                    let mut server = IndexServer::new(&index);
                    moving_monitor(&mut server, q, RefreshPolicy::SafeInterval).unwrap();
                }
            })
        });
        group.bench_with_input(BenchmarkId::new("naive", length), &queries, |b, qs| {
            b.iter(|| {
                for q in qs {
                    naive_monitor(&index, q).unwrap();
                }
            })
        });
    }
    group.finish();
}

criterion_group!(benches, snapshot, continuous);
criterion_main!(benches);
