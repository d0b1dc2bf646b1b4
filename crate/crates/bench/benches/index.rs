use criterion::{criterion_group, criterion_main, Criterion};
use gvrn::codec::{deserialize, serialize};
use gvrn::gtree::{build_gtree, GTreeConfig};
use gvrn::vig_index::build_index;

fn build(c: &mut Criterion) {
    let spec = gvrn_bench::spec(2_000, 2_000);
    let net = gvrn_bench::network(&spec);
    let mut group = c.benchmark_group("build");
    group.sample_size(10);
    group.bench_function("gtree_2k", |b| {
        b.iter(|| build_gtree(&net, &GTreeConfig::default()).unwrap())
    });
    group.bench_function("index_2k", |b| {
        b.iter(|| {
            let tree = build_gtree(&net, &GTreeConfig::default()).unwrap();
            build_index(net.clone(), tree, 0.5).unwrap()
        })
    });
    group.finish();

    let index = gvrn_bench::index(&spec);
    let bytes = serialize(&index);
    c.bench_function("deserialize_2k", |b| {
        b.iter(|| deserialize(&bytes).unwrap())
    });
}

criterion_group!(benches, build);
criterion_main!(benches);
