//! Fixtures shared by the benchmarks.

use gvrn::gtree::{build_gtree, GTreeConfig};
use gvrn::harness::generate::{gen_network, gen_objects, GeneratorSpec};
use gvrn::harness::workload::{gen_workload, Workload, WorkloadSpec};
use gvrn::road_graph::{compute_diameter, DiameterConfig, RoadNetwork};
use gvrn::vig_index::{build_index, VigTree};

/// Small enough to build in a couple of seconds, large enough for a
/// multi-level tree.
pub fn spec(nodes: usize, objects: usize) -> GeneratorSpec {
    GeneratorSpec {
        node_count: nodes,
        object_count: objects,
        vocab_size: 5_000,
        mean_words_per_object: 40.0,
        seed: 42,
        ..Default::default()
    }
}

/// Network with objects attached and a diameter set.
pub fn network(spec: &GeneratorSpec) -> RoadNetwork {
    let mut net = gen_network(spec).expect("network");
    compute_diameter(&mut net, &DiameterConfig::default());
    let objects = gen_objects(&net, spec).expect("objects");
    net.attach_objects(objects).expect("attach")
}

pub fn index(spec: &GeneratorSpec) -> VigTree {
    let net = network(spec);
    let tree = build_gtree(&net, &GTreeConfig::default()).expect("tree");
    build_index(net, tree, 0.5).expect("index")
}

pub fn workload(index: &VigTree, queries: usize, length: usize) -> Workload {
    let spec = WorkloadSpec {
        query_count: queries,
        query_length: length,
        words_per_query: 20,
        seed: 7,
        ..Default::default()
    };
    gen_workload(index.network(), &spec).expect("workload")
}
