use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use gvrn::codec::{read_index, write_index};
use gvrn::continuous_query::{
    moving_monitor, naive_monitor, parse_trace, ContinuousQuery, IndexServer, RefreshPolicy, Step,
};
use gvrn::gtree::{build_gtree, GTreeConfig};
use gvrn::harness::bench::{sweep, threads_from_env, BenchConfig, BenchReport, Mode, Sweep};
use gvrn::harness::generate::{
    format_edges, format_nodes, format_objects, gen_network, gen_objects, GeneratorSpec,
};
use gvrn::harness::workload::{gen_workload, read_workload, write_workload, WorkloadSpec};
use gvrn::road_graph::{
    compute_diameter, load_network, parse_objects, DiameterConfig, EdgePosition, GeoVisualObject,
    RoadNetwork,
};
use gvrn::snapshot_query::{top_k, Query, ScoredObject};
use gvrn::vig_index::build_index;
use gvrn::visual::VisualDescriptor;

const NODES_FILE: &str = "nodes.txt";
const EDGES_FILE: &str = "edges.txt";
const OBJECTS_FILE: &str = "objects.txt";
const INDEX_FILE: &str = "index.vigt";
const WORKLOAD_DIR: &str = "workload";

#[derive(Parser)]
#[command(
    name = "gvrn",
    version,
    about = "Geo-visual top-k search over road networks"
)]
struct Cli {
    /// Seed for every random choice (generators, partitioning, workloads).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for generated files; also the default input location.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random road network (nodes.txt, edges.txt).
    GenNet(GenNetArgs),
    /// Generate geo-visual objects on an existing network (objects.txt).
    GenObjects(GenObjectsArgs),
    /// Generate continuous-query workloads (queries.txt plus traces).
    GenWorkload(GenWorkloadArgs),
    /// Build the index file from network and object files.
    BuildIndex(BuildIndexArgs),
    /// Answer one snapshot top-k query.
    Query(QueryArgs),
    /// Replay a trace as a moving query.
    Simulate(SimulateArgs),
    /// Benchmark moving-query processing against per-location querying.
    Bench(BenchArgs),
}

/// Where to find node and edge files; defaults to `--out-dir`.
#[derive(Args)]
struct NetInput {
    #[arg(long)]
    nodes: Option<PathBuf>,
    #[arg(long)]
    edges: Option<PathBuf>,
}

impl NetInput {
    fn load(&self, out_dir: &Path) -> anyhow::Result<RoadNetwork> {
        let nodes = self
            .nodes
            .clone()
            .unwrap_or_else(|| out_dir.join(NODES_FILE));
        let edges = self
            .edges
            .clone()
            .unwrap_or_else(|| out_dir.join(EDGES_FILE));
        let node_text = read(&nodes)?;
        let edge_text = read(&edges)?;
        Ok(load_network(&node_text, &edge_text)?)
    }
}

#[derive(Args)]
struct GenNetArgs {
    #[arg(long, default_value_t = 10_000)]
    node_count: usize,
    #[arg(long, default_value_t = 2.5)]
    avg_degree: f64,
}

#[derive(Args)]
struct GenObjectsArgs {
    #[command(flatten)]
    net: NetInput,
    #[arg(long, default_value_t = 10_000)]
    object_count: usize,
    #[arg(long, default_value_t = 50_000)]
    vocab_size: u32,
    #[arg(long, default_value_t = 128.6)]
    mean_words: f64,
    #[arg(long, default_value_t = 1.0)]
    zipf_exponent: f64,
}

#[derive(Args)]
struct WorkloadArgs {
    #[arg(long, default_value_t = 100)]
    query_count: usize,
    #[arg(long, default_value_t = 100)]
    query_length: usize,
    #[arg(long, default_value_t = 40)]
    words_per_query: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 0.5)]
    mu: f64,
}

impl WorkloadArgs {
    fn spec(&self, seed: u64) -> WorkloadSpec {
        WorkloadSpec {
            query_count: self.query_count,
            query_length: self.query_length,
            words_per_query: self.words_per_query,
            k: self.k,
            mu: self.mu,
            seed,
        }
    }
}

#[derive(Args)]
struct GenWorkloadArgs {
    #[command(flatten)]
    net: NetInput,
    /// Traces start at object positions and query words are drawn from
    /// object descriptors.
    #[arg(long)]
    objects: Option<PathBuf>,
    #[command(flatten)]
    workload: WorkloadArgs,
}

#[derive(Args)]
struct BuildIndexArgs {
    #[command(flatten)]
    net: NetInput,
    #[arg(long)]
    objects: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    fanout: usize,
    #[arg(long, default_value_t = 64)]
    leaf_capacity: usize,
    /// Default weight of network proximity stored in the index.
    #[arg(long, default_value_t = 0.5)]
    mu: f64,
    /// Largest network whose diameter is computed exactly; bigger ones are
    /// estimated by repeated double sweeps.
    #[arg(long, default_value_t = 2000)]
    exact_diameter_limit: usize,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long, requires = "offset", conflicts_with_all = ["x", "y"])]
    edge: Option<u32>,
    #[arg(long, requires = "edge")]
    offset: Option<f64>,
    #[arg(long, requires = "y", allow_hyphen_values = true)]
    x: Option<f64>,
    #[arg(long, requires = "x", allow_hyphen_values = true)]
    y: Option<f64>,
    /// Comma-separated visual word ids.
    #[arg(long)]
    words: String,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Weight of network proximity; defaults to the value stored in the index.
    #[arg(long)]
    mu: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    SafeInterval,
    Corridor,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimulateMode {
    Mma,
    Naive,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    index: Option<PathBuf>,
    /// Trace file of `<timestamp> <edge_id> <offset>` lines.
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    words: String,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, value_enum, default_value_t = SimulateMode::Mma)]
    mode: SimulateMode,
    #[arg(long, value_enum, default_value_t = PolicyArg::SafeInterval)]
    policy: PolicyArg,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    index: Option<PathBuf>,
    /// Existing workload directory. Without it (or with --sweep) workloads
    /// are generated from the workload flags.
    #[arg(long, conflicts_with = "sweep")]
    workload: Option<PathBuf>,
    /// Parameter sweep as `param:lo:hi:step`; param is one of query_length,
    /// words, k, mu.
    #[arg(long)]
    sweep: Option<String>,
    /// mma, naive or both.
    #[arg(long, default_value = "both")]
    mode: String,
    #[arg(long, value_enum, default_value_t = PolicyArg::SafeInterval)]
    policy: PolicyArg,
    #[command(flatten)]
    spec: WorkloadArgs,
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn parse_words(list: &str) -> anyhow::Result<VisualDescriptor> {
    let words = list
        .split(',')
        .map(str::trim)
        .filter(|w| !w.is_empty())
        .map(|w| {
            w.parse::<u32>()
                .map_err(|_| gvrn::Error::InvalidParameter(format!("bad word id {w:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if words.is_empty() {
        return Err(gvrn::Error::EmptyQueryDescriptor.into());
    }
    Ok(VisualDescriptor::new(words))
}

fn load_objects(path: &Option<PathBuf>, out_dir: &Path) -> anyhow::Result<Vec<GeoVisualObject>> {
    let path = path.clone().unwrap_or_else(|| out_dir.join(OBJECTS_FILE));
    Ok(parse_objects(&read(&path)?)?)
}

fn load_index(path: &Option<PathBuf>, out_dir: &Path) -> anyhow::Result<gvrn::vig_index::VigTree> {
    let path = path.clone().unwrap_or_else(|| out_dir.join(INDEX_FILE));
    read_index(&path).with_context(|| format!("loading index {}", path.display()))
}

fn policy(arg: PolicyArg) -> RefreshPolicy {
    match arg {
        PolicyArg::SafeInterval => RefreshPolicy::SafeInterval,
        PolicyArg::Corridor => RefreshPolicy::Corridor,
    }
}

fn generator(seed: u64) -> GeneratorSpec {
    GeneratorSpec {
        seed,
        ..Default::default()
    }
}

fn gen_net_cmd(cli: &Cli, args: &GenNetArgs) -> anyhow::Result<()> {
    let spec = GeneratorSpec {
        node_count: args.node_count,
        avg_degree: args.avg_degree,
        ..generator(cli.seed)
    };
    let net = gen_network(&spec)?;
    write(&cli.out_dir.join(NODES_FILE), &format_nodes(&net))?;
    write(&cli.out_dir.join(EDGES_FILE), &format_edges(&net))?;
    eprintln!("{} nodes, {} edges", net.num_nodes(), net.num_edges());
    Ok(())
}

fn gen_objects_cmd(cli: &Cli, args: &GenObjectsArgs) -> anyhow::Result<()> {
    let net = args.net.load(&cli.out_dir)?;
    let spec = GeneratorSpec {
        object_count: args.object_count,
        vocab_size: args.vocab_size,
        mean_words_per_object: args.mean_words,
        zipf_exponent: args.zipf_exponent,
        ..generator(cli.seed)
    };
    let objects = gen_objects(&net, &spec)?;
    write(&cli.out_dir.join(OBJECTS_FILE), &format_objects(&objects))?;
    eprintln!("{} objects", objects.len());
    Ok(())
}

fn gen_workload_cmd(cli: &Cli, args: &GenWorkloadArgs) -> anyhow::Result<()> {
    let net = args.net.load(&cli.out_dir)?;
    let net = net.attach_objects(load_objects(&args.objects, &cli.out_dir)?)?;
    let workload = gen_workload(&net, &args.workload.spec(cli.seed))?;
    let dir = cli.out_dir.join(WORKLOAD_DIR);
    write_workload(&workload, &dir)?;
    eprintln!("{} queries in {}", workload.queries.len(), dir.display());
    Ok(())
}

fn build_index_cmd(cli: &Cli, args: &BuildIndexArgs) -> anyhow::Result<()> {
    let mut net = args.net.load(&cli.out_dir)?;
    let objects = load_objects(&args.objects, &cli.out_dir)?;
    let diameter = compute_diameter(
        &mut net,
        &DiameterConfig {
            exact_threshold: args.exact_diameter_limit,
            seed: cli.seed,
            ..Default::default()
        },
    );
    let net = net.attach_objects(objects)?;
    let config = GTreeConfig {
        fanout: args.fanout,
        leaf_capacity: args.leaf_capacity,
        seed: cli.seed,
    };
    let tree = build_gtree(&net, &config)?;
    let index = build_index(net, tree, args.mu)?;
    let path = cli.out_dir.join(INDEX_FILE);
    fs::create_dir_all(&cli.out_dir)?;
    write_index(&index, &path)?;
    eprintln!(
        "index {}: {} tree nodes, height {}, diameter {diameter}",
        path.display(),
        index.gtree().nodes().len(),
        index.gtree().height()
    );
    Ok(())
}

fn print_lines<T: Serialize>(rows: impl IntoIterator<Item = T>) -> anyhow::Result<()> {
    let mut out = BufWriter::new(io::stdout().lock());
    for row in rows {
        serde_json::to_writer(&mut out, &row)?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn query_cmd(cli: &Cli, args: &QueryArgs) -> anyhow::Result<()> {
    let index = load_index(&args.index, &cli.out_dir)?;
    let net = index.network();
    let location = match (args.edge, args.offset, args.x, args.y) {
        (Some(edge), Some(offset), _, _) => EdgePosition::new(edge, offset),
        (_, _, Some(x), Some(y)) => index.gtree().snap(net, x, y),
        _ => bail!(gvrn::Error::InvalidParameter(
            "give --edge/--offset or --x/--y".into()
        )),
    };
    let params = index.params(args.mu.unwrap_or(index.mu_default()))?;
    let query = Query::new(location, parse_words(&args.words)?, args.k, params)?;
    let results = top_k(&index, &query)?;
    print_lines(results.entries())
}

#[derive(Serialize)]
struct StepLine<'a> {
    t: f64,
    results: &'a [ScoredObject],
    server_call: bool,
}

#[derive(Serialize)]
struct SessionLine {
    server_calls: u64,
    locations: u64,
    intervals: u64,
}

fn simulate_cmd(cli: &Cli, args: &SimulateArgs) -> anyhow::Result<()> {
    let index = load_index(&args.index, &cli.out_dir)?;
    let trace = parse_trace(&read(&args.trace)?)?;
    let params = index.params(args.mu.unwrap_or(index.mu_default()))?;
    let cq = ContinuousQuery::new(
        index.network(),
        parse_words(&args.words)?,
        args.k,
        params,
        trace,
    )?;
    let (steps, stats) = match args.mode {
        SimulateMode::Mma => {
            moving_monitor(&mut IndexServer::new(&index), &cq, policy(args.policy))?
        }
        SimulateMode::Naive => naive_monitor(&index, &cq)?,
    };
    let lines = steps.iter().map(|s: &Step| StepLine {
        t: s.t,
        results: s.results.entries(),
        server_call: s.server_call,
    });
    print_lines(lines)?;
    print_lines([SessionLine {
        server_calls: stats.server_calls,
        locations: stats.locations_processed,
        intervals: stats.intervals_entered,
    }])
}

fn bench_cmd(cli: &Cli, args: &BenchArgs) -> anyhow::Result<()> {
    let index = load_index(&args.index, &cli.out_dir)?;
    let config = BenchConfig {
        mode: args.mode.parse::<Mode>()?,
        threads: threads_from_env(),
        policy: policy(args.policy),
        seed: cli.seed,
        ..Default::default()
    };
    let report = match &args.workload {
        Some(dir) => {
            let workload = read_workload(dir)?;
            BenchReport {
                rows: gvrn::harness::bench::run_bench(&index, &workload, &config, ("none", 0.0))?,
            }
        }
        None => {
            let sweep_spec = args.sweep.as_deref().map(str::parse::<Sweep>).transpose()?;
            sweep(
                &index,
                &args.spec.spec(cli.seed),
                sweep_spec.as_ref(),
                &config,
            )?
        }
    };
    write(&cli.out_dir.join("bench.csv"), &report.to_csv())?;
    write(&cli.out_dir.join("bench.json"), &report.to_json())?;
    print_lines(report.summary())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::GenNet(a) => gen_net_cmd(cli, a),
        Command::GenObjects(a) => gen_objects_cmd(cli, a),
        Command::GenWorkload(a) => gen_workload_cmd(cli, a),
        Command::BuildIndex(a) => build_index_cmd(cli, a),
        Command::Query(a) => query_cmd(cli, a),
        Command::Simulate(a) => simulate_cmd(cli, a),
        Command::Bench(a) => bench_cmd(cli, a),
    }
}

fn main() -> ExitCode {
    // clap itself exits with 2 on usage errors.
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let validation = err.chain().any(|e| {
                e.downcast_ref::<gvrn::Error>()
                    .is_some_and(gvrn::Error::is_validation)
            });
            ExitCode::from(if validation { 2 } else { 1 })
        }
    }
}
