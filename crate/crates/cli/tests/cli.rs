use std::path::Path;
use std::process::{Command, Output};

fn gvrn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gvrn"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .env("GVRN_THREADS", "1")
        .output()
        .expect("run gvrn")
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json_lines(text: &str) -> Vec<serde_json::Value> {
    text.lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// Network, objects, workload and index in one directory.
fn pipeline(dir: &Path) {
    ok(gvrn(
        dir,
        &["--seed", "3", "gen-net", "--node-count", "300"],
    ));
    ok(gvrn(
        dir,
        &[
            "--seed",
            "3",
            "gen-objects",
            "--object-count",
            "400",
            "--vocab-size",
            "200",
            "--mean-words",
            "8",
        ],
    ));
    ok(gvrn(
        dir,
        &[
            "--seed",
            "3",
            "gen-workload",
            "--query-count",
            "4",
            "--query-length",
            "30",
            "--words-per-query",
            "5",
        ],
    ));
    ok(gvrn(
        dir,
        &["--seed", "3", "build-index", "--leaf-capacity", "16"],
    ));
}

#[test]
fn end_to_end_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pipeline(d);
    for f in [
        "nodes.txt",
        "edges.txt",
        "objects.txt",
        "index.vigt",
        "workload/queries.txt",
        "workload/trace_0.txt",
    ] {
        assert!(d.join(f).exists(), "{f}");
    }

    let out = ok(gvrn(
        d,
        &[
            "query", "--edge", "0", "--offset", "0", "--words", "0,1,2,3", "--k", "5", "--mu",
            "0.5",
        ],
    ));
    let rows = json_lines(&out);
    assert!(!rows.is_empty() && rows.len() <= 5);
    for r in &rows {
        for key in ["object_id", "score", "dist", "vdist"] {
            assert!(r.get(key).is_some(), "{key} missing in {r}");
        }
    }
    let scores: Vec<f64> = rows.iter().map(|r| r["score"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] <= w[1]));

    let snapped = ok(gvrn(
        d,
        &[
            "query", "--x", "150", "--y", "-20", "--words", "0,1,2", "--k", "3",
        ],
    ));
    assert!(!json_lines(&snapped).is_empty());

    let trace = d.join("workload/trace_0.txt");
    let trace = trace.to_str().unwrap();
    let mma = json_lines(&ok(gvrn(
        d,
        &[
            "simulate", "--trace", trace, "--words", "0,1,2,3", "--k", "3",
        ],
    )));
    assert_eq!(mma.len(), 31);
    let last = mma.last().unwrap();
    assert_eq!(last["locations"], 30);
    let calls = mma[..30]
        .iter()
        .filter(|s| s["server_call"] == true)
        .count() as u64;
    assert_eq!(last["server_calls"].as_u64().unwrap(), calls);

    let naive = json_lines(&ok(gvrn(
        d,
        &[
            "simulate", "--trace", trace, "--words", "0,1,2,3", "--k", "3", "--mode", "naive",
        ],
    )));
    assert_eq!(naive.last().unwrap()["server_calls"], 30);
    for (a, b) in mma[..30].iter().zip(&naive[..30]) {
        let ids = |s: &serde_json::Value| {
            s["results"]
                .as_array()
                .unwrap()
                .iter()
                .map(|r| r["object_id"].clone())
                .collect::<Vec<_>>()
        };
        assert_eq!(ids(a), ids(b), "t {}", a["t"]);
    }
}

#[test]
fn bench_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pipeline(d);
    let out = ok(gvrn(
        d,
        &[
            "bench",
            "--query-count",
            "3",
            "--sweep",
            "query_length:20:40:20",
            "--words-per-query",
            "5",
        ],
    ));
    let summary = json_lines(&out);
    assert_eq!(summary.len(), 2);
    let csv = std::fs::read_to_string(d.join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
    assert!(d.join("bench.json").exists());

    let wl = d.join("workload");
    ok(gvrn(
        d,
        &["bench", "--workload", wl.to_str().unwrap(), "--mode", "mma"],
    ));
    let csv = std::fs::read_to_string(d.join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
}

#[test]
fn generators_are_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [a.path(), b.path()] {
        ok(gvrn(d, &["--seed", "7", "gen-net", "--node-count", "100"]));
        ok(gvrn(
            d,
            &[
                "--seed",
                "7",
                "gen-objects",
                "--object-count",
                "50",
                "--vocab-size",
                "100",
                "--mean-words",
                "5",
            ],
        ));
    }
    for f in ["nodes.txt", "edges.txt", "objects.txt"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn validation_failures_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        gvrn(d, &["gen-net", "--node-count", "1"]).status.code(),
        Some(2)
    );
    assert_eq!(
        gvrn(d, &["gen-net", "--node-count", "50", "--avg-degree", "9"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(gvrn(d, &["bogus"]).status.code(), Some(2));

    std::fs::write(d.join("nodes.txt"), "0 0 0\n1 1 0\n").unwrap();
    std::fs::write(d.join("edges.txt"), "0 0 7 1.0\n").unwrap();
    std::fs::write(d.join("objects.txt"), "").unwrap();
    assert_eq!(gvrn(d, &["build-index"]).status.code(), Some(2));

    pipeline(d);
    let q = |extra: &[&str]| {
        let mut args = vec!["query", "--words", "1,2"];
        args.extend_from_slice(extra);
        gvrn(d, &args).status.code()
    };
    assert_eq!(q(&["--edge", "999999", "--offset", "0"]), Some(2));
    assert_eq!(q(&["--edge", "0", "--offset", "-5"]), Some(2));
    assert_eq!(q(&["--edge", "0", "--offset", "0", "--k", "0"]), Some(2));
    assert_eq!(q(&["--edge", "0", "--offset", "0", "--mu", "1.5"]), Some(2));
    assert_eq!(q(&["--edge", "0"]), Some(2));
    assert_eq!(q(&[]), Some(2));

    let mut bytes = std::fs::read(d.join("index.vigt")).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xff;
    let bad = d.join("bad.vigt");
    std::fs::write(&bad, bytes).unwrap();
    let out = gvrn(
        d,
        &[
            "query",
            "--index",
            bad.to_str().unwrap(),
            "--edge",
            "0",
            "--offset",
            "0",
            "--words",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum"));

    let trace = d.join("bad_trace.txt");
    std::fs::write(&trace, "0 0 0\n0 0 0\n").unwrap();
    let out = gvrn(
        d,
        &[
            "simulate",
            "--trace",
            trace.to_str().unwrap(),
            "--words",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(2));

    assert_eq!(
        gvrn(d, &["bench", "--sweep", "speed:1:2:1"]).status.code(),
        Some(2)
    );
    assert_eq!(gvrn(d, &["bench", "--mode", "fast"]).status.code(), Some(2));
}

#[test]
fn missing_files_are_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = gvrn(dir.path(), &["gen-objects"]);
    assert_eq!(out.status.code(), Some(1));
}
