use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use muse_cli::commands::{self, GraphSummary, RunManifest, SweepEntry};
use muse_cli::{exit, resolve, Cli, CliError, NeighborCap, RunArgs};
use clap::Parser;

fn muse(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_muse"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn toy(dir: &Path) -> PathBuf {
    // Two positive 6-cliques joined by 4 negative edges, plus a self-loop,
    // a zero weight, a duplicate and a conflicting pair.
    let mut text = String::from("# src,dst,rating,time\n");
    for c in 0..2 {
        for a in 0..6 {
            for b in a + 1..6 {
                text.push_str(&format!("{},{},{},0\n", c * 6 + a, c * 6 + b, 1 + (a + b) % 5));
            }
        }
    }
    for a in 0..4 {
        text.push_str(&format!("{a},{},-{},0\n", 6 + a, 1 + a));
    }
    text.push_str("3,3,5,0\n0,11,0,0\n1,0,2,0\n11,10,-3,0\n");
    let path = dir.join("toy.csv");
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ingest_toy_graph() {
    let tmp = tempfile::tempdir().unwrap();
    let input = toy(tmp.path());
    let out = tmp.path().join("ing");
    let o = muse(&["ingest", "--input", s(&input), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "nodes 12\nedges 34\npositive 29\nnegative 5\n");
    let summary: GraphSummary = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary, GraphSummary { nodes: 12, edges: 34, positive: 29, negative: 5 });
    let graph = fs::read_to_string(out.join("graph.csv")).unwrap();
    assert!(graph.contains("\n10,11,-1\n"), "negative wins on the conflicting pair");
    assert!(!graph.contains("\n0,11,"), "zero weight dropped");
    let idmap = fs::read_to_string(out.join("idmap.tsv")).unwrap();
    assert_eq!(idmap.lines().next(), Some("0\t0"));
    assert_eq!(idmap.lines().nth(11), Some("11\t11"));
}

#[test]
fn ingest_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let input = toy(tmp.path());
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    assert!(muse(&["ingest", "--input", s(&input), "--out", s(&a)]).status.success());
    assert!(muse(&["ingest", "--input", s(&input), "--out", s(&b)]).status.success());
    // Re-ingesting the canonical output reproduces it.
    assert!(muse(&["ingest", "--input", s(&a.join("graph.csv")), "--out", s(&c)]).status.success());
    for f in ["graph.csv", "idmap.tsv", "summary.json"] {
        let first = fs::read(a.join(f)).unwrap();
        assert_eq!(first, fs::read(b.join(f)).unwrap(), "{f}");
        assert_eq!(first, fs::read(c.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn parse_errors_report_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("bad.csv");
    fs::write(&input, "# header\n1,2,1\n2,3,abc\n").unwrap();
    let o = muse(&["ingest", "--input", s(&input), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(exit::PARSE));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");

    fs::write(&input, "1,2\n").unwrap();
    let o = muse(&["ingest", "--input", s(&input), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(exit::PARSE));
    assert!(String::from_utf8(o.stderr).unwrap().contains("line 1"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.csv");
    assert_eq!(muse(&["ingest", "--input", s(&missing)]).status.code(), Some(exit::IO));
    assert_eq!(muse(&["train", "--epochs", "many"]).status.code(), Some(exit::CONFIG));
    assert_eq!(muse(&["train", "--no-such-flag"]).status.code(), Some(exit::CONFIG));
    assert_eq!(muse(&["ingest"]).status.code(), Some(exit::CONFIG), "no input");
    assert_eq!(muse(&["--help"]).status.code(), Some(exit::OK));
    assert_eq!(muse(&["--version"]).status.code(), Some(exit::OK));
    assert_eq!(
        CliError::Training("x".into()).exit_code(),
        exit::TRAINING
    );
}

#[test]
fn config_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("run.conf");
    fs::write(&file, "# base\nfacets = 2\nlambda = 8\nneighbor-cap = none\nsplit_seed = 9\n").unwrap();
    let args = RunArgs { lambda: Some("2".into()), ..Default::default() };
    let cfg = resolve(Some(&file), &args).unwrap();
    assert_eq!(cfg.facets, 2, "file over default");
    assert_eq!(cfg.lambda, 2.0, "flag over file");
    assert_eq!(cfg.dim, 32, "default kept");
    assert_eq!(cfg.neighbor_cap, NeighborCap::None);
    assert_eq!((cfg.seed, cfg.split_seed()), (0, 9));

    fs::write(&file, "facets = 2\nwidth = 3\n").unwrap();
    let err = resolve(Some(&file), &RunArgs::default()).unwrap_err();
    assert_eq!(err.exit_code(), exit::CONFIG);
    assert!(err.to_string().contains("run.conf:2"), "{err}");

    let o = muse(&["--config", s(&file), "train"]);
    assert_eq!(o.status.code(), Some(exit::CONFIG));
}

fn train_args<'a>(input: &'a str, out: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![
        "muse", "train", "--input", input, "--out", out, "--facets", "2", "--dim", "4", "--epochs", "20", "--split", "0.7",
    ];
    v.extend_from_slice(extra);
    v
}

#[test]
fn train_then_evaluate_reproduces_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let input = toy(tmp.path());
    let out = tmp.path().join("run");
    let cli = Cli::try_parse_from(train_args(s(&input), s(&out), &["--seed", "3"])).unwrap();
    muse_cli::execute(&cli).unwrap();
    for f in ["graph.csv", "idmap.tsv", "split.tsv", "checkpoint.txt", "embeddings.txt", "report.json", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let manifest: RunManifest = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.seed, 3);
    assert_eq!(manifest.config.facets, 2);
    assert_eq!(manifest.graph.nodes, 12);
    assert_eq!(
        manifest.files["checkpoint.txt"],
        muse::trainer::sha256_hex(&fs::read(out.join("checkpoint.txt")).unwrap())
    );

    let o = muse(&["evaluate", "--run", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(o.stdout, fs::read(out.join("report.json")).unwrap());

    let o = muse(&[
        "evaluate",
        "--checkpoint",
        s(&out.join("checkpoint.txt")),
        "--graph",
        s(&out.join("graph.csv")),
        "--split",
        s(&out.join("split.tsv")),
    ]);
    assert!(o.status.success());
    assert_eq!(o.stdout, fs::read(out.join("report.json")).unwrap());

    // Same seed, same bytes.
    let again = tmp.path().join("again");
    muse_cli::execute(&Cli::try_parse_from(train_args(s(&input), s(&again), &["--seed", "3"])).unwrap()).unwrap();
    for f in ["checkpoint.txt", "embeddings.txt", "report.json", "split.tsv"] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn tampering_is_an_integrity_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let input = toy(tmp.path());
    let out = tmp.path().join("run");
    muse_cli::execute(&Cli::try_parse_from(train_args(s(&input), s(&out), &[])).unwrap()).unwrap();

    let ckpt = out.join("checkpoint.txt");
    let original = fs::read_to_string(&ckpt).unwrap();
    let tampered = original.replacen("\nvalue ", "\nvalue 1", 1);
    fs::write(&ckpt, tampered).unwrap();
    assert_eq!(muse(&["evaluate", "--run", s(&out)]).status.code(), Some(exit::INTEGRITY));
    fs::write(&ckpt, &original).unwrap();

    let graph = out.join("graph.csv");
    let g = fs::read_to_string(&graph).unwrap();
    fs::write(&graph, g.replacen(",1\n", ",-1\n", 1)).unwrap();
    assert_eq!(muse(&["evaluate", "--run", s(&out)]).status.code(), Some(exit::INTEGRITY));
    fs::write(&graph, &g).unwrap();
    assert!(muse(&["evaluate", "--run", s(&out)]).status.success());
}

#[test]
fn single_facet_first_order_run() {
    let tmp = tempfile::tempdir().unwrap();
    let input = toy(tmp.path());
    let out = tmp.path().join("run");
    let cli = Cli::try_parse_from(train_args(s(&input), s(&out), &["--facets", "1", "--orders", "1"])).unwrap();
    let stdout = muse_cli::execute(&cli).unwrap();
    assert!(stdout.contains("f1"));
    let emb = fs::read_to_string(out.join("embeddings.txt")).unwrap();
    assert_eq!(emb.lines().next(), Some("12 1 4"));
    assert!(muse(&["evaluate", "--run", s(&out)]).status.success());
}

#[test]
fn sweep_writes_one_run_per_point() {
    let tmp = tempfile::tempdir().unwrap();
    let input = toy(tmp.path());
    let out = tmp.path().join("sweep");
    let cli = Cli::try_parse_from(train_args(
        s(&input),
        s(&out),
        &["--lambda-grid", "1,2", "--facet-grid", "1..2", "--epochs", "5"],
    ))
    .unwrap();
    muse_cli::execute(&cli).unwrap();
    let entries: Vec<SweepEntry> = serde_json::from_slice(&fs::read(out.join("sweep.json")).unwrap()).unwrap();
    let dirs: Vec<&str> = entries.iter().map(|e| e.dir.as_str()).collect();
    assert_eq!(dirs, ["facets-1_lambda-1", "facets-1_lambda-2", "facets-2_lambda-1", "facets-2_lambda-2"]);
    for e in &entries {
        let report = commands::evaluate(&commands::EvalPaths::in_run(&out.join(&e.dir))).unwrap();
        assert_eq!(report, e.report);
    }
    // Every point shares one split.
    let first = fs::read(out.join(&entries[0].dir).join("split.tsv")).unwrap();
    for e in &entries[1..] {
        assert_eq!(first, fs::read(out.join(&e.dir).join("split.tsv")).unwrap());
    }
}

fn dataset(file: &str) -> Option<PathBuf> {
    let dir = std::env::var_os("MUSE_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"));
    let path = dir.join(file);
    if path.exists() {
        Some(path)
    } else {
        eprintln!("NOT RUN: dataset missing: {}", path.display());
        None
    }
}

#[test]
#[ignore = "needs soc-sign-bitcoinalpha.csv in MUSE_DATA_DIR"]
fn bitcoin_alpha_counts() {
    let Some(path) = dataset("soc-sign-bitcoinalpha.csv") else { return };
    let tmp = tempfile::tempdir().unwrap();
    let o = muse(&["ingest", "--input", s(&path), "--out", s(&tmp.path().join("o"))]);
    assert!(o.status.success());
    let summary: GraphSummary =
        serde_json::from_slice(&fs::read(tmp.path().join("o").join("summary.json")).unwrap()).unwrap();
    eprintln!("{summary:?}");
    assert_eq!(summary.nodes, 3775);
}
