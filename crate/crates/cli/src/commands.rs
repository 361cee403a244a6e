//! Subcommand implementations: ingest, train (single run or sweep) and
//! evaluate.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use muse::metrics::EvalReport;
use muse::model::{write_embeddings, ModelConfig, Muse};
use muse::sgraph::{
    build_graph, higher_order_neighbor_sets, parse_edge_list, read_split_manifest, split_edges,
    write_canonical_edges, write_id_map, write_split_manifest, EdgeFormat, EdgeSplit, GraphError,
    NeighborSets, SignedGraph, SplitManifest,
};
use muse::trainer::{init_params, sha256_hex, Checkpoint, CheckpointError, EpochLoss, Trainer};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

pub const GRAPH_FILE: &str = "graph.csv";
pub const IDMAP_FILE: &str = "idmap.tsv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SPLIT_FILE: &str = "split.tsv";
pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const EMBEDDINGS_FILE: &str = "embeddings.txt";
pub const REPORT_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SWEEP_FILE: &str = "sweep.json";

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const GIT_DESCRIBE: &str = env!("MUSE_GIT_DESCRIBE");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub nodes: usize,
    pub edges: usize,
    pub positive: usize,
    pub negative: usize,
}

impl GraphSummary {
    pub fn of(g: &SignedGraph) -> Self {
        Self {
            nodes: g.n(),
            edges: g.n_edges(),
            positive: g.n_positive(),
            negative: g.n_negative(),
        }
    }
}

/// Provenance record written next to every trained run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub git: String,
    pub config: RunConfig,
    pub model: ModelConfig,
    pub seed: u64,
    pub split_seed: u64,
    pub wall_seconds: f64,
    pub graph: GraphSummary,
    /// File name → SHA-256 of its bytes.
    pub files: BTreeMap<String, String>,
    pub final_loss: Option<EpochLoss>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub dir: String,
    pub facets: usize,
    pub lambda: f64,
    pub report: EvalReport,
}

fn graph_err(path: &Path, e: GraphError) -> CliError {
    match e {
        GraphError::Io(source) => CliError::Io { path: path.to_owned(), source },
        other => CliError::parse(path, other),
    }
}

fn checkpoint_err(path: &Path, e: CheckpointError) -> CliError {
    match e {
        CheckpointError::Io(source) => CliError::Io { path: path.to_owned(), source },
        CheckpointError::Integrity { .. } | CheckpointError::MissingDigest => {
            CliError::Integrity(format!("{}: {e}", path.display()))
        }
        other => CliError::parse(path, other),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(CliError::io(path))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<String, CliError> {
    fs::write(path, bytes).map_err(CliError::io(path))?;
    Ok(sha256_hex(bytes))
}

fn to_json<S: Serialize>(value: &S) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

/// Parses an edge list and builds the symmetrized graph.
pub fn load_graph(path: &Path, format: &EdgeFormat, cfg: &RunConfig) -> Result<SignedGraph, CliError> {
    let file = fs::File::open(path).map_err(CliError::io(path))?;
    let records = parse_edge_list(BufReader::new(file), format).map_err(|e| graph_err(path, e))?;
    let g = build_graph(&records, cfg.conflict).map_err(|e| graph_err(path, e))?;
    log::info!(
        "{}: {} records -> {} nodes, {} edges ({} positive, {} negative)",
        path.display(),
        records.len(),
        g.n(),
        g.n_edges(),
        g.n_positive(),
        g.n_negative()
    );
    Ok(g)
}

fn input(cfg: &RunConfig) -> Result<&Path, CliError> {
    cfg.input
        .as_deref()
        .ok_or_else(|| CliError::Config("no input edge list (pass --input or set `input`)".into()))
}

fn canonical_bytes(g: &SignedGraph) -> (Vec<u8>, Vec<u8>) {
    let mut edges = Vec::new();
    write_canonical_edges(&mut edges, g).expect("write to memory");
    let mut ids = Vec::new();
    write_id_map(&mut ids, g.ids()).expect("write to memory");
    (edges, ids)
}

/// Writes the canonical edge list, id map and summary into `cfg.out`.
pub fn ingest(cfg: &RunConfig) -> Result<GraphSummary, CliError> {
    let path = input(cfg)?;
    let g = load_graph(path, &cfg.edge_format(), cfg)?;
    create_dir(&cfg.out)?;
    let (edges, ids) = canonical_bytes(&g);
    write_file(&cfg.out.join(GRAPH_FILE), &edges)?;
    write_file(&cfg.out.join(IDMAP_FILE), &ids)?;
    let summary = GraphSummary::of(&g);
    write_file(&cfg.out.join(SUMMARY_FILE), &to_json(&summary))?;
    Ok(summary)
}

/// Neighbor sets over the training edges only.
pub fn train_neighbor_sets(
    g: &SignedGraph,
    split: &EdgeSplit,
    model: &ModelConfig,
    seed: u64,
) -> Result<NeighborSets, CliError> {
    let train_graph = g.with_edges(&split.train);
    higher_order_neighbor_sets(&train_graph, model.orders, model.neighbor_cap, seed)
        .map_err(|e| CliError::Config(e.to_string()))
}

struct Prepared {
    graph: SignedGraph,
    split: EdgeSplit,
    /// File name → (bytes, digest) of the shared inputs.
    files: BTreeMap<String, (Vec<u8>, String)>,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    cfg.validate()?;
    let path = input(cfg)?;
    let graph = load_graph(path, &cfg.edge_format(), cfg)?;
    let split = split_edges(&graph, cfg.split, cfg.split_seed()).map_err(|e| graph_err(path, e))?;
    log::info!("split: {} train, {} test edges", split.train.len(), split.test.len());
    let (edges, ids) = canonical_bytes(&graph);
    let mut manifest = Vec::new();
    write_split_manifest(&mut manifest, &SplitManifest::from_split(&split, cfg.split, graph.ids()))
        .expect("write to memory");
    let files = [(GRAPH_FILE, edges), (IDMAP_FILE, ids), (SPLIT_FILE, manifest)]
        .into_iter()
        .map(|(name, bytes)| {
            let digest = sha256_hex(&bytes);
            (name.to_owned(), (bytes, digest))
        })
        .collect();
    Ok(Prepared { graph, split, files })
}

/// Result of one training run.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub dir: PathBuf,
    pub report: EvalReport,
    pub manifest: RunManifest,
}

fn run_one(cfg: &RunConfig, prep: &Prepared, dir: &Path) -> Result<RunResult, CliError> {
    let start = Instant::now();
    create_dir(dir)?;
    let mut files = BTreeMap::new();
    for (name, (bytes, _)) in &prep.files {
        files.insert(name.clone(), write_file(&dir.join(name), bytes)?);
    }

    let model_cfg = cfg.model_config(prep.graph.n());
    let train_cfg = cfg.train_config();
    let sets = train_neighbor_sets(&prep.graph, &prep.split, &model_cfg, cfg.seed)?;
    let model = Muse::<f64>::new(model_cfg.clone(), &sets).map_err(|e| CliError::Config(e.to_string()))?;
    let store = init_params(prep.graph.ids(), &model_cfg, cfg.seed);
    let mut trainer = Trainer::new(model, store, prep.split.train.clone(), train_cfg)
        .map_err(|e| CliError::Training(e.to_string()))?;
    log::info!(
        "training {} epochs, M={} D={} L={} lambda={} ({})",
        cfg.epochs,
        cfg.facets,
        cfg.dim,
        cfg.orders,
        cfg.lambda,
        dir.display()
    );
    trainer.run().map_err(|e| CliError::Training(e.to_string()))?;

    let meta = BTreeMap::from([
        ("graph_sha256".to_owned(), prep.files[GRAPH_FILE].1.clone()),
        ("split_sha256".to_owned(), prep.files[SPLIT_FILE].1.clone()),
        ("neighbor_seed".to_owned(), cfg.seed.to_string()),
    ]);
    let ckpt = trainer.checkpoint(meta);
    files.insert(CHECKPOINT_FILE.to_owned(), write_file(&dir.join(CHECKPOINT_FILE), ckpt.to_text().as_bytes())?);

    let final_loss = trainer.history().last().copied();
    let out = trainer.finish().map_err(|e| CliError::Training(e.to_string()))?;
    let mut emb = Vec::new();
    write_embeddings(&mut emb, prep.graph.ids(), &out.embeddings, model_cfg.facets, model_cfg.facet_dim)
        .expect("write to memory");
    files.insert(EMBEDDINGS_FILE.to_owned(), write_file(&dir.join(EMBEDDINGS_FILE), &emb)?);

    let report = muse::evaluate_edges(&out.params, &out.embeddings, &prep.split.test)
        .map_err(|e| CliError::Training(e.to_string()))?;
    files.insert(REPORT_FILE.to_owned(), write_file(&dir.join(REPORT_FILE), &to_json(&report))?);
    log::info!("test F1 {:.4}, AUC {:.4} on {} edges", report.f1, report.auc, report.n_test);

    let manifest = RunManifest {
        version: VERSION.to_owned(),
        git: GIT_DESCRIBE.to_owned(),
        config: cfg.clone(),
        model: model_cfg,
        seed: cfg.seed,
        split_seed: cfg.split_seed(),
        wall_seconds: start.elapsed().as_secs_f64(),
        graph: GraphSummary::of(&prep.graph),
        files,
        final_loss,
    };
    write_file(&dir.join(MANIFEST_FILE), &to_json(&manifest))?;
    Ok(RunResult { dir: dir.to_owned(), report, manifest })
}

/// Trains once, or once per grid point when a sweep grid is configured.
pub fn train(cfg: &RunConfig) -> Result<Vec<RunResult>, CliError> {
    let prep = prepare(cfg)?;
    if cfg.lambda_grid.is_none() && cfg.facet_grid.is_none() {
        return Ok(vec![run_one(cfg, &prep, &cfg.out)?]);
    }
    let lambdas = cfg.lambda_grid.clone().unwrap_or_else(|| vec![cfg.lambda]);
    let facets: Vec<Option<usize>> = match &cfg.facet_grid {
        Some(grid) => grid.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    let mut results = Vec::new();
    let mut entries = Vec::new();
    for m in &facets {
        for &lambda in &lambdas {
            let mut point = cfg.clone();
            point.lambda_grid = None;
            point.facet_grid = None;
            point.lambda = lambda;
            let name = match m {
                Some(m) => {
                    point.facets = *m;
                    format!("facets-{m}_lambda-{lambda}")
                }
                None => format!("lambda-{lambda}"),
            };
            point.out = cfg.out.join(&name);
            point.validate()?;
            let result = run_one(&point, &prep, &point.out)?;
            entries.push(SweepEntry {
                dir: name,
                facets: point.facets,
                lambda,
                report: result.report.clone(),
            });
            results.push(result);
        }
    }
    create_dir(&cfg.out)?;
    write_file(&cfg.out.join(SWEEP_FILE), &to_json(&entries))?;
    Ok(results)
}

/// Paths consumed by [`evaluate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalPaths {
    pub checkpoint: PathBuf,
    pub graph: PathBuf,
    pub split: PathBuf,
    /// When present, recorded file hashes are verified too.
    pub manifest: Option<PathBuf>,
}

impl EvalPaths {
    pub fn in_run(dir: &Path) -> Self {
        let manifest = dir.join(MANIFEST_FILE);
        Self {
            checkpoint: dir.join(CHECKPOINT_FILE),
            graph: dir.join(GRAPH_FILE),
            split: dir.join(SPLIT_FILE),
            manifest: manifest.exists().then_some(manifest),
        }
    }
}

fn verify(what: &str, path: &Path, bytes: &[u8], expected: Option<&String>) -> Result<(), CliError> {
    match expected {
        Some(want) if *want != sha256_hex(bytes) => Err(CliError::Integrity(format!(
            "{what} {} does not match the recorded SHA-256",
            path.display()
        ))),
        _ => Ok(()),
    }
}

/// Recomputes the held-out report from a checkpoint, the canonical graph
/// and the split manifest.
pub fn evaluate(paths: &EvalPaths) -> Result<EvalReport, CliError> {
    let ckpt_bytes = read_bytes(&paths.checkpoint)?;
    let ckpt_text = String::from_utf8(ckpt_bytes.clone())
        .map_err(|_| CliError::parse(&paths.checkpoint, "not UTF-8"))?;
    let ckpt = Checkpoint::<f64>::from_text(&ckpt_text).map_err(|e| checkpoint_err(&paths.checkpoint, e))?;
    let graph_bytes = read_bytes(&paths.graph)?;
    let split_bytes = read_bytes(&paths.split)?;

    if let Some(mpath) = &paths.manifest {
        let manifest: RunManifest = serde_json::from_slice(&read_bytes(mpath)?)
            .map_err(|e| CliError::parse(mpath, e))?;
        verify("checkpoint", &paths.checkpoint, &ckpt_bytes, manifest.files.get(CHECKPOINT_FILE))?;
        verify("graph", &paths.graph, &graph_bytes, manifest.files.get(GRAPH_FILE))?;
        verify("split", &paths.split, &split_bytes, manifest.files.get(SPLIT_FILE))?;
    }
    verify("graph", &paths.graph, &graph_bytes, ckpt.meta.get("graph_sha256"))?;
    verify("split", &paths.split, &split_bytes, ckpt.meta.get("split_sha256"))?;

    let records = parse_edge_list(&graph_bytes[..], &EdgeFormat::default()).map_err(|e| graph_err(&paths.graph, e))?;
    let graph = build_graph(&records, Default::default()).map_err(|e| graph_err(&paths.graph, e))?;
    let manifest = read_split_manifest(&split_bytes[..]).map_err(|e| graph_err(&paths.split, e))?;
    let split = manifest.to_split(&graph).map_err(|e| graph_err(&paths.split, e))?;

    let seed = match ckpt.meta.get("neighbor_seed") {
        Some(s) => s
            .parse()
            .map_err(|_| CliError::parse(&paths.checkpoint, format!("bad neighbor_seed `{s}`")))?,
        None => ckpt.train.seed,
    };
    let sets = train_neighbor_sets(&graph, &split, &ckpt.model, seed)?;
    let model = Muse::<f64>::new(ckpt.model.clone(), &sets).map_err(|e| CliError::Config(e.to_string()))?;
    let embeddings = model
        .embed(&ckpt.params)
        .map_err(|e| CliError::Integrity(format!("checkpoint does not fit the graph: {e}")))?;
    muse::evaluate_edges(&ckpt.params, &embeddings, &split.test).map_err(|e| CliError::Training(e.to_string()))
}

/// Pretty JSON with a trailing newline.
pub fn report_json(report: &EvalReport) -> String {
    String::from_utf8(to_json(report)).expect("JSON is UTF-8")
}

pub fn write_report(path: &Path, report: &EvalReport) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(CliError::io(path))?;
    let mut w = BufWriter::new(file);
    w.write_all(report_json(report).as_bytes()).map_err(CliError::io(path))?;
    w.flush().map_err(CliError::io(path))
}
