use std::collections::HashSet;
use std::io::{BufRead, Write};

use super::{EdgeSplit, GraphError, IdMap, Sign, SignedEdge, SignedGraph};

const SPLIT_MAGIC: &str = "# muse split manifest v1";

/// One `raw_id<TAB>dense_id` line per node.
pub fn write_id_map<W: Write>(mut w: W, ids: &IdMap) -> std::io::Result<()> {
    for (dense, raw) in ids.raw_ids().iter().enumerate() {
        writeln!(w, "{raw}\t{dense}")?;
    }
    Ok(())
}

/// `raw_src,raw_dst,sign` per unordered pair, in dense-id order. Re-parsing
/// with the default comma format rebuilds the same graph.
pub fn write_canonical_edges<W: Write>(mut w: W, g: &SignedGraph) -> std::io::Result<()> {
    writeln!(w, "# src,dst,sign")?;
    for e in g.edges() {
        writeln!(w, "{},{},{}", g.ids().raw(e.src), g.ids().raw(e.dst), e.sign)?;
    }
    Ok(())
}

/// Held-out edges of a split, keyed by raw ids.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitManifest {
    pub seed: u64,
    pub train_fraction: f64,
    pub test: Vec<(String, String, Sign)>,
}

impl SplitManifest {
    pub fn from_split(split: &EdgeSplit, train_fraction: f64, ids: &IdMap) -> Self {
        let test = split
            .test
            .iter()
            .map(|e| (ids.raw(e.src).to_owned(), ids.raw(e.dst).to_owned(), e.sign))
            .collect();
        Self { seed: split.seed, train_fraction, test }
    }

    /// Rebuilds the split against `g`: listed edges are the test set,
    /// every other edge of `g` is training data.
    pub fn to_split(&self, g: &SignedGraph) -> Result<EdgeSplit, GraphError> {
        let ids = g.ids();
        let mut test = Vec::with_capacity(self.test.len());
        for (a, b, sign) in &self.test {
            let ia = ids.dense(a).ok_or_else(|| GraphError::UnknownNode(a.clone()))?;
            let ib = ids.dense(b).ok_or_else(|| GraphError::UnknownNode(b.clone()))?;
            if g.sign(ia, ib) != Some(*sign) {
                return Err(GraphError::UnknownEdge(a.clone(), b.clone()));
            }
            test.push(SignedEdge::new(ia, ib, *sign).canonical());
        }
        test.sort_unstable();
        let held: HashSet<(usize, usize)> = test.iter().map(|e| (e.src, e.dst)).collect();
        let train = g
            .edges()
            .into_iter()
            .filter(|e| !held.contains(&(e.src, e.dst)))
            .collect();
        Ok(EdgeSplit { train, test, seed: self.seed })
    }
}

pub fn write_split_manifest<W: Write>(mut w: W, manifest: &SplitManifest) -> std::io::Result<()> {
    writeln!(w, "{SPLIT_MAGIC}")?;
    writeln!(w, "# seed={}", manifest.seed)?;
    writeln!(w, "# train_fraction={}", manifest.train_fraction)?;
    writeln!(w, "# n_test={}", manifest.test.len())?;
    for (a, b, s) in &manifest.test {
        writeln!(w, "{a}\t{b}\t{s}")?;
    }
    Ok(())
}

pub fn read_split_manifest<R: BufRead>(r: R) -> Result<SplitManifest, GraphError> {
    let mut seed = None;
    let mut fraction = None;
    let mut test = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let parse_err = |message: String| GraphError::Parse { line: line_no, message };
        if line_no == 1 {
            if line.trim() != SPLIT_MAGIC {
                return Err(parse_err("not a split manifest".into()));
            }
            continue;
        }
        if let Some(header) = line.strip_prefix("# ") {
            if let Some((key, value)) = header.split_once('=') {
                match key {
                    "seed" => seed = Some(value.parse().map_err(|e| parse_err(format!("seed: {e}")))?),
                    "train_fraction" => {
                        fraction = Some(value.parse().map_err(|e| parse_err(format!("train_fraction: {e}")))?)
                    }
                    _ => {}
                }
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [a, b, s] = fields[..] else {
            return Err(parse_err(format!("expected 3 tab-separated fields, got {}", fields.len())));
        };
        test.push((a.to_owned(), b.to_owned(), s.parse().map_err(parse_err)?));
    }
    Ok(SplitManifest {
        seed: seed.ok_or_else(|| GraphError::Parse { line: 0, message: "missing seed".into() })?,
        train_fraction: fraction
            .ok_or_else(|| GraphError::Parse { line: 0, message: "missing train_fraction".into() })?,
        test,
    })
}
