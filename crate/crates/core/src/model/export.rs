use std::io::{BufRead, Write};

use super::ModelError;
use crate::difftape::Tensor;
use crate::sgraph::IdMap;
use crate::Scalar;

/// Header `n M D`, then `raw_id v_1 … v_{M·D}` per node with 17 significant
/// digits.
pub fn write_embeddings<T: Scalar, W: Write>(
    mut w: W,
    ids: &IdMap,
    embeddings: &Tensor<T>,
    facets: usize,
    facet_dim: usize,
) -> std::io::Result<()> {
    assert_eq!(embeddings.rows(), ids.len(), "one embedding row per node");
    assert_eq!(embeddings.cols(), facets * facet_dim, "row width is M·D");
    writeln!(w, "{} {} {}", ids.len(), facets, facet_dim)?;
    let mut line = String::new();
    for (i, raw) in ids.raw_ids().iter().enumerate() {
        line.clear();
        line.push_str(raw);
        for &x in embeddings.row(i) {
            line.push(' ');
            line.push_str(&format!("{:.16e}", x.as_f64()));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Parsed embedding file: raw ids in file order and the value table.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingFile {
    pub facets: usize,
    pub facet_dim: usize,
    pub raw_ids: Vec<String>,
    pub values: Tensor<f64>,
}

pub fn read_embeddings<R: BufRead>(r: R) -> Result<EmbeddingFile, ModelError> {
    let mut lines = r.lines();
    let bad = |msg: String| ModelError::Format(msg);
    let header = lines.next().ok_or_else(|| bad("empty embedding file".into()))??;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|e| bad(format!("header `{header}`: {e}")))?;
    let [n, facets, facet_dim] = dims[..] else {
        return Err(bad(format!("header `{header}` must be `n M D`")));
    };
    let width = facets * facet_dim;
    let mut raw_ids = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * width);
    for line in lines {
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(id) = fields.next() else { continue };
        raw_ids.push(id.to_owned());
        let before = data.len();
        for f in fields {
            data.push(f.parse::<f64>().map_err(|e| bad(format!("node {id}: {e}")))?);
        }
        if data.len() - before != width {
            return Err(bad(format!("node {id}: expected {width} values")));
        }
    }
    if raw_ids.len() != n {
        return Err(bad(format!("header promises {n} nodes, found {}", raw_ids.len())));
    }
    Ok(EmbeddingFile {
        facets,
        facet_dim,
        raw_ids,
        values: Tensor::new(n, width, data)?,
    })
}
