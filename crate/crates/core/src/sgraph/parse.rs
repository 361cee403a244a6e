use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::GraphError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Delimiter {
    Comma,
    Whitespace,
}

impl FromStr for Delimiter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "comma" | "," => Ok(Self::Comma),
            "whitespace" | "ws" | "tab" | "space" => Ok(Self::Whitespace),
            other => Err(format!("unknown delimiter `{other}` (expected comma or whitespace)")),
        }
    }
}

/// Which columns of a delimited edge list hold source, target and weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeFormat {
    pub src_col: usize,
    pub dst_col: usize,
    pub weight_col: usize,
    pub delimiter: Delimiter,
}

impl Default for EdgeFormat {
    /// SNAP signed-network CSV layout: `SOURCE,TARGET,RATING,TIME`.
    fn default() -> Self {
        Self {
            src_col: 0,
            dst_col: 1,
            weight_col: 2,
            delimiter: Delimiter::Comma,
        }
    }
}

impl EdgeFormat {
    /// Parses `"src,dst,weight"` column indices, e.g. `0,1,2`.
    pub fn with_columns(mut self, spec: &str) -> Result<Self, String> {
        let cols: Vec<usize> = spec
            .split(',')
            .map(|c| c.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("bad column list `{spec}`: {e}"))?;
        let [src, dst, weight] = cols[..] else {
            return Err(format!("column list `{spec}` must name exactly 3 columns"));
        };
        self.src_col = src;
        self.dst_col = dst;
        self.weight_col = weight;
        Ok(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawRecord {
    pub src: String,
    pub dst: String,
    pub weight: f64,
}

/// Reads one record per data line. Blank lines and lines starting with
/// `#` or `%` are skipped; line numbers in errors are 1-based.
pub fn parse_edge_list<R: BufRead>(reader: R, format: &EdgeFormat) -> Result<Vec<RawRecord>, GraphError> {
    let needed = format.src_col.max(format.dst_col).max(format.weight_col);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = match format.delimiter {
            Delimiter::Comma => trimmed.split(',').map(str::trim).collect(),
            Delimiter::Whitespace => trimmed.split_whitespace().collect(),
        };
        if fields.len() <= needed {
            return Err(GraphError::MissingColumn {
                line: line_no,
                column: needed,
                found: fields.len(),
            });
        }
        let src = fields[format.src_col];
        let dst = fields[format.dst_col];
        if src.is_empty() || dst.is_empty() {
            return Err(GraphError::Parse {
                line: line_no,
                message: "empty node id".into(),
            });
        }
        let weight: f64 = fields[format.weight_col].parse().map_err(|e| GraphError::Parse {
            line: line_no,
            message: format!("weight `{}`: {e}", fields[format.weight_col]),
        })?;
        if !weight.is_finite() {
            return Err(GraphError::Parse {
                line: line_no,
                message: format!("non-finite weight `{}`", fields[format.weight_col]),
            });
        }
        records.push(RawRecord {
            src: src.to_owned(),
            dst: dst.to_owned(),
            weight,
        });
    }
    Ok(records)
}
