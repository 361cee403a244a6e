//! Text checkpoint format, version 1.
//!
//! ```text
//! muse-checkpoint 1
//! scalar f64
//! model {"facets":3,...}
//! train {"epochs":300,...}
//! meta <key> <value>
//! epochs_done <n>
//! history <epoch> <total> <structure> <sign>
//! param <name> <rows> <cols> <step>
//! value <v_1> ... <v_rows·cols>
//! m <...>
//! v <...>
//! sha256 <hex digest of every preceding byte>
//! ```
//!
//! Numbers use Rust's shortest round-trip formatting, so a load restores
//! every value bit-for-bit. Parameter names contain no whitespace.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{EpochLoss, TrainConfig};
use crate::difftape::{Param, ParamStore, Tensor};
use crate::model::ModelConfig;
use crate::Scalar;

pub const CHECKPOINT_MAGIC: &str = "muse-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("unsupported checkpoint version {0}")]
    Version(String),
    #[error("checkpoint holds {found} values, expected {expected}")]
    Scalar { expected: &'static str, found: String },
    #[error("checkpoint integrity check failed: digest {found} does not match recorded {expected}")]
    Integrity { expected: String, found: String },
    #[error("checkpoint has no integrity digest")]
    MissingDigest,
}

/// Everything needed to resume training or re-run evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Free-form provenance such as input hashes.
    pub meta: BTreeMap<String, String>,
    pub epochs_done: usize,
    pub history: Vec<EpochLoss>,
    pub params: ParamStore<T>,
}

/// Lowercase hex SHA-256 of `data`.
pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

pub fn scalar_name<T: Scalar>() -> &'static str {
    match std::mem::size_of::<T>() {
        4 => "f32",
        _ => "f64",
    }
}

fn push_values<T: Scalar>(out: &mut String, tag: &str, t: &Tensor<T>) {
    out.push_str(tag);
    for x in t.data() {
        out.push(' ');
        out.push_str(&x.to_string());
    }
    out.push('\n');
}

impl<T: Scalar> Checkpoint<T> {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\n"));
        s.push_str(&format!("scalar {}\n", scalar_name::<T>()));
        s.push_str(&format!("model {}\n", serde_json::to_string(&self.model).expect("config serializes")));
        s.push_str(&format!("train {}\n", serde_json::to_string(&self.train).expect("config serializes")));
        for (k, v) in &self.meta {
            s.push_str(&format!("meta {k} {v}\n"));
        }
        s.push_str(&format!("epochs_done {}\n", self.epochs_done));
        for h in &self.history {
            s.push_str(&format!("history {} {} {} {}\n", h.epoch, h.total, h.structure, h.sign));
        }
        for (name, p) in self.params.iter() {
            let sh = p.value.shape();
            s.push_str(&format!("param {name} {} {} {}\n", sh.rows, sh.cols, p.step));
            push_values(&mut s, "value", &p.value);
            push_values(&mut s, "m", &p.m);
            push_values(&mut s, "v", &p.v);
        }
        let digest = sha256_hex(s.as_bytes());
        s.push_str(&format!("sha256 {digest}\n"));
        s
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), CheckpointError> {
        w.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self, CheckpointError> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self, CheckpointError> {
        let body_end = text.rfind("sha256 ").ok_or(CheckpointError::MissingDigest)?;
        let (body, tail) = text.split_at(body_end);
        let expected = tail["sha256 ".len()..].trim().to_owned();
        let found = sha256_hex(body.as_bytes());
        if expected != found {
            return Err(CheckpointError::Integrity { expected, found });
        }
        Parser::new(body).parse()
    }
}

struct Parser<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    line: usize,
}

impl<'a> Parser<'a> {
    fn new(body: &'a str) -> Self {
        Self {
            lines: body.lines().enumerate().peekable(),
            line: 0,
        }
    }

    fn err(&self, message: impl Into<String>) -> CheckpointError {
        CheckpointError::Format {
            line: self.line,
            message: message.into(),
        }
    }

    /// Next line split into its tag and the remainder.
    fn next(&mut self, tag: &str) -> Result<&'a str, CheckpointError> {
        let (i, l) = self.lines.next().ok_or_else(|| self.err(format!("expected `{tag}`, found end of file")))?;
        self.line = i + 1;
        let (head, rest) = l.split_once(' ').unwrap_or((l, ""));
        if head != tag {
            return Err(self.err(format!("expected `{tag}`, found `{head}`")));
        }
        Ok(rest)
    }

    fn peek_is(&mut self, tag: &str) -> bool {
        self.lines
            .peek()
            .is_some_and(|(_, l)| l.split_once(' ').map_or(*l, |(h, _)| h) == tag)
    }

    fn num<N: std::str::FromStr>(&self, s: &str) -> Result<N, CheckpointError> {
        s.parse().map_err(|_| self.err(format!("`{s}` is not a valid number")))
    }

    fn tensor<T: Scalar>(&mut self, tag: &str, rows: usize, cols: usize) -> Result<Tensor<T>, CheckpointError> {
        let rest = self.next(tag)?;
        let data = rest
            .split_whitespace()
            .map(|x| self.num::<T>(x))
            .collect::<Result<Vec<_>, _>>()?;
        Tensor::new(rows, cols, data).map_err(|e| self.err(e.to_string()))
    }

    fn parse<T: Scalar>(mut self) -> Result<Checkpoint<T>, CheckpointError> {
        let version = self.next(CHECKPOINT_MAGIC)?;
        if version.trim() != CHECKPOINT_VERSION.to_string() {
            return Err(CheckpointError::Version(version.trim().to_owned()));
        }
        let scalar = self.next("scalar")?.trim();
        if scalar != scalar_name::<T>() {
            return Err(CheckpointError::Scalar {
                expected: scalar_name::<T>(),
                found: scalar.to_owned(),
            });
        }
        let model_json = self.next("model")?;
        let model: ModelConfig = serde_json::from_str(model_json).map_err(|e| self.err(e.to_string()))?;
        let train_json = self.next("train")?;
        let train: TrainConfig = serde_json::from_str(train_json).map_err(|e| self.err(e.to_string()))?;
        let mut meta = BTreeMap::new();
        while self.peek_is("meta") {
            let rest = self.next("meta")?;
            let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
            meta.insert(k.to_owned(), v.to_owned());
        }
        let epochs_done = self.next("epochs_done")?.trim();
        let epochs_done = self.num(epochs_done)?;
        let mut history = Vec::new();
        while self.peek_is("history") {
            let rest = self.next("history")?;
            let f: Vec<&str> = rest.split_whitespace().collect();
            let [epoch, total, structure, sign] = f[..] else {
                return Err(self.err("history needs 4 fields"));
            };
            history.push(EpochLoss {
                epoch: self.num(epoch)?,
                total: self.num(total)?,
                structure: self.num(structure)?,
                sign: self.num(sign)?,
            });
        }
        let mut params = ParamStore::new();
        while self.peek_is("param") {
            let rest = self.next("param")?;
            let f: Vec<&str> = rest.split_whitespace().collect();
            let [name, rows, cols, step] = f[..] else {
                return Err(self.err("param needs name, rows, cols, step"));
            };
            let (rows, cols): (usize, usize) = (self.num(rows)?, self.num(cols)?);
            let step = self.num(step)?;
            let value = self.tensor("value", rows, cols)?;
            let m = self.tensor("m", rows, cols)?;
            let v = self.tensor("v", rows, cols)?;
            params.insert_param(
                name,
                Param {
                    grad: Tensor::zeros(rows, cols),
                    value,
                    m,
                    v,
                    step,
                },
            );
        }
        if let Some((i, l)) = self.lines.next() {
            self.line = i + 1;
            return Err(self.err(format!("unexpected `{l}`")));
        }
        Ok(Checkpoint {
            model,
            train,
            meta,
            epochs_done,
            history,
            params,
        })
    }
}
