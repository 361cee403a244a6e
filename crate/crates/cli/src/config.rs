//! Run configuration: defaults, then a `key = value` file, then flags.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use muse::model::{AttentionKernel, ModelConfig};
use muse::objective::ObjectiveConfig;
use muse::sgraph::{ConflictPolicy, Delimiter, EdgeFormat};
use muse::trainer::{AdamConfig, TrainConfig, UpdateGranularity};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Neighbor-set size limit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborCap {
    /// Uncapped up to 10,000 nodes, 50 per set beyond.
    #[default]
    Auto,
    None,
    Fixed(usize),
}

impl FromStr for NeighborCap {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(Self::Auto),
            "none" => Ok(Self::None),
            n => match n.parse::<usize>() {
                Ok(0) => Err("neighbor cap must be at least 1".into()),
                Ok(k) => Ok(Self::Fixed(k)),
                Err(_) => Err(format!("neighbor cap `{n}`: expected auto, none or a positive integer")),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub format_cols: String,
    pub delimiter: Delimiter,
    pub conflict: ConflictPolicy,
    pub facets: usize,
    pub dim: usize,
    pub orders: usize,
    pub leaky_slope: f64,
    pub neighbor_cap: NeighborCap,
    pub share_attention: bool,
    pub kernel: AttentionKernel,
    pub lambda: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    pub batch_edges: Option<usize>,
    pub granularity: UpdateGranularity,
    pub seed: u64,
    /// Train fraction of the stratified split.
    pub split: f64,
    /// Defaults to `seed`.
    pub split_seed: Option<u64>,
    pub lambda_grid: Option<Vec<f64>>,
    pub facet_grid: Option<Vec<usize>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        let train = TrainConfig::default();
        Self {
            input: None,
            out: PathBuf::from("muse-run"),
            format_cols: "0,1,2".into(),
            delimiter: Delimiter::Comma,
            conflict: ConflictPolicy::NegativeWins,
            facets: model.facets,
            dim: model.facet_dim,
            orders: model.orders,
            leaky_slope: model.leaky_slope,
            neighbor_cap: NeighborCap::Auto,
            share_attention: model.share_attention,
            kernel: model.kernel,
            lambda: train.objective.lambda,
            lr: train.adam.learning_rate,
            beta1: train.adam.beta1,
            beta2: train.adam.beta2,
            eps: train.adam.eps,
            epochs: train.epochs,
            batch_edges: None,
            granularity: train.granularity,
            seed: 0,
            split: 0.8,
            split_seed: None,
            lambda_grid: None,
            facet_grid: None,
        }
    }
}

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T, CliError>
where
    T::Err: Display,
{
    raw.parse().map_err(|e| CliError::Config(format!("{key} = `{raw}`: {e}")))
}

fn flag(key: &str, raw: &str) -> Result<bool, CliError> {
    match raw {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(CliError::Config(format!("{key} = `{raw}`: expected true or false"))),
    }
}

/// `a..b` (inclusive, step 1) or a comma list.
pub fn parse_grid<T>(key: &str, raw: &str) -> Result<Vec<T>, CliError>
where
    T: FromStr + Copy,
    T::Err: Display,
{
    let raw = raw.trim();
    let values: Vec<T> = if let Some((lo, hi)) = raw.split_once("..") {
        let (lo, hi): (u64, u64) = (value(key, lo.trim())?, value(key, hi.trim())?);
        if lo > hi {
            return Err(CliError::Config(format!("{key}: empty range `{raw}`")));
        }
        (lo..=hi).map(|k| value(key, &k.to_string())).collect::<Result<_, _>>()?
    } else {
        raw.split(',').map(|v| value(key, v.trim())).collect::<Result<_, _>>()?
    };
    if values.is_empty() {
        return Err(CliError::Config(format!("{key}: empty grid")));
    }
    Ok(values)
}

impl RunConfig {
    /// Sets one option from its textual form. Keys accept `-` or `_`.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), CliError> {
        let raw = raw.trim();
        match key.replace('-', "_").as_str() {
            "input" => self.input = Some(PathBuf::from(raw)),
            "out" => self.out = PathBuf::from(raw),
            "format_cols" => {
                EdgeFormat::default().with_columns(raw).map_err(CliError::Config)?;
                self.format_cols = raw.to_owned();
            }
            "delimiter" => self.delimiter = value(key, raw)?,
            "conflict" => self.conflict = value(key, raw)?,
            "facets" => self.facets = value(key, raw)?,
            "dim" => self.dim = value(key, raw)?,
            "orders" => self.orders = value(key, raw)?,
            "leaky_slope" => self.leaky_slope = value(key, raw)?,
            "neighbor_cap" => self.neighbor_cap = value(key, raw)?,
            "share_attention" => self.share_attention = flag(key, raw)?,
            "kernel" => self.kernel = value(key, raw)?,
            "lambda" => self.lambda = value(key, raw)?,
            "lr" => self.lr = value(key, raw)?,
            "beta1" => self.beta1 = value(key, raw)?,
            "beta2" => self.beta2 = value(key, raw)?,
            "eps" => self.eps = value(key, raw)?,
            "epochs" => self.epochs = value(key, raw)?,
            "batch_edges" => {
                self.batch_edges = match raw {
                    "auto" => None,
                    n => Some(value(key, n)?),
                }
            }
            "granularity" | "update_granularity" => self.granularity = value(key, raw)?,
            "seed" => self.seed = value(key, raw)?,
            "split" => self.split = value(key, raw)?,
            "split_seed" => self.split_seed = Some(value(key, raw)?),
            "lambda_grid" => self.lambda_grid = Some(parse_grid(key, raw)?),
            "facet_grid" => self.facet_grid = Some(parse_grid(key, raw)?),
            other => return Err(CliError::Config(format!("unknown option `{other}`"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file; `#` starts a comment.
    pub fn apply_file_text(&mut self, text: &str, path: &Path) -> Result<(), CliError> {
        for (idx, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, raw) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("{}:{}: expected `key = value`", path.display(), idx + 1))
            })?;
            self.set(key.trim(), raw).map_err(|e| match e {
                CliError::Config(m) => CliError::Config(format!("{}:{}: {m}", path.display(), idx + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn edge_format(&self) -> EdgeFormat {
        EdgeFormat { delimiter: self.delimiter, ..EdgeFormat::default() }
            .with_columns(&self.format_cols)
            .expect("validated in set")
    }

    pub fn split_seed(&self) -> u64 {
        self.split_seed.unwrap_or(self.seed)
    }

    /// Model config with the cap resolved for an `n`-node graph.
    pub fn model_config(&self, n: usize) -> ModelConfig {
        let neighbor_cap = match self.neighbor_cap {
            NeighborCap::Auto => muse::sgraph::default_neighbor_cap(n),
            NeighborCap::None => None,
            NeighborCap::Fixed(k) => Some(k),
        };
        ModelConfig {
            facets: self.facets,
            facet_dim: self.dim,
            orders: self.orders,
            leaky_slope: self.leaky_slope,
            neighbor_cap,
            share_attention: self.share_attention,
            kernel: self.kernel,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            adam: AdamConfig {
                learning_rate: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
            },
            objective: ObjectiveConfig { lambda: self.lambda },
            batch_edges: self.batch_edges,
            seed: self.seed,
            granularity: self.granularity,
        }
    }

    /// Checks every numeric range before any work starts.
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(CliError::Config(format!("split {} not in (0, 1)", self.split)));
        }
        self.model_config(0).validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.train_config().validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(grid) = &self.lambda_grid {
            if grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
                return Err(CliError::Config("lambda grid values must be non-negative".into()));
            }
        }
        if let Some(grid) = &self.facet_grid {
            if grid.contains(&0) {
                return Err(CliError::Config("facet grid values must be at least 1".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let mut cfg = RunConfig::default();
        cfg.apply_file_text("# comment\nfacets = 2\nlambda=8 # trailing\n\nneighbor-cap = 20\n", Path::new("x.conf"))
            .unwrap();
        cfg.set("lambda", "1").unwrap();
        assert_eq!((cfg.facets, cfg.lambda, cfg.neighbor_cap), (2, 1.0, NeighborCap::Fixed(20)));
        assert_eq!(cfg.dim, 32);
    }

    #[test]
    fn errors_name_the_line() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply_file_text("facets = 2\nbogus = 1\n", Path::new("x.conf")).unwrap_err();
        assert!(err.to_string().contains("x.conf:2"), "{err}");
        assert!(cfg.set("epochs", "many").is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid::<f64>("g", "1..4").unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(parse_grid::<f64>("g", "1, 2,4,8").unwrap(), vec![1.0, 2.0, 4.0, 8.0]);
        assert_eq!(parse_grid::<usize>("g", "1..3").unwrap(), vec![1, 2, 3]);
        assert!(parse_grid::<f64>("g", "4..1").is_err());
    }

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
        let mut bad = RunConfig::default();
        bad.set("split", "1.0").unwrap();
        assert!(bad.validate().is_err());
    }
}
