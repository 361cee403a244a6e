//! Adam training of the encoder and sign predictor, with bit-exact
//! checkpoint/resume.

mod adam;
mod checkpoint;

pub use adam::{adam_step, AdamConfig};
pub use checkpoint::{scalar_name, sha256_hex, Checkpoint, CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::difftape::{ParamStore, Tape, TapeError, Tensor};
use crate::model::{init_model_params, ModelConfig, ModelError, Muse};
use crate::objective::{init_predictor, objective_var, ObjectiveConfig, ObjectiveError};
use crate::seed::{hash_str, keyed_rng};
use crate::sgraph::{EdgeSplit, IdMap, NeighborSets, SignedEdge};
use crate::Scalar;

/// Training sets at or below this size use one full batch per epoch.
pub const FULL_BATCH_LIMIT: usize = 50_000;
/// Mini-batch size above [`FULL_BATCH_LIMIT`].
pub const DEFAULT_BATCH_EDGES: usize = 10_000;

/// Where parameter updates happen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateGranularity {
    /// One Adam step per edge batch.
    #[default]
    Epoch,
    /// One Adam step per node, on the training edges incident to it, nodes
    /// visited in a seeded order each epoch.
    Node,
}

impl std::str::FromStr for UpdateGranularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "epoch" => Ok(Self::Epoch),
            "node" => Ok(Self::Node),
            other => Err(format!("unknown update granularity `{other}` (expected epoch or node)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub adam: AdamConfig,
    pub objective: ObjectiveConfig,
    /// Edges per batch; `None` picks full batch up to [`FULL_BATCH_LIMIT`]
    /// and [`DEFAULT_BATCH_EDGES`] beyond.
    pub batch_edges: Option<usize>,
    pub seed: u64,
    pub granularity: UpdateGranularity,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            adam: AdamConfig::default(),
            objective: ObjectiveConfig::default(),
            batch_edges: None,
            seed: 0,
            granularity: UpdateGranularity::Epoch,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        let a = &self.adam;
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(a.learning_rate > 0.0 && a.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be positive", a.learning_rate));
        }
        for (name, b) in [("beta1", a.beta1), ("beta2", a.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("{name} = {b} not in (0, 1)"));
            }
        }
        if !(a.eps > 0.0 && a.eps.is_finite()) {
            return bad(format!("eps {} must be positive", a.eps));
        }
        let lambda = self.objective.lambda;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return bad(format!("lambda {lambda} must be a non-negative number"));
        }
        if self.batch_edges == Some(0) {
            return bad("batch size must be at least 1".into());
        }
        Ok(())
    }

    /// Effective batch size for `n_train` edges.
    pub fn batch_size(&self, n_train: usize) -> usize {
        match self.batch_edges {
            Some(b) => b,
            None if n_train <= FULL_BATCH_LIMIT => n_train.max(1),
            None => DEFAULT_BATCH_EDGES,
        }
    }
}

/// Mean loss components over one epoch's updates, weighted by batch size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    /// 1-based.
    pub epoch: usize,
    pub total: f64,
    pub structure: f64,
    pub sign: f64,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("training edges need both signs ({positive} positive, {negative} negative)")]
    MissingSign { positive: usize, negative: usize },
    #[error("non-finite loss at epoch {epoch}: total {total}, structure {structure}, sign {sign}")]
    NonFinite {
        epoch: usize,
        total: f64,
        structure: f64,
        sign: f64,
    },
    #[error("epoch {epoch}: {source}")]
    Step { epoch: usize, source: ObjectiveError },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("checkpoint does not match this run: {0}")]
    Mismatch(String),
}

impl From<TapeError> for TrainError {
    fn from(e: TapeError) -> Self {
        TrainError::Model(e.into())
    }
}

/// Fresh encoder and predictor parameters.
pub fn init_params<T: Scalar>(ids: &IdMap, model: &ModelConfig, seed: u64) -> ParamStore<T> {
    let mut store = ParamStore::new();
    init_model_params(&mut store, ids, model, seed);
    init_predictor(&mut store, model.width(), seed);
    store
}

/// Splits the training edges into batches for `epoch`, each holding both
/// signs in the training ratio when the edge counts allow it.
pub fn epoch_batches(train: &[SignedEdge], batch: usize, seed: u64, epoch: usize) -> Vec<Vec<SignedEdge>> {
    if batch >= train.len() {
        return vec![train.to_vec()];
    }
    let n_batches = train.len().div_ceil(batch);
    let mut rng = keyed_rng(seed, &[hash_str("batches"), epoch as u64]);
    let mut out = vec![Vec::with_capacity(batch); n_batches];
    let mut slot = 0;
    for positive in [true, false] {
        let mut class: Vec<SignedEdge> = train.iter().copied().filter(|e| e.sign.is_positive() == positive).collect();
        class.shuffle(&mut rng);
        for e in class {
            out[slot % n_batches].push(e);
            slot += 1;
        }
    }
    out
}

/// Output of [`train`].
#[derive(Clone, Debug)]
pub struct TrainOutput<T> {
    pub params: ParamStore<T>,
    pub embeddings: Tensor<T>,
    pub history: Vec<EpochLoss>,
}

/// Resumable training state.
#[derive(Debug)]
pub struct Trainer<T> {
    model: Muse<T>,
    cfg: TrainConfig,
    train: Vec<SignedEdge>,
    /// Training edge indices per node, for node-level updates.
    incident: Vec<Vec<usize>>,
    store: ParamStore<T>,
    history: Vec<EpochLoss>,
    epochs_done: usize,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(model: Muse<T>, store: ParamStore<T>, train: Vec<SignedEdge>, cfg: TrainConfig) -> Result<Self, TrainError> {
        cfg.validate()?;
        let positive = train.iter().filter(|e| e.sign.is_positive()).count();
        let negative = train.len() - positive;
        if positive == 0 || negative == 0 {
            return Err(TrainError::MissingSign { positive, negative });
        }
        let mut incident = vec![Vec::new(); model.n_nodes()];
        for (k, e) in train.iter().enumerate() {
            if e.src >= incident.len() || e.dst >= incident.len() {
                return Err(TrainError::Config(format!(
                    "edge {}--{} outside the {}-node model",
                    e.src,
                    e.dst,
                    incident.len()
                )));
            }
            incident[e.src].push(k);
            incident[e.dst].push(k);
        }
        Ok(Self {
            model,
            cfg,
            train,
            incident,
            store,
            history: Vec::new(),
            epochs_done: 0,
        })
    }

    /// Restores a trainer from a checkpoint written by [`Trainer::checkpoint`].
    pub fn resume(model: Muse<T>, ckpt: Checkpoint<T>, train: Vec<SignedEdge>) -> Result<Self, TrainError> {
        if &ckpt.model != model.config() {
            return Err(TrainError::Mismatch("model config differs".into()));
        }
        let mut t = Self::new(model, ckpt.params, train, ckpt.train)?;
        t.history = ckpt.history;
        t.epochs_done = ckpt.epochs_done;
        Ok(t)
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn model(&self) -> &Muse<T> {
        &self.model
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.store
    }

    pub fn history(&self) -> &[EpochLoss] {
        &self.history
    }

    pub fn epochs_done(&self) -> usize {
        self.epochs_done
    }

    pub fn is_finished(&self) -> bool {
        self.epochs_done >= self.cfg.epochs
    }

    pub fn checkpoint(&self, meta: BTreeMap<String, String>) -> Checkpoint<T> {
        Checkpoint {
            model: self.model.config().clone(),
            train: self.cfg.clone(),
            meta,
            epochs_done: self.epochs_done,
            history: self.history.clone(),
            params: self.store.clone(),
        }
    }

    /// Runs one epoch and returns its loss record.
    pub fn step_epoch(&mut self) -> Result<EpochLoss, TrainError> {
        let epoch = self.epochs_done + 1;
        let batches: Vec<Vec<SignedEdge>> = match self.cfg.granularity {
            UpdateGranularity::Epoch => {
                let size = self.cfg.batch_size(self.train.len());
                epoch_batches(&self.train, size, self.cfg.seed, epoch)
            }
            UpdateGranularity::Node => {
                let mut order: Vec<usize> = (0..self.incident.len()).filter(|&i| !self.incident[i].is_empty()).collect();
                order.shuffle(&mut keyed_rng(self.cfg.seed, &[hash_str("nodes"), epoch as u64]));
                order
                    .into_iter()
                    .map(|i| self.incident[i].iter().map(|&k| self.train[k]).collect())
                    .collect()
            }
        };
        let lenient = self.cfg.granularity == UpdateGranularity::Node;
        let mut sums = [0.0f64; 3];
        let mut weight = 0usize;
        for batch in &batches {
            let [total, structure, sign] = self.update(epoch, batch, lenient)?;
            sums[0] += total * batch.len() as f64;
            sums[1] += structure * batch.len() as f64;
            sums[2] += sign * batch.len() as f64;
            weight += batch.len();
        }
        let w = weight.max(1) as f64;
        let record = EpochLoss {
            epoch,
            total: sums[0] / w,
            structure: sums[1] / w,
            sign: sums[2] / w,
        };
        self.history.push(record);
        self.epochs_done = epoch;
        Ok(record)
    }

    fn update(&mut self, epoch: usize, batch: &[SignedEdge], lenient: bool) -> Result<[f64; 3], TrainError> {
        let mut tape = Tape::new();
        let step = |e: ObjectiveError| TrainError::Step { epoch, source: e };
        let emb = self
            .model
            .forward(&mut tape, &self.store)
            .map_err(|e| match e {
                ModelError::Tape(t) => step(t.into()),
                other => TrainError::Model(other),
            })?;
        let loss = objective_var(&mut tape, &self.store, emb, batch, &self.cfg.objective, lenient).map_err(|e| {
            match e {
                // A NaN prediction means the loss itself is undefined.
                ObjectiveError::Tape(TapeError::Probability { value, .. }) if value.is_nan() => TrainError::NonFinite {
                    epoch,
                    total: f64::NAN,
                    structure: f64::NAN,
                    sign: f64::NAN,
                },
                other => step(other),
            }
        })?;
        let read = |v| tape.value(v).data()[0].as_f64();
        let values = [read(loss.total), read(loss.structure), read(loss.sign)];
        if values.iter().any(|x| !x.is_finite()) {
            return Err(TrainError::NonFinite {
                epoch,
                total: values[0],
                structure: values[1],
                sign: values[2],
            });
        }
        tape.backward(loss.total, &mut self.store).map_err(|e| step(e.into()))?;
        adam_step(&mut self.store, &self.cfg.adam);
        Ok(values)
    }

    /// Trains until the configured epoch count, logging progress.
    pub fn run(&mut self) -> Result<(), TrainError> {
        while !self.is_finished() {
            let rec = self.step_epoch()?;
            if rec.epoch == 1 || rec.epoch % 25 == 0 || rec.epoch == self.cfg.epochs {
                log::info!(
                    "epoch {}/{}: loss {:.6} (structure {:.6}, sign {:.6})",
                    rec.epoch,
                    self.cfg.epochs,
                    rec.total,
                    rec.structure,
                    rec.sign
                );
            }
        }
        Ok(())
    }

    pub fn embeddings(&self) -> Result<Tensor<T>, TrainError> {
        Ok(self.model.embed(&self.store)?)
    }

    pub fn finish(self) -> Result<TrainOutput<T>, TrainError> {
        let embeddings = self.embeddings()?;
        Ok(TrainOutput {
            params: self.store,
            embeddings,
            history: self.history,
        })
    }
}

/// Initializes parameters from `cfg.seed` and trains on `split.train`.
pub fn train<T: Scalar>(
    ids: &IdMap,
    sets: &NeighborSets,
    split: &EdgeSplit,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutput<T>, TrainError> {
    let model = Muse::new(model_cfg.clone(), sets)?;
    let store = init_params(ids, model_cfg, cfg.seed);
    let mut trainer = Trainer::new(model, store, split.train.clone(), cfg.clone())?;
    trainer.run()?;
    trainer.finish()
}
