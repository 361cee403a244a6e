mod common;

use std::collections::BTreeMap;

use muse::difftape::{ParamStore, Tape, Tensor};
use muse::model::{ModelConfig, Muse};
use muse::objective::{objective_var, PREDICTOR_BIAS};
use muse::sgraph::EdgeSplit;
use muse::trainer::{
    adam_step, init_params, train, AdamConfig, Checkpoint, CheckpointError, TrainConfig, TrainError, Trainer,
    UpdateGranularity,
};

/// Adam written out for one scalar.
struct ScalarAdam {
    m: f64,
    v: f64,
    t: i32,
}

impl ScalarAdam {
    fn step(&mut self, x: f64, g: f64, c: &AdamConfig) -> f64 {
        self.t += 1;
        self.m = c.beta1 * self.m + (1.0 - c.beta1) * g;
        self.v = c.beta2 * self.v + (1.0 - c.beta2) * g * g;
        let m_hat = self.m / (1.0 - c.beta1.powi(self.t));
        let v_hat = self.v / (1.0 - c.beta2.powi(self.t));
        x - c.learning_rate * m_hat / (v_hat.sqrt() + c.eps)
    }
}

#[test]
fn adam_trajectory_on_a_quadratic() {
    // f(x) = ½ Σ a_k (x_k − c_k)²
    let a = [2.0, 0.5, 10.0];
    let c = [1.0, -3.0, 0.25];
    let cfg = AdamConfig { learning_rate: 0.1, ..Default::default() };
    let mut store = ParamStore::new();
    store.insert("x", Tensor::new(1, 3, vec![0.0, 0.0, 0.0]).unwrap());
    let mut oracle: Vec<(f64, ScalarAdam)> = (0..3).map(|_| (0.0, ScalarAdam { m: 0.0, v: 0.0, t: 0 })).collect();
    for _ in 0..5 {
        let x = store.value("x").unwrap().data().to_vec();
        let g: Vec<f64> = (0..3).map(|k| a[k] * (x[k] - c[k])).collect();
        store.get_mut("x").unwrap().grad = Tensor::new(1, 3, g).unwrap();
        adam_step(&mut store, &cfg);
        for (k, (xk, state)) in oracle.iter_mut().enumerate() {
            let gk = a[k] * (*xk - c[k]);
            *xk = state.step(*xk, gk, &cfg);
        }
        for (k, (xk, _)) in oracle.iter().enumerate() {
            let got = store.value("x").unwrap().data()[k];
            assert!((got - xk).abs() <= 1e-12, "coordinate {k}: {got} vs {xk}");
        }
    }
    assert_eq!(store.get("x").unwrap().step, 5);
}

fn small_setup(seed: u64) -> (muse::sgraph::SignedGraph, ModelConfig) {
    (common::random_mixed_graph(16, 0.3, seed), common::small_config(2, 3, 2))
}

#[test]
fn one_epoch_is_one_step_per_batch() {
    let (g, cfg) = small_setup(1);
    let sets = common::sets(&g, 2);
    let edges = g.edges();
    let tc = TrainConfig { epochs: 1, batch_edges: Some(edges.len().div_ceil(3)), ..Default::default() };
    let model = Muse::<f64>::new(cfg.clone(), &sets).unwrap();
    let mut t = Trainer::new(model, init_params(g.ids(), &cfg, 0), edges, tc).unwrap();
    t.run().unwrap();
    assert_eq!(t.params().get(PREDICTOR_BIAS).unwrap().step, 3);
    assert_eq!(t.history().len(), 1);

    let zero = TrainConfig { epochs: 0, ..Default::default() };
    let model = Muse::<f64>::new(cfg.clone(), &sets).unwrap();
    assert!(matches!(
        Trainer::new(model, init_params(g.ids(), &cfg, 0), g.edges(), zero),
        Err(TrainError::Config(_))
    ));
}

#[test]
fn training_is_deterministic() {
    for granularity in [UpdateGranularity::Epoch, UpdateGranularity::Node] {
        let (g, cfg) = small_setup(2);
        let sets = common::sets(&g, 2);
        let split = EdgeSplit { train: g.edges(), test: vec![], seed: 0 };
        let tc = TrainConfig { epochs: 5, seed: 17, granularity, ..Default::default() };
        let a = train::<f64>(g.ids(), &sets, &split, &cfg, &tc).unwrap();
        let b = train::<f64>(g.ids(), &sets, &split, &cfg, &tc).unwrap();
        assert_eq!(a.embeddings, b.embeddings);
        assert_eq!(a.history, b.history);
        let other = TrainConfig { seed: 18, ..tc };
        let c = train::<f64>(g.ids(), &sets, &split, &cfg, &other).unwrap();
        assert_ne!(a.embeddings, c.embeddings);
    }
}

fn full_batch_loss(model: &Muse<f64>, store: &ParamStore<f64>, edges: &[muse::sgraph::SignedEdge], tc: &TrainConfig) -> f64 {
    let mut tape = Tape::new();
    let emb = model.forward(&mut tape, store).unwrap();
    let l = objective_var(&mut tape, store, emb, edges, &tc.objective, false).unwrap();
    tape.value(l.total).data()[0]
}

fn descent_failures(lr: f64) -> usize {
    (0..20)
        .filter(|&seed| {
            let (g, cfg) = small_setup(100 + seed);
            let sets = common::sets(&g, 2);
            let mut tc = TrainConfig { epochs: 1, seed, ..Default::default() };
            tc.adam.learning_rate = lr;
            let store = init_params(g.ids(), &cfg, seed);
            let model = Muse::new(cfg.clone(), &sets).unwrap();
            let before = full_batch_loss(&model, &store, &g.edges(), &tc);
            let mut t = Trainer::new(model, store, g.edges(), tc.clone()).unwrap();
            t.step_epoch().unwrap();
            let after = full_batch_loss(t.model(), t.params(), &g.edges(), &tc);
            after > before
        })
        .count()
}

#[test]
fn single_small_step_descends() {
    assert_eq!(descent_failures(1e-5), 0);
    assert_eq!(descent_failures(1e-4), 0);
}

#[test]
fn checkpoint_resume_is_bit_exact() {
    let (g, cfg) = small_setup(3);
    let sets = common::sets(&g, 2);
    let tc = TrainConfig { epochs: 6, seed: 5, batch_edges: Some(10), ..Default::default() };
    let fresh = || {
        let model = Muse::new(cfg.clone(), &sets).unwrap();
        Trainer::new(model, init_params(g.ids(), &cfg, 5), g.edges(), tc.clone()).unwrap()
    };
    let mut whole = fresh();
    whole.run().unwrap();

    let mut half = fresh();
    for _ in 0..3 {
        half.step_epoch().unwrap();
    }
    let meta = BTreeMap::from([("graph_sha256".to_owned(), "abc".to_owned())]);
    let text = half.checkpoint(meta.clone()).to_text();
    let loaded = Checkpoint::<f64>::from_text(&text).unwrap();
    assert_eq!(loaded.meta, meta);
    assert_eq!(loaded.params, *half.params());
    let model = Muse::new(cfg.clone(), &sets).unwrap();
    let mut resumed = Trainer::resume(model, loaded, g.edges()).unwrap();
    resumed.run().unwrap();
    assert_eq!(resumed.params(), whole.params());
    assert_eq!(resumed.history(), whole.history());
    assert_eq!(resumed.embeddings().unwrap(), whole.embeddings().unwrap());
}

#[test]
fn tampered_checkpoint_is_rejected() {
    let (g, cfg) = small_setup(4);
    let sets = common::sets(&g, 2);
    let model = Muse::new(cfg.clone(), &sets).unwrap();
    let t = Trainer::new(model, init_params::<f64>(g.ids(), &cfg, 0), g.edges(), TrainConfig::default()).unwrap();
    let text = t.checkpoint(BTreeMap::new()).to_text();
    let idx = text.find("value ").unwrap() + 6;
    let mut bytes = text.into_bytes();
    bytes[idx] = if bytes[idx] == b'1' { b'2' } else { b'1' };
    let tampered = String::from_utf8(bytes).unwrap();
    assert!(matches!(Checkpoint::<f64>::from_text(&tampered), Err(CheckpointError::Integrity { .. })));
    let truncated = &tampered[..tampered.find("sha256").unwrap()];
    assert!(matches!(Checkpoint::<f64>::from_text(truncated), Err(CheckpointError::MissingDigest)));
}

#[test]
fn f32_checkpoints_round_trip() {
    let (g, cfg) = small_setup(5);
    let sets = common::sets(&g, 2);
    let model = Muse::<f32>::new(cfg.clone(), &sets).unwrap();
    let mut t = Trainer::new(model, init_params::<f32>(g.ids(), &cfg, 0), g.edges(), TrainConfig { epochs: 2, ..Default::default() }).unwrap();
    t.run().unwrap();
    let text = t.checkpoint(BTreeMap::new()).to_text();
    assert!(text.contains("\nscalar f32\n"));
    let back = Checkpoint::<f32>::from_text(&text).unwrap();
    assert_eq!(&back.params, t.params());
    assert!(matches!(Checkpoint::<f64>::from_text(&text), Err(CheckpointError::Scalar { .. })));
}

#[test]
fn non_finite_loss_aborts_with_diagnostic() {
    let (g, cfg) = small_setup(6);
    let sets = common::sets(&g, 2);
    let model = Muse::new(cfg.clone(), &sets).unwrap();
    let mut store = init_params::<f64>(g.ids(), &cfg, 0);
    store.get_mut(PREDICTOR_BIAS).unwrap().value = Tensor::scalar(-60.0);
    let mut tc = TrainConfig { epochs: 3, ..Default::default() };
    tc.objective.lambda = 1e308;
    let mut t = Trainer::new(model, store, g.edges(), tc).unwrap();
    let err = t.run().unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, TrainError::NonFinite { epoch: 1, .. }), "{msg}");
    assert!(msg.contains("epoch 1") && msg.contains("structure") && msg.contains("sign"), "{msg}");
}

#[test]
fn both_signs_required() {
    let (g, cfg) = small_setup(7);
    let sets = common::sets(&g, 2);
    let model = Muse::new(cfg.clone(), &sets).unwrap();
    let only_pos: Vec<_> = g.edges().into_iter().filter(|e| e.sign.is_positive()).collect();
    let err = Trainer::new(model, init_params::<f64>(g.ids(), &cfg, 0), only_pos, TrainConfig::default()).unwrap_err();
    assert!(matches!(err, TrainError::MissingSign { negative: 0, .. }));
}

#[test]
fn separable_cliques_with_node_updates() {
    let g = common::two_cliques();
    let sets = common::sets(&g, 2);
    let split = EdgeSplit { train: g.edges(), test: vec![], seed: 0 };
    let tc = TrainConfig { epochs: 200, granularity: UpdateGranularity::Node, ..Default::default() };
    let out = train::<f64>(g.ids(), &sets, &split, &ModelConfig::default(), &tc).unwrap();
    let r = muse::evaluate_edges(&out.params, &out.embeddings, &split.train).unwrap();
    assert_eq!((r.f1, r.auc), (1.0, 1.0));
}

#[test]
fn separable_cliques_with_epoch_updates_given_more_epochs() {
    let g = common::two_cliques();
    let sets = common::sets(&g, 2);
    let split = EdgeSplit { train: g.edges(), test: vec![], seed: 0 };
    let tc = TrainConfig { epochs: 1000, ..Default::default() };
    let out = train::<f64>(g.ids(), &sets, &split, &ModelConfig::default(), &tc).unwrap();
    let r = muse::evaluate_edges(&out.params, &out.embeddings, &split.train).unwrap();
    assert_eq!((r.f1, r.auc), (1.0, 1.0));
}
