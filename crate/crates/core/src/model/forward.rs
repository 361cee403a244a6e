use std::marker::PhantomData;
use std::sync::Arc;

use super::config::{attention_vector_name, composite_name, transform_name, AttentionKernel, ModelConfig, EMBEDDING};
use super::ModelError;
use crate::difftape::{PairIndex, ParamStore, Tape, Tensor, Var};
use crate::sgraph::{NeighborClass, NeighborSets};
use crate::Scalar;

/// Aggregation pairs for one (order, class) plus the flattened
/// target/key columns the composed kernel needs.
#[derive(Debug)]
struct OrderPairs {
    index: Arc<PairIndex>,
    targets: Arc<[usize]>,
    keys: Arc<[usize]>,
}

impl OrderPairs {
    fn new(index: PairIndex) -> Self {
        let mut targets = Vec::with_capacity(index.n_pairs());
        let mut keys = Vec::with_capacity(index.n_pairs());
        for i in 0..index.n_targets() {
            for &j in index.neighbors(i) {
                targets.push(i);
                keys.push(j);
            }
        }
        Self {
            index: Arc::new(index),
            targets: targets.into(),
            keys: keys.into(),
        }
    }
}

/// The multi-order, multi-faceted attention encoder bound to one graph's
/// neighbor sets.
#[derive(Debug)]
pub struct Muse<T> {
    cfg: ModelConfig,
    n: usize,
    /// `pairs[l-1][class]`.
    pairs: Vec<[OrderPairs; 2]>,
    _scalar: PhantomData<T>,
}

impl<T: Scalar> Muse<T> {
    pub fn new(cfg: ModelConfig, sets: &NeighborSets) -> Result<Self, ModelError> {
        cfg.validate()?;
        if sets.order() < cfg.orders {
            return Err(ModelError::Order { have: sets.order(), need: cfg.orders });
        }
        let pairs = (1..=cfg.orders)
            .map(|l| {
                NeighborClass::BOTH.map(|class| OrderPairs::new(sets.pair_index(l, class)))
            })
            .collect();
        Ok(Self {
            cfg,
            n: sets.n(),
            pairs,
            _scalar: PhantomData,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    /// Records the forward pass and returns the `n x (M·D)` embeddings
    /// `h^{BU(L)}`.
    pub fn forward(&self, tape: &mut Tape<T>, store: &ParamStore<T>) -> Result<Var, ModelError> {
        let (n, m, d) = (self.n, self.cfg.facets, self.cfg.facet_dim);
        let initial = tape.param(store, EMBEDDING)?;
        let shape = tape.shape(initial);
        if shape.rows != n || shape.cols != m * d {
            return Err(ModelError::Config(format!(
                "embedding table is {shape}, model expects {n}x{}",
                m * d
            )));
        }
        let keys_flat = tape.reshape(initial, n * m, d)?;
        let mut prev = initial;
        for l in 1..=self.cfg.orders {
            let mut halves = [prev; 2];
            for (c, class) in NeighborClass::BOTH.into_iter().enumerate() {
                let aggregated = self.aggregate(tape, store, l, class, prev, initial, keys_flat)?;
                halves[c] = tape.add(prev, aggregated)?;
            }
            let joined = tape.concat_cols(halves[0], halves[1])?;
            let w = tape.param(store, &composite_name(l))?;
            let mixed = tape.matmul(joined, w)?;
            prev = tape.tanh(mixed);
        }
        Ok(prev)
    }

    /// Attention-weighted neighbor sum for one (order, class), without `prev`.
    #[allow(clippy::too_many_arguments)]
    fn aggregate(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        order: usize,
        class: NeighborClass,
        prev: Var,
        initial: Var,
        keys_flat: Var,
    ) -> Result<Var, ModelError> {
        let (n, m, d) = (self.n, self.cfg.facets, self.cfg.facet_dim);
        let slope = T::lit(self.cfg.leaky_slope);
        let transform = tape.param(store, &transform_name(&self.cfg, order, class))?;
        let vector = tape.param(store, &attention_vector_name(&self.cfg, order, class))?;
        let query_half = tape.slice_rows(vector, 0, d)?;
        let key_half = tape.slice_rows(vector, d, 2 * d)?;
        let transform_t = tape.transpose(transform);

        // Row (i, m) of the flat views is facet m of node i.
        let queries = tape.reshape(prev, n * m, d)?;
        let tq = tape.matmul(queries, transform_t)?;
        let tk = tape.matmul(keys_flat, transform_t)?;
        let u = tape.matmul(tq, query_half)?;
        let u = tape.reshape(u, n, m)?;
        let v = tape.matmul(tk, key_half)?;
        let v = tape.reshape(v, n, m)?;

        let pairs = &self.pairs[order - 1][class as usize];
        match self.cfg.kernel {
            AttentionKernel::Fused => Ok(tape.facet_attention(u, v, initial, pairs.index.clone(), slope)?),
            AttentionKernel::Composed => self.composed(tape, pairs, u, v, initial, slope),
        }
    }

    fn composed(
        &self,
        tape: &mut Tape<T>,
        pairs: &OrderPairs,
        u: Var,
        v: Var,
        initial: Var,
        slope: T,
    ) -> Result<Var, ModelError> {
        let (m, d) = (self.cfg.facets, self.cfg.facet_dim);
        let one = T::one();
        let zero = T::zero();
        let spread_query = tape.constant(Tensor::from_fn(m, m * m, |r, c| if c / m == r { one } else { zero }));
        let spread_key = tape.constant(Tensor::from_fn(m, m * m, |r, c| if c % m == r { one } else { zero }));
        let group = tape.constant(Tensor::from_fn(m * m, m, |r, c| if r / m == c { one } else { zero }));
        let expand = tape.constant(Tensor::from_fn(m, m * d, |r, c| if c / d == r { one } else { zero }));

        let ui = tape.gather_rows(u, pairs.targets.clone())?;
        let vj = tape.gather_rows(v, pairs.keys.clone())?;
        let a = tape.matmul(ui, spread_query)?;
        let b = tape.matmul(vj, spread_key)?;
        let logits = tape.add(a, b)?;
        let activated = tape.leaky_relu(logits, slope);
        let joint = tape.softmax(activated);
        let alpha = tape.matmul(joint, group)?;
        let alpha_wide = tape.matmul(alpha, expand)?;
        let values = tape.gather_rows(initial, pairs.keys.clone())?;
        let weighted = tape.mul(alpha_wide, values)?;
        Ok(tape.scatter_add_rows(weighted, pairs.targets.clone(), self.n)?)
    }

    /// Forward pass on a scratch tape, returning only the embedding values.
    pub fn embed(&self, store: &ParamStore<T>) -> Result<Tensor<T>, ModelError> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, store)?;
        Ok(tape.value(out).clone())
    }
}
