//! Fused multi-faceted attention aggregation.
//!
//! For a list of (target `i`, neighbor `j`) pairs and `M` facets, the
//! attention logits of a pair are `z[m][s] = u[i][m] + v[j][s]`, passed
//! through a leaky ReLU. Facet weights are the joint softmax over all `M·M`
//! logits, summed over the neighbor facet `s`:
//!
//! ```text
//! alpha[m] = Σ_s exp(lrelu(z[m][s])) / Σ_m' Σ_s exp(lrelu(z[m'][s]))
//! out[i][m] = Σ_j alpha_ij[m] · values[j][m]          (values: M blocks of D)
//! ```
//!
//! Splitting the attention vector into a query half and a key half turns
//! the per-pair score into this sum, so the aggregation only needs the
//! per-node projections `u` and `v`. Nothing of size pairs × D is stored;
//! weights are recomputed during the backward passes.

use rayon::prelude::*;

use crate::Scalar;

/// Pair list in CSR form, grouped by target, plus the transpose grouped
/// by neighbor. Pairs keep the order they were given in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairIndex {
    n_targets: usize,
    n_keys: usize,
    offsets: Vec<usize>,
    keys: Vec<usize>,
    rev_offsets: Vec<usize>,
    /// (target, pair position) grouped by key, ascending target within a key.
    rev_pairs: Vec<(usize, usize)>,
}

impl PairIndex {
    /// `offsets` has `n_targets + 1` entries; `keys[offsets[i]..offsets[i+1]]`
    /// are the neighbors aggregated into target `i`.
    pub fn from_csr(n_keys: usize, offsets: Vec<usize>, keys: Vec<usize>) -> Self {
        assert!(!offsets.is_empty(), "CSR offsets need a leading zero");
        assert_eq!(*offsets.last().unwrap(), keys.len(), "CSR offsets/keys mismatch");
        assert!(keys.iter().all(|&k| k < n_keys), "key out of range");
        let n_targets = offsets.len() - 1;

        let mut counts = vec![0usize; n_keys + 1];
        for &k in &keys {
            counts[k + 1] += 1;
        }
        for k in 0..n_keys {
            counts[k + 1] += counts[k];
        }
        let rev_offsets = counts.clone();
        let mut cursor = counts;
        let mut rev_pairs = vec![(0, 0); keys.len()];
        for i in 0..n_targets {
            for p in offsets[i]..offsets[i + 1] {
                let k = keys[p];
                rev_pairs[cursor[k]] = (i, p);
                cursor[k] += 1;
            }
        }
        Self {
            n_targets,
            n_keys,
            offsets,
            keys,
            rev_offsets,
            rev_pairs,
        }
    }

    pub fn from_lists(n_keys: usize, lists: &[Vec<usize>]) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        offsets.push(0);
        let mut keys = Vec::new();
        for list in lists {
            keys.extend_from_slice(list);
            offsets.push(keys.len());
        }
        Self::from_csr(n_keys, offsets, keys)
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    pub fn n_keys(&self) -> usize {
        self.n_keys
    }

    pub fn n_pairs(&self) -> usize {
        self.keys.len()
    }

    pub fn neighbors(&self, target: usize) -> &[usize] {
        &self.keys[self.offsets[target]..self.offsets[target + 1]]
    }
}

/// Scratch-free evaluation of one pair's facet weights.
///
/// `weights` receives the normalized `M·M` softmax (facet-major), `alpha`
/// the per-facet sums. Both must have the right lengths.
pub fn pair_weights<T: Scalar>(
    u_row: &[T],
    v_row: &[T],
    slope: T,
    weights: &mut [T],
    alpha: &mut [T],
) {
    let m = u_row.len();
    let mut max = T::neg_infinity();
    for (a, &u) in u_row.iter().enumerate() {
        for (s, &v) in v_row.iter().enumerate() {
            let z = u + v;
            let e = if z > T::zero() { z } else { slope * z };
            weights[a * m + s] = e;
            if e > max {
                max = e;
            }
        }
    }
    let mut total = T::zero();
    for w in weights.iter_mut() {
        *w = (*w - max).exp();
        total += *w;
    }
    for (a, slot) in alpha.iter_mut().enumerate() {
        let mut acc = T::zero();
        for w in &mut weights[a * m..(a + 1) * m] {
            *w /= total;
            acc += *w;
        }
        *slot = acc;
    }
}

/// Per-pair backward core. Given the upstream gradient row of the target
/// and the neighbor's value row, returns (via the out-params) the logit
/// gradient `gz` (M·M), and `g_alpha` (M).
#[allow(clippy::too_many_arguments)]
fn pair_backward<T: Scalar>(
    u_row: &[T],
    v_row: &[T],
    value_row: &[T],
    grad_row: &[T],
    slope: T,
    weights: &mut [T],
    alpha: &mut [T],
    g_alpha: &mut [T],
    gz: &mut [T],
) {
    let m = u_row.len();
    let d = value_row.len() / m;
    pair_weights(u_row, v_row, slope, weights, alpha);
    let mut centre = T::zero();
    for a in 0..m {
        let dot = grad_row[a * d..(a + 1) * d]
            .iter()
            .zip(&value_row[a * d..(a + 1) * d])
            .fold(T::zero(), |acc, (&g, &x)| acc + g * x);
        g_alpha[a] = dot;
        centre += alpha[a] * dot;
    }
    for a in 0..m {
        for s in 0..m {
            let idx = a * m + s;
            let z = u_row[a] + v_row[s];
            let deriv = if z > T::zero() { T::one() } else { slope };
            gz[idx] = weights[idx] * (g_alpha[a] - centre) * deriv;
        }
    }
}

pub(crate) fn forward<T: Scalar>(
    pairs: &PairIndex,
    u: &[T],
    v: &[T],
    values: &[T],
    facets: usize,
    slope: T,
) -> Vec<T> {
    let m = facets;
    let width = values.len() / pairs.n_keys.max(1);
    let d = width / m;
    let mut out = vec![T::zero(); pairs.n_targets * width];
    if width == 0 {
        return out;
    }
    out.par_chunks_mut(width)
        .enumerate()
        .for_each_init(
            || (vec![T::zero(); m * m], vec![T::zero(); m]),
            |(weights, alpha), (i, out_row)| {
                let u_row = &u[i * m..(i + 1) * m];
                for &j in pairs.neighbors(i) {
                    let v_row = &v[j * m..(j + 1) * m];
                    pair_weights(u_row, v_row, slope, weights, alpha);
                    let value_row = &values[j * width..(j + 1) * width];
                    for a in 0..m {
                        let w = alpha[a];
                        for (o, &x) in out_row[a * d..(a + 1) * d]
                            .iter_mut()
                            .zip(&value_row[a * d..(a + 1) * d])
                        {
                            *o += w * x;
                        }
                    }
                }
            },
        );
    out
}

pub(crate) struct AttentionGrads<T> {
    pub u: Vec<T>,
    pub v: Vec<T>,
    pub values: Vec<T>,
}

pub(crate) fn backward<T: Scalar>(
    pairs: &PairIndex,
    u: &[T],
    v: &[T],
    values: &[T],
    grad_out: &[T],
    facets: usize,
    slope: T,
) -> AttentionGrads<T> {
    let m = facets;
    let width = values.len() / pairs.n_keys.max(1);
    let d = width / m.max(1);
    let mut du = vec![T::zero(); pairs.n_targets * m];
    let mut dv = vec![T::zero(); pairs.n_keys * m];
    let mut dvalues = vec![T::zero(); pairs.n_keys * width];
    if width == 0 {
        return AttentionGrads { u: du, v: dv, values: dvalues };
    }
    let scratch = || {
        (
            vec![T::zero(); m * m],
            vec![T::zero(); m],
            vec![T::zero(); m],
            vec![T::zero(); m * m],
        )
    };

    // Target-grouped pass: gradient of the query projections.
    du.par_chunks_mut(m).enumerate().for_each_init(
        scratch,
        |(weights, alpha, g_alpha, gz), (i, du_row)| {
            let u_row = &u[i * m..(i + 1) * m];
            let grad_row = &grad_out[i * width..(i + 1) * width];
            for &j in pairs.neighbors(i) {
                pair_backward(
                    u_row,
                    &v[j * m..(j + 1) * m],
                    &values[j * width..(j + 1) * width],
                    grad_row,
                    slope,
                    weights,
                    alpha,
                    g_alpha,
                    gz,
                );
                for a in 0..m {
                    du_row[a] += gz[a * m..(a + 1) * m]
                        .iter()
                        .fold(T::zero(), |acc, &g| acc + g);
                }
            }
        },
    );

    // Key-grouped pass: gradients of key projections and of the values.
    dv.par_chunks_mut(m)
        .zip(dvalues.par_chunks_mut(width))
        .enumerate()
        .for_each_init(scratch, |(weights, alpha, g_alpha, gz), (j, (dv_row, dval_row))| {
            let v_row = &v[j * m..(j + 1) * m];
            let value_row = &values[j * width..(j + 1) * width];
            for &(i, _) in &pairs.rev_pairs[pairs.rev_offsets[j]..pairs.rev_offsets[j + 1]] {
                let grad_row = &grad_out[i * width..(i + 1) * width];
                pair_backward(
                    &u[i * m..(i + 1) * m],
                    v_row,
                    value_row,
                    grad_row,
                    slope,
                    weights,
                    alpha,
                    g_alpha,
                    gz,
                );
                for s in 0..m {
                    let mut acc = T::zero();
                    for a in 0..m {
                        acc += gz[a * m + s];
                    }
                    dv_row[s] += acc;
                }
                for a in 0..m {
                    let w = alpha[a];
                    for (o, &g) in dval_row[a * d..(a + 1) * d]
                        .iter_mut()
                        .zip(&grad_row[a * d..(a + 1) * d])
                    {
                        *o += w * g;
                    }
                }
            }
        });

    AttentionGrads { u: du, v: dv, values: dvalues }
}
