use serde::{Deserialize, Serialize};

use crate::difftape::ParamStore;
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of every parameter; gradients are zeroed
/// afterwards.
pub fn adam_step<T: Scalar>(store: &mut ParamStore<T>, cfg: &AdamConfig) {
    let lr = T::lit(cfg.learning_rate);
    let (b1, b2, eps) = (T::lit(cfg.beta1), T::lit(cfg.beta2), T::lit(cfg.eps));
    let one = T::one();
    for (_, p) in store.iter_mut() {
        p.step += 1;
        let t = i32::try_from(p.step).unwrap_or(i32::MAX);
        let c1 = one - b1.powi(t);
        let c2 = one - b2.powi(t);
        let grad = p.grad.data().to_vec();
        let m = p.m.data_mut();
        for (mi, &g) in m.iter_mut().zip(&grad) {
            *mi = b1 * *mi + (one - b1) * g;
        }
        let v = p.v.data_mut();
        for (vi, &g) in v.iter_mut().zip(&grad) {
            *vi = b2 * *vi + (one - b2) * g * g;
        }
        let (m, v) = (p.m.data().to_vec(), p.v.data());
        for ((x, &mi), &vi) in p.value.data_mut().iter_mut().zip(&m).zip(v) {
            let m_hat = mi / c1;
            let v_hat = vi / c2;
            *x -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        p.grad.data_mut().iter_mut().for_each(|g| *g = T::zero());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::difftape::Tensor;

    #[test]
    fn zero_gradient_leaves_values() {
        let mut store = ParamStore::new();
        store.insert("w", Tensor::new(1, 2, vec![0.3, -0.7]).unwrap());
        adam_step(&mut store, &AdamConfig::default());
        assert_eq!(store.value("w").unwrap().data(), &[0.3, -0.7]);
        assert_eq!(store.get("w").unwrap().step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut store = ParamStore::new();
        store.insert("w", Tensor::new(1, 2, vec![1.0, 1.0]).unwrap());
        store.get_mut("w").unwrap().grad = Tensor::new(1, 2, vec![2.5, -0.01]).unwrap();
        let cfg = AdamConfig { learning_rate: 1e-3, ..Default::default() };
        adam_step(&mut store, &cfg);
        let w: &[f64] = store.value("w").unwrap().data();
        assert!((w[0] - (1.0 - 1e-3)).abs() < 1e-3 * 1e-7);
        assert!((w[1] - (1.0 + 1e-3)).abs() < 1e-3 * 1e-5);
        assert_eq!(store.grad("w").unwrap().data(), &[0.0, 0.0]);
    }
}
