use std::collections::BTreeMap;

use super::{TapeError, Tensor};
use crate::Scalar;

/// A trainable tensor with its gradient and Adam state.
#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub m: Tensor<T>,
    pub v: Tensor<T>,
    pub step: u64,
}

impl<T: Scalar> Param<T> {
    pub fn new(value: Tensor<T>) -> Self {
        let (r, c) = (value.rows(), value.cols());
        Self {
            value,
            grad: Tensor::zeros(r, c),
            m: Tensor::zeros(r, c),
            v: Tensor::zeros(r, c),
            step: 0,
        }
    }
}

/// Named parameters, iterated in name order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<T> {
    params: BTreeMap<String, Param<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            params: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>) {
        self.params.insert(name.into(), Param::new(value));
    }

    pub fn insert_param(&mut self, name: impl Into<String>, param: Param<T>) {
        self.params.insert(name.into(), param);
    }

    pub fn get(&self, name: &str) -> Result<&Param<T>, TapeError> {
        self.params
            .get(name)
            .ok_or_else(|| TapeError::UnknownParam(name.to_owned()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Param<T>, TapeError> {
        self.params
            .get_mut(name)
            .ok_or_else(|| TapeError::UnknownParam(name.to_owned()))
    }

    pub fn value(&self, name: &str) -> Result<&Tensor<T>, TapeError> {
        self.get(name).map(|p| &p.value)
    }

    pub fn grad(&self, name: &str) -> Result<&Tensor<T>, TapeError> {
        self.get(name).map(|p| &p.grad)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param<T>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param<T>)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params.values_mut() {
            for g in p.grad.data_mut() {
                *g = T::zero();
            }
        }
    }

    /// Total number of scalar entries across all parameters.
    pub fn n_values(&self) -> usize {
        self.params.values().map(|p| p.value.shape().len()).sum()
    }
}
