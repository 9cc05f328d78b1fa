use rand::Rng as _;

use super::matrix::{Matrix, Real};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Role of a parameter; only [`ParamKind::Weight`] entries take L2 decay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    /// Layer-norm scale/shift.
    Norm,
}

impl ParamKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ParamKind::Weight => "weight",
            ParamKind::Bias => "bias",
            ParamKind::Norm => "norm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "weight" => Some(ParamKind::Weight),
            "bias" => Some(ParamKind::Bias),
            "norm" => Some(ParamKind::Norm),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub kind: ParamKind,
    pub value: Matrix<T>,
    pub grad: Matrix<T>,
}

/// Named trainable tensors with gradient accumulators.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, kind: ParamKind, value: Matrix<T>) -> Result<ParamId> {
        let name = name.into();
        if self.params.iter().any(|p| p.name == name) {
            return Err(Error::param(format!("duplicate parameter name {name}")));
        }
        let grad = Matrix::zeros(value.rows(), value.cols());
        self.params.push(Param {
            name,
            kind,
            value,
            grad,
        });
        Ok(ParamId(self.params.len() - 1))
    }

    /// Glorot-uniform weight matrix.
    pub fn add_glorot(&mut self, name: &str, rows: usize, cols: usize, rng: &mut Rng) -> Result<ParamId> {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let m = Matrix::from_fn(rows, cols, |_, _| T::from_f64(rng.random_range(-bound..bound)));
        self.add(name, ParamKind::Weight, m)
    }

    pub fn add_zeros(&mut self, name: &str, kind: ParamKind, rows: usize, cols: usize) -> Result<ParamId> {
        self.add(name, kind, Matrix::zeros(rows, cols))
    }

    pub fn add_ones(&mut self, name: &str, kind: ParamKind, rows: usize, cols: usize) -> Result<ParamId> {
        self.add(name, kind, Matrix::filled(rows, cols, T::one()))
    }

    /// Looks up `name` and checks its shape, for re-binding loaded parameters.
    pub fn expect(&self, name: &str, shape: (usize, usize)) -> Result<ParamId> {
        let id = self
            .find(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))?;
        let got = self.value(id).shape();
        if got != shape {
            return Err(Error::Shape {
                op: "parameter binding",
                left: shape,
                right: got,
            });
        }
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param<T> {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Matrix<T> {
        &self.params[id.0].value
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.params.iter_mut()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(T::zero());
        }
    }

    /// Sum of squared entries over all weight matrices (biases and norms excluded).
    pub fn l2_weights(&self) -> f64 {
        self.params
            .iter()
            .filter(|p| p.kind == ParamKind::Weight)
            .flat_map(|p| p.value.data().iter())
            .map(|x| {
                let x = x.to_f64();
                x * x
            })
            .sum()
    }

    pub fn n_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    kind: p.kind,
                    value: p.value.cast(),
                    grad: p.grad.cast(),
                })
                .collect(),
        }
    }
}
