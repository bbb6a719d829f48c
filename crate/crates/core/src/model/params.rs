use crate::error::{Error, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Ordered, named parameter tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub(crate) fn push(&mut self, name: String, t: Tensor) -> ParamId {
        self.names.push(name);
        self.tensors.push(t);
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total scalar parameter count.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.tensors[i])
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &mut self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.names.iter().map(String::as_str).zip(&mut self.tensors)
    }

    /// Replaces every value with the one of the same name in `other`; names and shapes must agree.
    pub fn copy_values_from(&mut self, other: &ParamStore) -> Result<()> {
        if self.names != other.names {
            return Err(Error::Format("parameter names differ".into()));
        }
        for (dst, src) in self.tensors.iter_mut().zip(&other.tensors) {
            if dst.shape() != src.shape() {
                return Err(Error::Format(format!(
                    "parameter shape {:?} vs {:?}",
                    dst.shape(),
                    src.shape()
                )));
            }
            dst.data_mut().copy_from_slice(src.data());
        }
        Ok(())
    }

    pub(crate) fn bind(&self, tape: &mut Tape) -> Bound {
        let vars = self
            .tensors
            .iter()
            .map(|t| {
                let mut t = t.clone();
                t.zero_grad();
                t.set_requires_grad(true);
                tape.leaf(t)
            })
            .collect();
        Bound { vars }
    }

    pub(crate) fn bind_constant(&self, tape: &mut Tape) -> Bound {
        let vars = self
            .tensors
            .iter()
            .map(|t| tape.constant(t.clone()))
            .collect();
        Bound { vars }
    }

    /// Collects the gradient of every bound parameter (zeros where none reached it).
    pub fn gradients(&self, tape: &Tape, bound: &Bound) -> Vec<Vec<f64>> {
        self.tensors
            .iter()
            .zip(&bound.vars)
            .map(|(t, v)| {
                tape.grad(*v)
                    .map(<[f64]>::to_vec)
                    .unwrap_or_else(|| vec![0.0; t.numel()])
            })
            .collect()
    }
}

/// Parameters registered on a particular tape.
#[derive(Clone, Debug)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}
