use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, Tape, Tensor, Var};
use crate::error::{shape_err, Result};
use crate::scalar::Scalar;

/// Index of a learnable tensor inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named learnable tensors, kept in creation order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<F> {
    names: Vec<String>,
    tensors: Vec<Tensor<F>>,
}

impl<F: Scalar> Default for ParamStore<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> ParamStore<F> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    /// Weight initialized uniformly in `±sqrt(1 / fan_in)`.
    pub fn weight<R: Rng + ?Sized>(&mut self, name: &str, shape: &[usize], fan_in: usize, rng: &mut R) -> ParamId {
        let bound = (1.0 / fan_in.max(1) as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| F::of(rng.random_range(-bound..=bound))).collect();
        self.push(name, Tensor::new(shape, data).expect("consistent weight shape"))
    }

    pub fn bias(&mut self, name: &str, shape: &[usize]) -> ParamId {
        self.push(name, Tensor::zeros(shape))
    }

    pub fn push(&mut self, name: &str, tensor: Tensor<F>) -> ParamId {
        self.names.push(name.to_string());
        self.tensors.push(tensor);
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<F> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<F> {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<F>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Replaces the contents of `id`, keeping its shape.
    pub fn set_data(&mut self, id: ParamId, data: &[F]) -> Result<()> {
        let t = &mut self.tensors[id.0];
        if t.len() != data.len() {
            return shape_err(format!(
                "parameter {} holds {} values, got {}",
                self.names[id.0],
                t.len(),
                data.len()
            ));
        }
        t.data_mut().copy_from_slice(data);
        Ok(())
    }
}

/// A tape plus the parameters bound onto it.
///
/// Each parameter becomes at most one leaf per session, so repeated uses
/// accumulate into a single gradient.
pub struct Session<'p, F> {
    pub tape: Tape<F>,
    store: &'p ParamStore<F>,
    bound: Vec<Option<Var>>,
}

impl<'p, F: Scalar> Session<'p, F> {
    pub fn new(store: &'p ParamStore<F>) -> Self {
        Self {
            tape: Tape::new(),
            store,
            bound: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &'p ParamStore<F> {
        self.store
    }

    pub fn param(&mut self, id: ParamId) -> Result<Var> {
        if let Some(v) = self.bound[id.0] {
            return Ok(v);
        }
        let v = self.tape.leaf(self.store.get(id).clone())?;
        self.bound[id.0] = Some(v);
        Ok(v)
    }

    pub fn constant(&mut self, t: Tensor<F>) -> Result<Var> {
        self.tape.constant(t)
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        self.tape.value(v)
    }

    /// Per-parameter gradients in store order; unused parameters get zeros.
    pub fn param_grads(&self, grads: &Gradients<F>) -> Vec<Vec<F>> {
        self.bound
            .iter()
            .enumerate()
            .map(|(i, b)| match b.and_then(|v| grads.get(v)) {
                Some(g) => g.to_vec(),
                None => vec![F::zero(); self.store.tensors[i].len()],
            })
            .collect()
    }

    /// Backward from `loss`, returning parameter gradients.
    pub fn backward(&self, loss: Var) -> Result<Vec<Vec<F>>> {
        let g = self.tape.backward(loss)?;
        Ok(self.param_grads(&g))
    }
}
