use indexmap::IndexMap;

use crate::autodiff::{Gradients, Tape, Tensor, Var};
use crate::dataset::SeededRng;
use crate::error::{Error, Result};

/// Role of a parameter, which decides its initial value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    ConvWeight,
    Bias,
    NormScale,
    NormShift,
}

#[derive(Clone, Debug)]
struct Param {
    kind: ParamKind,
    value: Tensor,
}

/// Named parameters in insertion order.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: IndexMap<String, Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a zero-filled parameter.
    pub fn declare(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        kind: ParamKind,
    ) -> Result<()> {
        let name = name.into();
        if self.params.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter `{name}`")));
        }
        self.params.insert(
            name,
            Param {
                kind,
                value: Tensor::zeros(shape),
            },
        );
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name).map(|p| &p.value)
    }

    pub fn kind(&self, name: &str) -> Option<ParamKind> {
        self.params.get(name).map(|p| p.kind)
    }

    /// Replaces a parameter's values, keeping its shape.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let p = self
            .params
            .get_mut(name)
            .ok_or_else(|| Error::Config(format!("unknown parameter `{name}`")))?;
        if p.value.shape() != value.shape() {
            return Err(Error::ShapeMismatch {
                op: "set parameter",
                left: p.value.shape().to_vec(),
                right: value.shape().to_vec(),
            });
        }
        p.value = value;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(n, p)| (n.as_str(), &p.value))
    }

    pub(crate) fn values_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.params.values_mut().map(|p| &mut p.value)
    }

    pub fn numel(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }

    /// Conv weights ~ N(0, 0.02), biases and shifts 0, norm scales 1.
    /// Draws one Gaussian per conv-weight element in insertion order.
    pub fn init_weights(&mut self, rng: &mut SeededRng) {
        for p in self.params.values_mut() {
            let fill = match p.kind {
                ParamKind::ConvWeight => {
                    p.value
                        .data_mut()
                        .iter_mut()
                        .for_each(|w| *w = rng.gauss(0.0, 0.02));
                    continue;
                }
                ParamKind::Bias | ParamKind::NormShift => 0.0,
                ParamKind::NormScale => 1.0,
            };
            p.value.data_mut().fill(fill);
        }
    }

    /// Records every parameter as a gradient-receiving leaf.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        self.bind_with(tape, true)
    }

    /// Records every parameter as a constant (no gradient).
    pub fn bind_frozen(&self, tape: &mut Tape) -> Bound {
        self.bind_with(tape, false)
    }

    fn bind_with(&self, tape: &mut Tape, trainable: bool) -> Bound {
        let vars = self
            .params
            .iter()
            .map(|(name, p)| {
                let v = if trainable {
                    tape.leaf(p.value.clone())
                } else {
                    tape.constant(p.value.clone())
                };
                (name.clone(), v)
            })
            .collect();
        Bound { vars }
    }
}

/// A [`ParamStore`]'s parameters as recorded on one tape.
pub struct Bound {
    vars: IndexMap<String, Var>,
}

impl Bound {
    pub fn var(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::Config(format!("parameter `{name}` not bound")))
    }

    /// Gradients in store order, zero-filled for parameters the root does
    /// not depend on.
    pub fn gradients(&self, tape: &Tape, grads: &Gradients) -> Vec<Vec<f64>> {
        self.vars
            .values()
            .map(|&v| grads.get_or_zero(tape, v))
            .collect()
    }
}
