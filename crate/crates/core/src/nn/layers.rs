use super::params::{Bound, ParamKind, ParamStore};
use crate::autodiff::{ops, Activation, Tape, Var};
use crate::error::Result;

/// Epsilon added to the variance in every instance-norm layer.
pub const NORM_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

/// One step of a sequential network. Parameterized layers carry the name
/// prefix of their entries in the [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub enum LayerSpec {
    /// Strided `conv1d`; weight `[out, in, k]`.
    ConvDown {
        name: String,
        geom: ConvGeometry,
        bias: bool,
    },
    /// `conv_transpose1d`; weight `[in, out, k]`.
    ConvUp {
        name: String,
        geom: ConvGeometry,
        bias: bool,
    },
    InstanceNorm {
        name: String,
        channels: usize,
    },
    Activation(Activation),
}

impl LayerSpec {
    /// Adds this layer's parameters to `store`.
    pub fn declare(&self, store: &mut ParamStore) -> Result<()> {
        match self {
            LayerSpec::ConvDown { name, geom, bias } | LayerSpec::ConvUp { name, geom, bias } => {
                let shape = if matches!(self, LayerSpec::ConvDown { .. }) {
                    [geom.out_ch, geom.in_ch, geom.kernel]
                } else {
                    [geom.in_ch, geom.out_ch, geom.kernel]
                };
                store.declare(format!("{name}.weight"), &shape, ParamKind::ConvWeight)?;
                if *bias {
                    store.declare(format!("{name}.bias"), &[geom.out_ch], ParamKind::Bias)?;
                }
            }
            LayerSpec::InstanceNorm { name, channels } => {
                store.declare(format!("{name}.scale"), &[*channels], ParamKind::NormScale)?;
                store.declare(format!("{name}.shift"), &[*channels], ParamKind::NormShift)?;
            }
            LayerSpec::Activation(_) => {}
        }
        Ok(())
    }

    /// Output length for an input of length `len`.
    pub fn output_len(&self, len: usize) -> Result<usize> {
        match self {
            LayerSpec::ConvDown { geom, .. } => {
                ops::conv1d_len(len, geom.kernel, geom.stride, geom.pad)
            }
            LayerSpec::ConvUp { geom, .. } => {
                ops::conv_transpose1d_len(len, geom.kernel, geom.stride, geom.pad)
            }
            _ => Ok(len),
        }
    }

    pub fn apply(&self, params: &Bound, tape: &mut Tape, x: Var) -> Result<Var> {
        match self {
            LayerSpec::ConvDown { name, geom, bias } => {
                let w = params.var(&format!("{name}.weight"))?;
                let b = bias
                    .then(|| params.var(&format!("{name}.bias")))
                    .transpose()?;
                tape.conv1d(x, w, b, geom.stride, geom.pad)
            }
            LayerSpec::ConvUp { name, geom, bias } => {
                let w = params.var(&format!("{name}.weight"))?;
                let b = bias
                    .then(|| params.var(&format!("{name}.bias")))
                    .transpose()?;
                tape.conv_transpose1d(x, w, b, geom.stride, geom.pad)
            }
            LayerSpec::InstanceNorm { name, .. } => instance_norm(
                tape,
                x,
                params.var(&format!("{name}.scale"))?,
                params.var(&format!("{name}.shift"))?,
            ),
            LayerSpec::Activation(kind) => Ok(tape.activation(*kind, x)),
        }
    }
}

/// Instance normalization with the crate-wide epsilon.
pub fn instance_norm(tape: &mut Tape, x: Var, scale: Var, shift: Var) -> Result<Var> {
    tape.instance_norm(x, scale, shift, NORM_EPS)
}

/// Applies `layers` in order; an empty list is the identity.
pub fn forward(layers: &[LayerSpec], params: &Bound, tape: &mut Tape, x: Var) -> Result<Var> {
    layers
        .iter()
        .try_fold(x, |h, layer| layer.apply(params, tape, h))
}

/// Composed output length of `layers`.
pub fn output_len(layers: &[LayerSpec], len: usize) -> Result<usize> {
    layers.iter().try_fold(len, |l, layer| layer.output_len(l))
}
