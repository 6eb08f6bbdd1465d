//! Parameterized layers, weight initialization and the Adam optimizer.

mod adam;
mod layers;
mod params;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use layers::{forward, instance_norm, output_len, ConvGeometry, LayerSpec, NORM_EPS};
pub use params::{Bound, ParamKind, ParamStore};
