//! The 3-level 1D U-Net generator and the 1D PatchGAN discriminator.
//!
//! Both use wide kernels (default 16 with stride 2) and
//! `pad = (kernel - stride) / 2`, so every strided layer maps length `L`
//! to exactly `L / stride` and every transposed layer back to `L * stride`.

use crate::autodiff::{Activation, Tape, Tensor, Var};
use crate::dataset::SeededRng;
use crate::error::{Error, Result};
use crate::nn::{self, Bound, ConvGeometry, LayerSpec, ParamStore};

pub const LEVELS: usize = 3;
const LEAKY_SLOPE: f64 = 0.2;
/// Kernel of the discriminator's final stride-1 projection.
pub const PROJECTION_KERNEL: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GeneratorArch {
    pub length: usize,
    pub base_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl Default for GeneratorArch {
    fn default() -> Self {
        Self {
            length: 128,
            base_channels: 32,
            kernel: 16,
            stride: 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiscriminatorArch {
    pub length: usize,
    pub base_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl Default for DiscriminatorArch {
    fn default() -> Self {
        Self {
            length: 128,
            base_channels: 32,
            kernel: 16,
            stride: 2,
        }
    }
}

fn same_padding(kernel: usize, stride: usize) -> Result<usize> {
    if stride == 0 || kernel < stride || !(kernel - stride).is_multiple_of(2) {
        return Err(Error::Config(format!(
            "kernel {kernel} with stride {stride} needs integral padding (kernel - stride must be even and non-negative)"
        )));
    }
    Ok((kernel - stride) / 2)
}

fn conv(
    name: String,
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
) -> LayerSpec {
    LayerSpec::ConvDown {
        name,
        geom: ConvGeometry {
            in_ch,
            out_ch,
            kernel,
            stride,
            pad,
        },
        bias: true,
    }
}

fn conv_up(
    name: String,
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
) -> LayerSpec {
    LayerSpec::ConvUp {
        name,
        geom: ConvGeometry {
            in_ch,
            out_ch,
            kernel,
            stride,
            pad,
        },
        bias: true,
    }
}

fn norm(name: String, channels: usize) -> LayerSpec {
    LayerSpec::InstanceNorm { name, channels }
}

/// U-Net generator. `down[i]` and `up[i]` are level `i + 1` (outermost first).
#[derive(Clone, Debug)]
pub struct Generator {
    pub arch: GeneratorArch,
    down: Vec<Vec<LayerSpec>>,
    up: Vec<Vec<LayerSpec>>,
    head: Vec<LayerSpec>,
}

/// Builds the generator and a freshly initialized parameter store whose
/// names all start with `prefix`.
pub fn build_generator(
    arch: GeneratorArch,
    prefix: &str,
    rng: &mut SeededRng,
) -> Result<(Generator, ParamStore)> {
    let gen = Generator::new(arch, prefix)?;
    let mut store = ParamStore::new();
    for layer in gen.layers() {
        layer.declare(&mut store)?;
    }
    store.init_weights(rng);
    Ok((gen, store))
}

impl Generator {
    pub fn new(arch: GeneratorArch, prefix: &str) -> Result<Self> {
        let GeneratorArch {
            length,
            base_channels: c,
            kernel: k,
            stride: s,
        } = arch;
        let pad = same_padding(k, s)?;
        if c == 0 || length == 0 || length % s.pow(LEVELS as u32) != 0 {
            return Err(Error::Config(format!(
                "generator length {length} must be a positive multiple of stride^{LEVELS} = {}",
                s.pow(LEVELS as u32)
            )));
        }
        let widths = [1, c, 2 * c, 4 * c];
        let down = (0..LEVELS)
            .map(|i| {
                let name = format!("{prefix}.down{}", i + 1);
                vec![
                    conv(name.clone(), widths[i], widths[i + 1], k, s, pad),
                    LayerSpec::Activation(Activation::LeakyRelu(LEAKY_SLOPE)),
                    norm(format!("{name}.norm"), widths[i + 1]),
                ]
            })
            .collect();
        // Level i's up path receives the level i+1 output concatenated with
        // the level i+1 skip (except the innermost, which sees the bottleneck).
        let up = (0..LEVELS)
            .map(|i| {
                let name = format!("{prefix}.up{}", i + 1);
                let in_ch = if i == LEVELS - 1 {
                    widths[LEVELS]
                } else {
                    2 * widths[i + 1]
                };
                let out_ch = widths[i.max(1)];
                vec![
                    conv_up(name.clone(), in_ch, out_ch, k, s, pad),
                    LayerSpec::Activation(Activation::Relu),
                    norm(format!("{name}.norm"), out_ch),
                ]
            })
            .collect();
        let head_kernel = k - s + 1;
        let head = vec![
            conv(format!("{prefix}.out"), c, 1, head_kernel, 1, pad),
            LayerSpec::Activation(Activation::Tanh),
        ];
        Ok(Self {
            arch,
            down,
            up,
            head,
        })
    }

    pub fn layers(&self) -> impl Iterator<Item = &LayerSpec> {
        self.down
            .iter()
            .flatten()
            .chain(self.up.iter().flatten())
            .chain(&self.head)
    }

    /// Per-level feature lengths on the way down, input first.
    pub fn level_lengths(&self) -> Result<Vec<usize>> {
        let mut lens = vec![self.arch.length];
        for block in &self.down {
            lens.push(nn::output_len(block, *lens.last().unwrap())?);
        }
        Ok(lens)
    }

    pub fn forward(&self, params: &Bound, tape: &mut Tape, x: Var) -> Result<Var> {
        let len = tape.value(x).shape().get(1).copied();
        if tape.value(x).shape().len() != 2
            || tape.value(x).shape()[0] != 1
            || len != Some(self.arch.length)
        {
            return Err(Error::ShapeMismatch {
                op: "generator",
                left: tape.value(x).shape().to_vec(),
                right: vec![1, self.arch.length],
            });
        }
        let mut skips = Vec::with_capacity(LEVELS);
        let mut h = x;
        for block in &self.down {
            h = nn::forward(block, params, tape, h)?;
            skips.push(h);
        }
        for i in (0..LEVELS).rev() {
            if i < LEVELS - 1 {
                h = tape.concat_channels(h, skips[i])?;
            }
            h = nn::forward(&self.up[i], params, tape, h)?;
        }
        nn::forward(&self.head, params, tape, h)
    }
}

/// Translates one `[1, L]` signal with frozen parameters.
pub fn generate(gen: &Generator, store: &ParamStore, x: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let params = store.bind_frozen(&mut tape);
    let input = tape.constant(x.clone());
    let out = gen.forward(&params, &mut tape, input)?;
    Ok(tape.value(out).clone())
}

/// PatchGAN discriminator producing a `[1, P]` map of raw patch scores.
#[derive(Clone, Debug)]
pub struct Discriminator {
    pub arch: DiscriminatorArch,
    layers: Vec<LayerSpec>,
}

pub fn build_discriminator(
    arch: DiscriminatorArch,
    prefix: &str,
    rng: &mut SeededRng,
) -> Result<(Discriminator, ParamStore)> {
    let disc = Discriminator::new(arch, prefix)?;
    let mut store = ParamStore::new();
    for layer in &disc.layers {
        layer.declare(&mut store)?;
    }
    store.init_weights(rng);
    Ok((disc, store))
}

impl Discriminator {
    pub fn new(arch: DiscriminatorArch, prefix: &str) -> Result<Self> {
        let DiscriminatorArch {
            length,
            base_channels: c,
            kernel: k,
            stride: s,
        } = arch;
        let pad = same_padding(k, s)?;
        if c == 0 {
            return Err(Error::Config(
                "discriminator needs base_channels > 0".into(),
            ));
        }
        let widths = [1, c, 2 * c, 4 * c];
        let mut layers = Vec::new();
        for i in 0..LEVELS {
            let name = format!("{prefix}.conv{}", i + 1);
            layers.push(conv(name.clone(), widths[i], widths[i + 1], k, s, pad));
            layers.push(LayerSpec::Activation(Activation::LeakyRelu(LEAKY_SLOPE)));
            if i > 0 {
                layers.push(norm(format!("{name}.norm"), widths[i + 1]));
            }
        }
        layers.push(conv(
            format!("{prefix}.proj"),
            4 * c,
            1,
            PROJECTION_KERNEL,
            1,
            PROJECTION_KERNEL / 2,
        ));
        let disc = Self { arch, layers };
        let patches = disc.patch_len().map_err(|_| {
            Error::Config(format!(
                "discriminator geometry invalid for length {length}"
            ))
        })?;
        if patches < 2 {
            return Err(Error::Config(format!(
                "discriminator patch map has length {patches} for input length {length}; need at least 2"
            )));
        }
        Ok(disc)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn patch_len(&self) -> Result<usize> {
        nn::output_len(&self.layers, self.arch.length)
    }

    /// Number of input samples that influence a single patch score.
    pub fn receptive_field(&self) -> usize {
        let mut rf = 1;
        let mut jump = 1;
        for layer in &self.layers {
            if let LayerSpec::ConvDown { geom, .. } = layer {
                rf += (geom.kernel - 1) * jump;
                jump *= geom.stride;
            }
        }
        rf
    }

    pub fn forward(&self, params: &Bound, tape: &mut Tape, x: Var) -> Result<Var> {
        let shape = tape.value(x).shape();
        if shape != [1, self.arch.length] {
            return Err(Error::ShapeMismatch {
                op: "discriminator",
                left: shape.to_vec(),
                right: vec![1, self.arch.length],
            });
        }
        nn::forward(&self.layers, params, tape, x)
    }
}
