//! Unpaired CycleGAN training: least-squares adversarial losses, L1
//! cycle consistency, and the per-epoch loop.

use std::time::Instant;

use crate::autodiff::{Activation, Tape, Tensor, Var};
use crate::dataset::{parse_value, SeededRng, SignalDataset};
use crate::error::{Error, Result};
use crate::eval::{Direction, Translator};
use crate::models::{
    build_discriminator, build_generator, generate, Discriminator, DiscriminatorArch, Generator,
    GeneratorArch,
};
use crate::nn::{adam_step, AdamConfig, AdamState, ParamStore};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lambda_cycle: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Weight of the optional identity terms; 0 disables them.
    pub identity_weight: f64,
    /// Capacity of the generated-sample replay pool; 0 disables it.
    pub pool_size: usize,
    pub base_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda_cycle: 10.0,
            beta1: 0.5,
            beta2: 0.999,
            lr: 2e-4,
            epochs: 100,
            batch_size: 1,
            identity_weight: 0.0,
            pool_size: 0,
            base_channels: 32,
            kernel: 16,
            stride: 2,
            seed: 0,
        }
    }
}

pub(crate) const TRAIN_KEYS: [&str; 12] = [
    "lambda_cycle",
    "beta1",
    "beta2",
    "lr",
    "epochs",
    "batch_size",
    "identity_weight",
    "pool_size",
    "base_channels",
    "kernel",
    "stride",
    "train_seed",
];

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.lambda_cycle > 0.0 && self.lambda_cycle.is_finite()) {
            return fail(format!(
                "lambda_cycle {} must be positive",
                self.lambda_cycle
            ));
        }
        if self.batch_size != 1 {
            return fail(format!(
                "batch_size {} unsupported; only 1 is",
                self.batch_size
            ));
        }
        if self.epochs < 1 {
            return fail("epochs must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return fail("beta1 and beta2 must lie in [0, 1)".into());
        }
        if self.lr.is_nan() || self.lr <= 0.0 || self.identity_weight < 0.0 {
            return fail("lr must be positive and identity_weight non-negative".into());
        }
        Ok(())
    }

    /// Sets one field from its config-file spelling; `false` for foreign keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "lambda_cycle" => self.lambda_cycle = parse_value(key, value)?,
            "beta1" => self.beta1 = parse_value(key, value)?,
            "beta2" => self.beta2 = parse_value(key, value)?,
            "lr" => self.lr = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "identity_weight" => self.identity_weight = parse_value(key, value)?,
            "pool_size" => self.pool_size = parse_value(key, value)?,
            "base_channels" => self.base_channels = parse_value(key, value)?,
            "kernel" => self.kernel = parse_value(key, value)?,
            "stride" => self.stride = parse_value(key, value)?,
            "train_seed" => self.seed = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn to_lines(&self) -> Vec<String> {
        let values = [
            self.lambda_cycle.to_string(),
            self.beta1.to_string(),
            self.beta2.to_string(),
            self.lr.to_string(),
            self.epochs.to_string(),
            self.batch_size.to_string(),
            self.identity_weight.to_string(),
            self.pool_size.to_string(),
            self.base_channels.to_string(),
            self.kernel.to_string(),
            self.stride.to_string(),
            self.seed.to_string(),
        ];
        TRAIN_KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}"))
            .collect()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: 1e-8,
        }
    }

    pub fn generator_arch(&self, length: usize) -> GeneratorArch {
        GeneratorArch {
            length,
            base_channels: self.base_channels,
            kernel: self.kernel,
            stride: self.stride,
        }
    }

    pub fn discriminator_arch(&self, length: usize) -> DiscriminatorArch {
        DiscriminatorArch {
            length,
            base_channels: self.base_channels,
            kernel: self.kernel,
            stride: self.stride,
        }
    }
}

/// A network with its parameters and optimizer state.
#[derive(Clone, Debug)]
pub struct Network<N> {
    pub net: N,
    pub params: ParamStore,
    pub opt: AdamState,
}

impl<N> Network<N> {
    pub fn new(net: N, params: ParamStore, adam: AdamConfig) -> Self {
        let opt = AdamState::new(&params, adam);
        Self { net, params, opt }
    }
}

/// Replay pool of previously generated samples shown to a discriminator.
#[derive(Clone, Debug)]
pub struct SamplePool {
    capacity: usize,
    items: Vec<Vec<f64>>,
}

impl SamplePool {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            items: Vec::new(),
        }
    }

    /// Returns the sample to show the discriminator. Until full, the pool
    /// stores and returns `sample`; afterwards, with probability 1/2 it
    /// swaps `sample` for a random stored one.
    pub fn query(&mut self, sample: Vec<f64>, rng: &mut SeededRng) -> Vec<f64> {
        if self.capacity == 0 {
            return sample;
        }
        if self.items.len() < self.capacity {
            self.items.push(sample.clone());
            return sample;
        }
        if rng.next_f64() < 0.5 {
            let i = rng.index(self.capacity);
            std::mem::replace(&mut self.items[i], sample)
        } else {
            sample
        }
    }
}

#[derive(Clone, Debug)]
struct Replay {
    rng: SeededRng,
    pool_x: SamplePool,
    pool_y: SamplePool,
}

/// G: X→Y, F: Y→X and the two discriminators, each with its own Adam state.
#[derive(Clone, Debug)]
pub struct CycleGanModel {
    pub g: Network<Generator>,
    pub f: Network<Generator>,
    pub d_x: Network<Discriminator>,
    pub d_y: Network<Discriminator>,
    replay: Replay,
}

/// Parameter-name prefixes of the four networks.
pub const PREFIXES: [&str; 4] = ["g", "f", "dx", "dy"];

impl CycleGanModel {
    /// Builds and initializes all four networks from `cfg.seed`, drawing
    /// weights for G, F, D_X, D_Y in that order.
    pub fn new(cfg: &TrainConfig, length: usize) -> Result<Self> {
        let mut rng = SeededRng::new(cfg.seed);
        let (g, gp) = build_generator(cfg.generator_arch(length), PREFIXES[0], &mut rng)?;
        let (f, fp) = build_generator(cfg.generator_arch(length), PREFIXES[1], &mut rng)?;
        let (dx, dxp) = build_discriminator(cfg.discriminator_arch(length), PREFIXES[2], &mut rng)?;
        let (dy, dyp) = build_discriminator(cfg.discriminator_arch(length), PREFIXES[3], &mut rng)?;
        let adam = cfg.adam();
        Ok(Self {
            g: Network::new(g, gp, adam),
            f: Network::new(f, fp, adam),
            d_x: Network::new(dx, dxp, adam),
            d_y: Network::new(dy, dyp, adam),
            replay: Replay {
                rng: SeededRng::new(cfg.seed.wrapping_add(2)),
                pool_x: SamplePool::new(cfg.pool_size),
                pool_y: SamplePool::new(cfg.pool_size),
            },
        })
    }

    pub fn length(&self) -> usize {
        self.g.net.arch.length
    }

    pub fn stores(&self) -> [&ParamStore; 4] {
        [
            &self.g.params,
            &self.f.params,
            &self.d_x.params,
            &self.d_y.params,
        ]
    }

    pub fn stores_mut(&mut self) -> [&mut ParamStore; 4] {
        [
            &mut self.g.params,
            &mut self.f.params,
            &mut self.d_x.params,
            &mut self.d_y.params,
        ]
    }

    /// Every parameter of all four networks.
    pub fn params(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.stores().into_iter().flat_map(ParamStore::iter)
    }

    pub fn set_param(&mut self, name: &str, value: Tensor) -> Result<()> {
        let prefix = name.split('.').next().unwrap_or("");
        let idx = PREFIXES
            .iter()
            .position(|p| *p == prefix)
            .ok_or_else(|| Error::Config(format!("parameter `{name}` belongs to no network")))?;
        self.stores_mut()[idx].set(name, value)
    }

    pub fn translate_tensor(&self, x: &Tensor, direction: Direction) -> Result<Tensor> {
        match direction {
            Direction::XToY => generate(&self.g.net, &self.g.params, x),
            Direction::YToX => generate(&self.f.net, &self.f.params, x),
        }
    }
}

impl Translator for CycleGanModel {
    fn translate(&self, signal: &[f64], direction: Direction) -> Result<Vec<f64>> {
        Ok(self
            .translate_tensor(&Tensor::signal(signal), direction)?
            .into_data())
    }
}

fn squared_distance_mean(tape: &mut Tape, scores: Var, target: f64) -> Result<Var> {
    let diff = tape.add_scalar(scores, -target);
    let sq = tape.activation(Activation::Square, diff);
    tape.mean(sq)
}

/// `mean((d_fake - 1)^2)`: the generator's least-squares adversarial term.
pub fn lsgan_generator_loss(tape: &mut Tape, d_fake: Var) -> Result<Var> {
    squared_distance_mean(tape, d_fake, 1.0)
}

/// `0.5 * mean((d_real - 1)^2) + 0.5 * mean(d_fake^2)`.
pub fn lsgan_discriminator_loss(tape: &mut Tape, d_real: Var, d_fake: Var) -> Result<Var> {
    if tape.value(d_real).shape() != tape.value(d_fake).shape() {
        return Err(Error::ShapeMismatch {
            op: "lsgan",
            left: tape.value(d_real).shape().to_vec(),
            right: tape.value(d_fake).shape().to_vec(),
        });
    }
    let real = squared_distance_mean(tape, d_real, 1.0)?;
    let fake = squared_distance_mean(tape, d_fake, 0.0)?;
    let sum = tape.add(real, fake)?;
    Ok(tape.mul_scalar(sum, 0.5))
}

/// Both least-squares terms for one pair of patch maps: (loss_d, loss_g).
pub fn lsgan_losses(tape: &mut Tape, d_real: Var, d_fake: Var) -> Result<(Var, Var)> {
    let d = lsgan_discriminator_loss(tape, d_real, d_fake)?;
    let g = lsgan_generator_loss(tape, d_fake)?;
    Ok((d, g))
}

/// `mean |a - b|`.
pub fn l1_mean(tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
    let diff = tape.sub(a, b)?;
    let abs = tape.activation(Activation::Abs, diff);
    tape.mean(abs)
}

/// Unweighted roundtrip error `mean|F(G(x)) - x| + mean|G(F(y)) - y|`.
pub fn cycle_loss(tape: &mut Tape, x: Var, rec_x: Var, y: Var, rec_y: Var) -> Result<Var> {
    let cx = l1_mean(tape, rec_x, x)?;
    let cy = l1_mean(tape, rec_y, y)?;
    tape.add(cx, cy)
}

/// Loss values recorded during one training step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepLosses {
    /// LSGAN term for D_Y(G(x)).
    pub adv_g: f64,
    /// LSGAN term for D_X(F(y)).
    pub adv_f: f64,
    pub cycle_x: f64,
    pub cycle_y: f64,
    /// `lambda_cycle * (cycle_x + cycle_y)` as added to the generator objective.
    pub cycle_weighted: f64,
    pub identity: f64,
    pub generator_total: f64,
    pub d_x: f64,
    pub d_y: f64,
}

fn finite(term: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            term: term.to_string(),
            epoch: 0,
            step: 0,
        })
    }
}

/// Output of the generator half of a step: losses plus the pre-update
/// fakes `F(y)` and `G(x)` for the discriminators.
pub struct GeneratorUpdate {
    pub losses: StepLosses,
    pub fake_x: Vec<f64>,
    pub fake_y: Vec<f64>,
}

/// One joint Adam update of G and F. The discriminators are read as constants.
pub fn update_generators(
    model: &mut CycleGanModel,
    x: &[f64],
    y: &[f64],
    cfg: &TrainConfig,
) -> Result<GeneratorUpdate> {
    let mut tape = Tape::new();
    let gp = model.g.params.bind(&mut tape);
    let fp = model.f.params.bind(&mut tape);
    let dxp = model.d_x.params.bind_frozen(&mut tape);
    let dyp = model.d_y.params.bind_frozen(&mut tape);
    let xv = tape.constant(Tensor::signal(x));
    let yv = tape.constant(Tensor::signal(y));

    let fake_y = model.g.net.forward(&gp, &mut tape, xv)?;
    let rec_x = model.f.net.forward(&fp, &mut tape, fake_y)?;
    let fake_x = model.f.net.forward(&fp, &mut tape, yv)?;
    let rec_y = model.g.net.forward(&gp, &mut tape, fake_x)?;

    let score_y = model.d_y.net.forward(&dyp, &mut tape, fake_y)?;
    let adv_g = lsgan_generator_loss(&mut tape, score_y)?;
    let score_x = model.d_x.net.forward(&dxp, &mut tape, fake_x)?;
    let adv_f = lsgan_generator_loss(&mut tape, score_x)?;

    let cycle_x = l1_mean(&mut tape, rec_x, xv)?;
    let cycle_y = l1_mean(&mut tape, rec_y, yv)?;
    let cycle = tape.add(cycle_x, cycle_y)?;
    let cycle_weighted = tape.mul_scalar(cycle, cfg.lambda_cycle);

    let adv = tape.add(adv_g, adv_f)?;
    let mut total = tape.add(adv, cycle_weighted)?;
    let mut identity = 0.0;
    if cfg.identity_weight > 0.0 {
        let same_y = model.g.net.forward(&gp, &mut tape, yv)?;
        let same_x = model.f.net.forward(&fp, &mut tape, xv)?;
        let iy = l1_mean(&mut tape, same_y, yv)?;
        let ix = l1_mean(&mut tape, same_x, xv)?;
        let idt = tape.add(iy, ix)?;
        let idt = tape.mul_scalar(idt, cfg.identity_weight);
        identity = finite("identity loss", tape.value(idt).item())?;
        total = tape.add(total, idt)?;
    }

    let val = |v: Var| tape.value(v).item();
    let losses = StepLosses {
        adv_g: finite("adversarial loss G (D_Y(G(x)))", val(adv_g))?,
        adv_f: finite("adversarial loss F (D_X(F(y)))", val(adv_f))?,
        cycle_x: finite("cycle loss x -> G -> F", val(cycle_x))?,
        cycle_y: finite("cycle loss y -> F -> G", val(cycle_y))?,
        cycle_weighted: finite("weighted cycle loss", val(cycle_weighted))?,
        identity,
        generator_total: finite("generator objective", val(total))?,
        ..Default::default()
    };

    let grads = tape.backward(total)?;
    let g_grads = gp.gradients(&tape, &grads);
    let f_grads = fp.gradients(&tape, &grads);
    let fake_x = tape.value(fake_x).data().to_vec();
    let fake_y = tape.value(fake_y).data().to_vec();
    drop(grads);
    drop(tape);
    adam_step(&mut model.g.params, &g_grads, &mut model.g.opt)?;
    adam_step(&mut model.f.params, &f_grads, &mut model.f.opt)?;
    Ok(GeneratorUpdate {
        losses,
        fake_x,
        fake_y,
    })
}

/// One Adam update of a discriminator on a real sample and a detached fake.
/// Returns the discriminator loss.
pub fn update_discriminator(
    disc: &mut Network<Discriminator>,
    real: &[f64],
    fake: &[f64],
) -> Result<f64> {
    let mut tape = Tape::new();
    let params = disc.params.bind(&mut tape);
    let real_v = tape.constant(Tensor::signal(real));
    let fake_v = tape.constant(Tensor::signal(fake));
    let real_scores = disc.net.forward(&params, &mut tape, real_v)?;
    let fake_scores = disc.net.forward(&params, &mut tape, fake_v)?;
    let loss = lsgan_discriminator_loss(&mut tape, real_scores, fake_scores)?;
    let value = finite("discriminator loss", tape.value(loss).item())?;
    let grads = tape.backward(loss)?;
    let g = params.gradients(&tape, &grads);
    adam_step(&mut disc.params, &g, &mut disc.opt)?;
    Ok(value)
}

/// Generators first, then D_X on (x, F(y)), then D_Y on (y, G(x)).
pub fn train_step(
    model: &mut CycleGanModel,
    x: &[f64],
    y: &[f64],
    cfg: &TrainConfig,
) -> Result<StepLosses> {
    let GeneratorUpdate {
        mut losses,
        fake_x,
        fake_y,
    } = update_generators(model, x, y, cfg)?;
    let replay = &mut model.replay;
    let fake_x = replay.pool_x.query(fake_x, &mut replay.rng);
    let fake_y = replay.pool_y.query(fake_y, &mut replay.rng);
    losses.d_x = update_discriminator(&mut model.d_x, x, &fake_x)?;
    losses.d_y = update_discriminator(&mut model.d_y, y, &fake_y)?;
    Ok(losses)
}

/// Per-epoch means of the step losses.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub adv_g: f64,
    pub adv_f: f64,
    pub d_x: f64,
    pub d_y: f64,
    pub cycle_x: f64,
    pub cycle_y: f64,
    pub seconds: f64,
}

impl EpochLog {
    pub fn cycle(&self) -> f64 {
        self.cycle_x + self.cycle_y
    }
}

pub const LOSS_CSV_HEADER: &str = "epoch,adv_g,adv_f,d_x,d_y,cycle_x,cycle_y";

/// CSV of the loss columns (wall-clock time excluded).
pub fn losses_csv(logs: &[EpochLog]) -> String {
    let mut out = String::from(LOSS_CSV_HEADER);
    out.push('\n');
    for l in logs {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            l.epoch, l.adv_g, l.adv_f, l.d_x, l.d_y, l.cycle_x, l.cycle_y
        ));
    }
    out
}

pub fn train(
    model: &mut CycleGanModel,
    data: &SignalDataset,
    cfg: &TrainConfig,
) -> Result<Vec<EpochLog>> {
    train_with(model, data, cfg, |_| {})
}

/// Runs `cfg.epochs` epochs. Each epoch visits every X window once in a
/// shuffled order and pairs it with an independently shuffled Y window.
/// `on_epoch` sees each log as it is produced.
pub fn train_with(
    model: &mut CycleGanModel,
    data: &SignalDataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<Vec<EpochLog>> {
    if cfg.epochs == 0 {
        return Ok(Vec::new());
    }
    cfg.validate()?;
    let (nx, ny) = (data.train_x.len(), data.train_y.len());
    if nx == 0 || ny == 0 {
        return Err(Error::Config(
            "training needs at least one sample per domain".into(),
        ));
    }
    let mut rng = SeededRng::new(cfg.seed.wrapping_add(1));
    let mut logs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let order_x = rng.permutation(nx);
        let order_y = rng.permutation(ny);
        let mut sum = StepLosses::default();
        for (step, &ix) in order_x.iter().enumerate() {
            let iy = order_y[step % ny];
            let s =
                train_step(model, &data.train_x[ix], &data.train_y[iy], cfg).map_err(
                    |e| match e {
                        Error::NonFinite { term, .. } => Error::NonFinite { term, epoch, step },
                        other => other,
                    },
                )?;
            sum.adv_g += s.adv_g;
            sum.adv_f += s.adv_f;
            sum.d_x += s.d_x;
            sum.d_y += s.d_y;
            sum.cycle_x += s.cycle_x;
            sum.cycle_y += s.cycle_y;
        }
        let n = nx as f64;
        let log = EpochLog {
            epoch,
            adv_g: sum.adv_g / n,
            adv_f: sum.adv_f / n,
            d_x: sum.d_x / n,
            d_y: sum.d_y / n,
            cycle_x: sum.cycle_x / n,
            cycle_y: sum.cycle_y / n,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&log);
        logs.push(log);
    }
    Ok(logs)
}
