#![allow(dead_code)]

use sig2sig::autodiff::{Activation, BinaryOp, Tape, Tensor, Var};
use sig2sig::dataset::SeededRng;
use sig2sig::models::{build_discriminator, build_generator, DiscriminatorArch, GeneratorArch};
use sig2sig::nn::ParamStore;
use sig2sig::Result;

pub const H: f64 = 1e-6;

type Forward = Box<dyn Fn(&sig2sig::nn::Bound, &mut Tape, Var) -> Result<Var>>;

type Build = Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var>>;

pub struct Instance {
    pub inputs: Vec<Tensor>,
    pub build: Build,
}

pub fn random_tensor(rng: &mut SeededRng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.uniform(lo, hi)).collect(),
    )
    .unwrap()
}

/// Values bounded away from zero, so kinks and poles stay out of reach of `H`.
pub fn away_from_zero(rng: &mut SeededRng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.uniform(0.1, 1.5);
            if rng.next_f64() < 0.5 {
                -m
            } else {
                m
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-12)
}

/// `sum(build(inputs) * weights)`, evaluated without recording gradients.
fn loss_value(inst: &Instance, inputs: &[Tensor], weights: &Tensor) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
    let out = (inst.build)(&mut tape, &vars).unwrap();
    weighted_sum(&mut tape, out, weights)
}

fn weighted_sum(tape: &mut Tape, out: Var, weights: &Tensor) -> f64 {
    let w = tape.constant(weights.clone());
    let prod = tape.mul(out, w).unwrap();
    let s = tape.sum(prod).unwrap();
    tape.value(s).item()
}

/// Relative error between reverse-mode and per-element central-difference
/// gradients of a random weighted sum of the instance's output.
pub fn check_instance(inst: &Instance, rng: &mut SeededRng) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inst.inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = (inst.build)(&mut tape, &vars).unwrap();
    let weights = random_tensor(rng, tape.value(out).shape(), -1.0, 1.0);
    let w = tape.constant(weights.clone());
    let prod = tape.mul(out, w).unwrap();
    let loss = tape.sum(prod).unwrap();
    let grads = tape.backward(loss).unwrap();

    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for (i, v) in vars.iter().enumerate() {
        analytic.extend(grads.get_or_zero(&tape, *v));
        for j in 0..inst.inputs[i].len() {
            let mut plus = inst.inputs.clone();
            plus[i].data_mut()[j] += H;
            let mut minus = inst.inputs.clone();
            minus[i].data_mut()[j] -= H;
            numeric.push(
                (loss_value(inst, &plus, &weights) - loss_value(inst, &minus, &weights))
                    / (2.0 * H),
            );
        }
    }
    relative_error(&analytic, &numeric)
}

/// One random instance of the named layer type.
pub fn layer_instance(kind: &str, rng: &mut SeededRng) -> Instance {
    let c = 1 + rng.index(3);
    let l = 2 + rng.index(10);
    let shape = [c, l];
    let act = |a: Activation| -> Build {
        Box::new(move |t: &mut Tape, v: &[Var]| Ok(t.activation(a, v[0])))
    };
    let bin = |op: BinaryOp| -> Build {
        Box::new(move |t: &mut Tape, v: &[Var]| t.elementwise(op, v[0], v[1]))
    };
    match kind {
        "add" | "sub" | "mul" | "div" => {
            let op = match kind {
                "add" => BinaryOp::Add,
                "sub" => BinaryOp::Sub,
                "mul" => BinaryOp::Mul,
                _ => BinaryOp::Div,
            };
            Instance {
                inputs: vec![
                    random_tensor(rng, &shape, -1.0, 1.0),
                    away_from_zero(rng, &shape),
                ],
                build: bin(op),
            }
        }
        "scalar_broadcast" => Instance {
            inputs: vec![
                random_tensor(rng, &shape, -1.0, 1.0),
                away_from_zero(rng, &[]),
            ],
            build: bin(BinaryOp::Div),
        },
        "scalar_constant" => {
            let (a, m) = (rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
            Instance {
                inputs: vec![random_tensor(rng, &shape, -1.0, 1.0)],
                build: Box::new(move |t, v| {
                    let s = t.add_scalar(v[0], a);
                    Ok(t.mul_scalar(s, m))
                }),
            }
        }
        "sum" => Instance {
            inputs: vec![random_tensor(rng, &shape, -1.0, 1.0)],
            build: Box::new(|t, v| t.sum(v[0])),
        },
        "mean" => Instance {
            inputs: vec![random_tensor(rng, &shape, -1.0, 1.0)],
            build: Box::new(|t, v| t.mean(v[0])),
        },
        "relu" | "leaky_relu" | "tanh" | "abs" | "square" => {
            let a = match kind {
                "relu" => Activation::Relu,
                "leaky_relu" => Activation::LeakyRelu(0.2),
                "tanh" => Activation::Tanh,
                "abs" => Activation::Abs,
                _ => Activation::Square,
            };
            Instance {
                inputs: vec![away_from_zero(rng, &shape)],
                build: act(a),
            }
        }
        "conv1d" | "conv_transpose1d" => {
            let out_c = 1 + rng.index(3);
            let k = 1 + rng.index(6);
            let s = 1 + rng.index(3);
            let p = rng.index(4);
            let len = k + rng.index(8);
            let transpose = kind == "conv_transpose1d";
            let wshape = if transpose {
                [c, out_c, k]
            } else {
                [out_c, c, k]
            };
            let need = if 2 * p + 1 > k {
                (2 * p + 1 - k).div_ceil(s) + 1
            } else {
                1
            };
            let len = if transpose { len.max(need) } else { len };
            Instance {
                inputs: vec![
                    random_tensor(rng, &[c, len], -1.0, 1.0),
                    random_tensor(rng, &wshape, -1.0, 1.0),
                    random_tensor(rng, &[out_c], -1.0, 1.0),
                ],
                build: Box::new(move |t, v| {
                    if transpose {
                        t.conv_transpose1d(v[0], v[1], Some(v[2]), s, p)
                    } else {
                        t.conv1d(v[0], v[1], Some(v[2]), s, p)
                    }
                }),
            }
        }
        "concat" => {
            let c2 = 1 + rng.index(3);
            Instance {
                inputs: vec![
                    random_tensor(rng, &shape, -1.0, 1.0),
                    random_tensor(rng, &[c2, l], -1.0, 1.0),
                ],
                build: Box::new(|t, v| t.concat_channels(v[0], v[1])),
            }
        }
        "slice" => {
            let total = c + 2;
            let start = rng.index(total);
            let end = start + 1 + rng.index(total - start);
            Instance {
                inputs: vec![random_tensor(rng, &[total, l], -1.0, 1.0)],
                build: Box::new(move |t, v| t.slice_channels(v[0], start, end)),
            }
        }
        "instance_norm" => Instance {
            inputs: vec![
                random_tensor(rng, &shape, -1.0, 1.0),
                random_tensor(rng, &[c], 0.5, 1.5),
                random_tensor(rng, &[c], -0.5, 0.5),
            ],
            build: Box::new(|t, v| t.instance_norm(v[0], v[1], v[2], 1e-5)),
        },
        other => panic!("unknown layer kind {other}"),
    }
}

pub const LAYER_KINDS: [&str; 18] = [
    "add",
    "sub",
    "mul",
    "div",
    "scalar_broadcast",
    "scalar_constant",
    "sum",
    "mean",
    "relu",
    "leaky_relu",
    "tanh",
    "abs",
    "square",
    "conv1d",
    "conv_transpose1d",
    "concat",
    "slice",
    "instance_norm",
];

/// Worst relative error over `instances` random instances of one layer type.
pub fn layer_worst(kind: &str, instances: usize, seed: u64) -> f64 {
    let mut rng = SeededRng::new(seed);
    (0..instances)
        .map(|_| {
            let inst = layer_instance(kind, &mut rng);
            check_instance(&inst, &mut rng)
        })
        .fold(0.0, f64::max)
}

pub enum Net {
    Generator,
    Discriminator,
}

/// Directional-derivative check of a whole network at toy geometry
/// (L = 32, base width 4). Per instance, every parameter tensor gets its own
/// random direction; the AD and central-difference directional derivatives
/// are compared as vectors. Returns the worst relative error.
pub fn network_worst(net: Net, instances: usize, seed: u64) -> f64 {
    let mut rng = SeededRng::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (store, forward): (ParamStore, Forward) = match net {
            Net::Generator => {
                let arch = GeneratorArch {
                    length: 32,
                    base_channels: 4,
                    ..Default::default()
                };
                let (g, s) = build_generator(arch, "g", &mut rng).unwrap();
                (s, Box::new(move |b, t, x| g.forward(b, t, x)))
            }
            Net::Discriminator => {
                let arch = DiscriminatorArch {
                    length: 32,
                    base_channels: 4,
                    ..Default::default()
                };
                let (d, s) = build_discriminator(arch, "d", &mut rng).unwrap();
                (s, Box::new(move |b, t, x| d.forward(b, t, x)))
            }
        };
        let mut store = store;
        let names: Vec<String> = store.iter().map(|(n, _)| n.to_string()).collect();
        for name in &names {
            let t = store.get(name).unwrap();
            let noise = random_tensor(&mut rng, t.shape(), -0.1, 0.1);
            let data = t
                .data()
                .iter()
                .zip(noise.data())
                .map(|(a, b)| a + b)
                .collect();
            store
                .set(name, Tensor::new(t.shape().to_vec(), data).unwrap())
                .unwrap();
        }
        let x = random_tensor(&mut rng, &[1, 32], -1.0, 1.0);

        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let xv = tape.constant(x.clone());
        let out = forward(&bound, &mut tape, xv).unwrap();
        let weights = random_tensor(&mut rng, tape.value(out).shape(), -1.0, 1.0);
        let w = tape.constant(weights.clone());
        let prod = tape.mul(out, w).unwrap();
        let loss = tape.sum(prod).unwrap();
        let grads = tape.backward(loss).unwrap();
        let all_grads = bound.gradients(&tape, &grads);

        let eval = |s: &ParamStore| {
            let mut tape = Tape::new();
            let b = s.bind_frozen(&mut tape);
            let xv = tape.constant(x.clone());
            let out = forward(&b, &mut tape, xv).unwrap();
            weighted_sum(&mut tape, out, &weights)
        };
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        for (name, g) in names.iter().zip(&all_grads) {
            let base = store.get(name).unwrap().clone();
            let dir = random_tensor(&mut rng, base.shape(), -1.0, 1.0);
            analytic.push(g.iter().zip(dir.data()).map(|(a, b)| a * b).sum::<f64>());
            let shifted = |sign: f64| {
                let mut s = store.clone();
                let data = base
                    .data()
                    .iter()
                    .zip(dir.data())
                    .map(|(a, d)| a + sign * H * d)
                    .collect();
                s.set(name, Tensor::new(base.shape().to_vec(), data).unwrap())
                    .unwrap();
                eval(&s)
            };
            numeric.push((shifted(1.0) - shifted(-1.0)) / (2.0 * H));
        }
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    worst
}
