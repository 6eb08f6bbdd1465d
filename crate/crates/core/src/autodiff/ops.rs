//! Tape-free forward kernels and the matching backward kernels.
//!
//! The tape calls exactly these functions when recording, so a forward
//! value computed here is bit-identical to the one recorded on a tape.

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    #[inline]
    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => a / b,
        }
    }

    /// Partial derivatives (d/da, d/db) at (a, b).
    #[inline]
    fn partials(self, a: f64, b: f64) -> (f64, f64) {
        match self {
            BinaryOp::Add => (1.0, 1.0),
            BinaryOp::Sub => (1.0, -1.0),
            BinaryOp::Mul => (b, a),
            BinaryOp::Div => (1.0 / b, -a / (b * b)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Mean,
}

/// Pointwise nonlinearities. At kinks the derivative takes the
/// negative-side value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Tanh,
    Abs,
    Square,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Abs => x.abs(),
            Activation::Square => x * x,
        }
    }

    #[inline]
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Abs => {
                if x > 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Activation::Square => 2.0 * x,
        }
    }
}

pub fn elementwise(op: BinaryOp, a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let data = if a.shape() == b.shape() {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| op.apply(x, y))
            .collect()
    } else if b.is_scalar() {
        let s = b.item();
        a.data().iter().map(|&x| op.apply(x, s)).collect()
    } else {
        return Err(Error::ShapeMismatch {
            op: "elementwise",
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    };
    Ok(Tensor::from_parts(a.shape().to_vec(), data))
}

pub fn elementwise_scalar(op: BinaryOp, a: &Tensor, s: f64) -> Tensor {
    let data = a.data().iter().map(|&x| op.apply(x, s)).collect();
    Tensor::from_parts(a.shape().to_vec(), data)
}

pub fn reduce(op: ReduceOp, a: &Tensor) -> Result<Tensor> {
    if a.is_empty() {
        return Err(Error::EmptyTensor { op: "reduce" });
    }
    let sum: f64 = a.data().iter().sum();
    Ok(Tensor::scalar(match op {
        ReduceOp::Sum => sum,
        ReduceOp::Mean => sum / a.len() as f64,
    }))
}

pub fn activation(kind: Activation, a: &Tensor) -> Tensor {
    let data = a.data().iter().map(|&x| kind.apply(x)).collect();
    Tensor::from_parts(a.shape().to_vec(), data)
}

/// `conv1d` output length, or a geometry error.
pub fn conv1d_len(len: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    if stride == 0 || kernel == 0 || len + 2 * pad < kernel {
        return Err(Error::Geometry {
            op: "conv1d",
            detail: format!("length {len}, kernel {kernel}, stride {stride}, pad {pad}"),
        });
    }
    Ok((len + 2 * pad - kernel) / stride + 1)
}

/// `conv_transpose1d` output length `(len - 1) * stride - 2 * pad + kernel`.
pub fn conv_transpose1d_len(len: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    let full = (len.max(1) - 1) * stride + kernel;
    if stride == 0 || kernel == 0 || len == 0 || full <= 2 * pad {
        return Err(Error::Geometry {
            op: "conv_transpose1d",
            detail: format!("length {len}, kernel {kernel}, stride {stride}, pad {pad}"),
        });
    }
    Ok(full - 2 * pad)
}

/// Row-major `c = op(a) · op(b) + beta · c` with `op(a)` of shape m×k and
/// `op(b)` of shape k×n. A transposed operand is stored in its untransposed
/// layout (`a` as k×m, `b` as n×k).
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if a_t { (1, m) } else { (k, 1) };
    let (rsb, csb) = if b_t { (1, k) } else { (n, 1) };
    // SAFETY: the asserts above guarantee every strided access stays in bounds.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `cols[(c, kk), t] = src[c, t * stride + kk - pad]`, zero outside `src`.
fn im2col(
    src: &[f64],
    channels: usize,
    src_len: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    positions: usize,
) -> Vec<f64> {
    let mut cols = vec![0.0; channels * kernel * positions];
    for c in 0..channels {
        let row_src = &src[c * src_len..(c + 1) * src_len];
        for kk in 0..kernel {
            let row = &mut cols[(c * kernel + kk) * positions..(c * kernel + kk + 1) * positions];
            for (t, out) in row.iter_mut().enumerate() {
                let idx = (t * stride + kk) as isize - pad as isize;
                if idx >= 0 && (idx as usize) < src_len {
                    *out = row_src[idx as usize];
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatter-adds columns back into a `[channels, dst_len]` buffer.
fn col2im(
    cols: &[f64],
    channels: usize,
    dst_len: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    positions: usize,
) -> Vec<f64> {
    let mut dst = vec![0.0; channels * dst_len];
    for c in 0..channels {
        let row_dst = &mut dst[c * dst_len..(c + 1) * dst_len];
        for kk in 0..kernel {
            let row = &cols[(c * kernel + kk) * positions..(c * kernel + kk + 1) * positions];
            for (t, &v) in row.iter().enumerate() {
                let idx = (t * stride + kk) as isize - pad as isize;
                if idx >= 0 && (idx as usize) < dst_len {
                    row_dst[idx as usize] += v;
                }
            }
        }
    }
    dst
}

fn add_bias(out: &mut [f64], bias: Option<&Tensor>, len: usize) {
    if let Some(b) = bias {
        for (row, &bv) in out.chunks_mut(len).zip(b.data()) {
            row.iter_mut().for_each(|v| *v += bv);
        }
    }
}

fn bias_grad(grad_out: &[f64], len: usize) -> Vec<f64> {
    grad_out.chunks(len).map(|row| row.iter().sum()).collect()
}

fn check_bias(bias: Option<&Tensor>, channels: usize, op: &'static str) -> Result<()> {
    match bias {
        Some(b) if b.shape() != [channels] => Err(Error::ShapeMismatch {
            op,
            left: b.shape().to_vec(),
            right: vec![channels],
        }),
        _ => Ok(()),
    }
}

/// Strided, zero-padded 1D cross-correlation.
///
/// `input` is `[in_ch, L]`, `weight` is `[out_ch, in_ch, k]`, `bias` is `[out_ch]`.
pub fn conv1d(
    input: &Tensor,
    weight: &Tensor,
    bias: Option<&Tensor>,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let (in_ch, len) = input.dims2("conv1d")?;
    let (out_ch, w_in, kernel) = weight.dims3("conv1d")?;
    if w_in != in_ch {
        return Err(Error::ShapeMismatch {
            op: "conv1d",
            left: input.shape().to_vec(),
            right: weight.shape().to_vec(),
        });
    }
    check_bias(bias, out_ch, "conv1d")?;
    let out_len = conv1d_len(len, kernel, stride, pad)?;
    let cols = im2col(input.data(), in_ch, len, kernel, stride, pad, out_len);
    let mut out = vec![0.0; out_ch * out_len];
    gemm(
        out_ch,
        in_ch * kernel,
        out_len,
        weight.data(),
        false,
        &cols,
        false,
        0.0,
        &mut out,
    );
    add_bias(&mut out, bias, out_len);
    Ok(Tensor::from_parts(vec![out_ch, out_len], out))
}

/// Gradients of a convolution-type op; `None` where not requested.
pub(crate) struct ConvGrads {
    pub input: Option<Vec<f64>>,
    pub weight: Option<Vec<f64>>,
    pub bias: Option<Vec<f64>>,
}

pub(crate) fn conv1d_backward(
    input: &Tensor,
    weight: &Tensor,
    grad_out: &[f64],
    stride: usize,
    pad: usize,
    need: [bool; 3],
) -> ConvGrads {
    let (in_ch, len) = (input.shape()[0], input.shape()[1]);
    let (out_ch, kernel) = (weight.shape()[0], weight.shape()[2]);
    let out_len = grad_out.len() / out_ch;
    let rows = in_ch * kernel;

    let grad_weight = need[1].then(|| {
        let cols = im2col(input.data(), in_ch, len, kernel, stride, pad, out_len);
        let mut gw = vec![0.0; out_ch * rows];
        gemm(
            out_ch, out_len, rows, grad_out, false, &cols, true, 0.0, &mut gw,
        );
        gw
    });
    let grad_input = need[0].then(|| {
        let mut gcols = vec![0.0; rows * out_len];
        gemm(
            rows,
            out_ch,
            out_len,
            weight.data(),
            true,
            grad_out,
            false,
            0.0,
            &mut gcols,
        );
        col2im(&gcols, in_ch, len, kernel, stride, pad, out_len)
    });
    ConvGrads {
        input: grad_input,
        weight: grad_weight,
        bias: need[2].then(|| bias_grad(grad_out, out_len)),
    }
}

/// Transposed 1D convolution, the adjoint of [`conv1d`]'s linear part.
///
/// `input` is `[in_ch, L]`, `weight` is `[in_ch, out_ch, k]`, `bias` is `[out_ch]`.
pub fn conv_transpose1d(
    input: &Tensor,
    weight: &Tensor,
    bias: Option<&Tensor>,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let (in_ch, len) = input.dims2("conv_transpose1d")?;
    let (w_in, out_ch, kernel) = weight.dims3("conv_transpose1d")?;
    if w_in != in_ch {
        return Err(Error::ShapeMismatch {
            op: "conv_transpose1d",
            left: input.shape().to_vec(),
            right: weight.shape().to_vec(),
        });
    }
    check_bias(bias, out_ch, "conv_transpose1d")?;
    let out_len = conv_transpose1d_len(len, kernel, stride, pad)?;
    let rows = out_ch * kernel;
    let mut cols = vec![0.0; rows * len];
    gemm(
        rows,
        in_ch,
        len,
        weight.data(),
        true,
        input.data(),
        false,
        0.0,
        &mut cols,
    );
    let mut out = col2im(&cols, out_ch, out_len, kernel, stride, pad, len);
    add_bias(&mut out, bias, out_len);
    Ok(Tensor::from_parts(vec![out_ch, out_len], out))
}

pub(crate) fn conv_transpose1d_backward(
    input: &Tensor,
    weight: &Tensor,
    grad_out: &[f64],
    stride: usize,
    pad: usize,
    need: [bool; 3],
) -> ConvGrads {
    let (in_ch, len) = (input.shape()[0], input.shape()[1]);
    let (out_ch, kernel) = (weight.shape()[1], weight.shape()[2]);
    let out_len = grad_out.len() / out_ch;
    let rows = out_ch * kernel;
    let gcols = if need[0] || need[1] {
        im2col(grad_out, out_ch, out_len, kernel, stride, pad, len)
    } else {
        Vec::new()
    };
    let grad_input = need[0].then(|| {
        let mut gx = vec![0.0; in_ch * len];
        gemm(
            in_ch,
            rows,
            len,
            weight.data(),
            false,
            &gcols,
            false,
            0.0,
            &mut gx,
        );
        gx
    });
    let grad_weight = need[1].then(|| {
        let mut gw = vec![0.0; in_ch * rows];
        gemm(
            in_ch,
            len,
            rows,
            input.data(),
            false,
            &gcols,
            true,
            0.0,
            &mut gw,
        );
        gw
    });
    ConvGrads {
        input: grad_input,
        weight: grad_weight,
        bias: need[2].then(|| bias_grad(grad_out, out_len)),
    }
}

pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (ca, la) = a.dims2("concat_channels")?;
    let (cb, lb) = b.dims2("concat_channels")?;
    if la != lb {
        return Err(Error::ShapeMismatch {
            op: "concat_channels",
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let mut data = Vec::with_capacity(a.len() + b.len());
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    Ok(Tensor::from_parts(vec![ca + cb, la], data))
}

/// Channels `start..end` of a `[C, L]` tensor.
pub fn slice_channels(a: &Tensor, start: usize, end: usize) -> Result<Tensor> {
    let (c, l) = a.dims2("slice_channels")?;
    if start >= end || end > c {
        return Err(Error::Geometry {
            op: "slice_channels",
            detail: format!("range {start}..{end} of {c} channels"),
        });
    }
    Ok(Tensor::from_parts(
        vec![end - start, l],
        a.data()[start * l..end * l].to_vec(),
    ))
}

/// Per-channel standardization with biased variance, then affine `scale`/`shift`.
pub fn instance_norm(x: &Tensor, scale: &Tensor, shift: &Tensor, eps: f64) -> Result<Tensor> {
    let (c, l) = x.dims2("instance_norm")?;
    if l < 2 {
        return Err(Error::Geometry {
            op: "instance_norm",
            detail: format!("length {l} < 2"),
        });
    }
    for p in [scale, shift] {
        if p.shape() != [c] {
            return Err(Error::ShapeMismatch {
                op: "instance_norm",
                left: x.shape().to_vec(),
                right: p.shape().to_vec(),
            });
        }
    }
    let mut out = Vec::with_capacity(x.len());
    for (ch, row) in x.data().chunks(l).enumerate() {
        let (mean, inv_std) = channel_stats(row, eps);
        let (g, b) = (scale.data()[ch], shift.data()[ch]);
        out.extend(row.iter().map(|&v| (v - mean) * inv_std * g + b));
    }
    Ok(Tensor::from_parts(vec![c, l], out))
}

fn channel_stats(row: &[f64], eps: f64) -> (f64, f64) {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, 1.0 / (var + eps).sqrt())
}

/// Returns (grad_x, grad_scale, grad_shift).
pub(crate) fn instance_norm_backward(
    x: &Tensor,
    scale: &Tensor,
    grad_out: &[f64],
    eps: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let l = x.shape()[1];
    let n = l as f64;
    let mut gx = Vec::with_capacity(x.len());
    let mut gscale = Vec::with_capacity(scale.len());
    let mut gshift = Vec::with_capacity(scale.len());
    for ((row, g), &s) in x.data().chunks(l).zip(grad_out.chunks(l)).zip(scale.data()) {
        let (mean, inv_std) = channel_stats(row, eps);
        let xhat: Vec<f64> = row.iter().map(|&v| (v - mean) * inv_std).collect();
        let sum_g: f64 = g.iter().sum();
        let sum_g_xhat: f64 = g.iter().zip(&xhat).map(|(a, b)| a * b).sum();
        gscale.push(sum_g_xhat);
        gshift.push(sum_g);
        // d xhat = g * s; dx = inv_std / n * (n*dxhat - sum(dxhat) - xhat*sum(dxhat*xhat))
        let k = s * inv_std / n;
        gx.extend(
            g.iter()
                .zip(&xhat)
                .map(|(&gi, &xh)| k * (n * gi - sum_g - xh * sum_g_xhat)),
        );
    }
    (gx, gscale, gshift)
}

pub(crate) fn elementwise_backward(
    op: BinaryOp,
    a: &Tensor,
    b: &Tensor,
    grad_out: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    if b.is_scalar() && !a.is_scalar() {
        let s = b.item();
        let mut ga = Vec::with_capacity(a.len());
        let mut gb = 0.0;
        for (&x, &g) in a.data().iter().zip(grad_out) {
            let (da, db) = op.partials(x, s);
            ga.push(g * da);
            gb += g * db;
        }
        (ga, vec![gb])
    } else {
        a.data()
            .iter()
            .zip(b.data())
            .zip(grad_out)
            .map(|((&x, &y), &g)| {
                let (da, db) = op.partials(x, y);
                (g * da, g * db)
            })
            .unzip()
    }
}

pub(crate) fn elementwise_scalar_backward(
    op: BinaryOp,
    a: &Tensor,
    s: f64,
    grad_out: &[f64],
) -> Vec<f64> {
    a.data()
        .iter()
        .zip(grad_out)
        .map(|(&x, &g)| g * op.partials(x, s).0)
        .collect()
}

pub(crate) fn activation_backward(
    kind: Activation,
    x: &Tensor,
    y: &Tensor,
    grad_out: &[f64],
) -> Vec<f64> {
    x.data()
        .iter()
        .zip(y.data())
        .zip(grad_out)
        .map(|((&xi, &yi), &g)| g * kind.derivative(xi, yi))
        .collect()
}
