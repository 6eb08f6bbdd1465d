use crate::error::{Error, Result};

/// Dense row-major array of `f64` with an explicit shape.
///
/// Signals use `[channels, length]`, conv weights `[out_ch, in_ch, kernel]`
/// (transposed convs `[in_ch, out_ch, kernel]`), scalars `[]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if shape.contains(&0) || numel != data.len() {
            return Err(Error::ShapeMismatch {
                op: "tensor",
                left: shape,
                right: vec![data.len()],
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let numel = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; numel],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    /// Wraps a single-channel signal as a `[1, len]` tensor.
    pub fn signal(samples: &[f64]) -> Self {
        Self {
            shape: vec![1, samples.len()],
            data: samples.to_vec(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.shape.is_empty()
    }

    /// Value of a scalar (or single-element) tensor.
    pub fn item(&self) -> f64 {
        self.data[0]
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub(crate) fn dims2(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape[..] {
            [c, l] => Ok((c, l)),
            _ => Err(Error::ShapeMismatch {
                op,
                left: self.shape.clone(),
                right: vec![0, 0],
            }),
        }
    }

    pub(crate) fn dims3(&self, op: &'static str) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [a, b, k] => Ok((a, b, k)),
            _ => Err(Error::ShapeMismatch {
                op,
                left: self.shape.clone(),
                right: vec![0, 0, 0],
            }),
        }
    }
}
