use num_complex::Complex64;
use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// One-sided magnitude spectrum `|X[0..=N/2]|` of a real signal.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub magnitudes: Vec<f64>,
}

impl Spectrum {
    /// Magnitudes divided by their maximum.
    pub fn unit_peak(&self) -> Result<Vec<f64>> {
        let peak = self.magnitudes.iter().fold(0.0f64, |m, &v| m.max(v));
        if peak == 0.0 {
            return Err(Error::DegenerateSignal);
        }
        Ok(self.magnitudes.iter().map(|v| v / peak).collect())
    }
}

/// Iterative radix-2 decimation-in-time FFT, unnormalized:
/// `X[k] = sum_n x[n] exp(-2 pi i k n / N)`.
pub fn fft(input: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = input.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let bits = n.trailing_zeros();
    let mut a: Vec<Complex64> = if n == 1 {
        input.to_vec()
    } else {
        (0..n)
            .map(|i| input[i.reverse_bits() >> (usize::BITS - bits)])
            .collect()
    };

    let mut size = 2;
    while size <= n {
        let half = size / 2;
        // Twiddles evaluated directly per index, not by recurrence.
        let twiddles: Vec<Complex64> = (0..half)
            .map(|k| Complex64::from_polar(1.0, -TAU * k as f64 / size as f64))
            .collect();
        for start in (0..n).step_by(size) {
            for (k, w) in twiddles.iter().enumerate() {
                let even = a[start + k];
                let odd = a[start + k + half] * w;
                a[start + k] = even + odd;
                a[start + k + half] = even - odd;
            }
        }
        size *= 2;
    }
    Ok(a)
}

/// Full complex spectrum of a real signal.
pub fn fft_real_complex(x: &[f64]) -> Result<Vec<Complex64>> {
    let input: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft(&input)
}

pub fn fft_real(x: &[f64]) -> Result<Spectrum> {
    let full = fft_real_complex(x)?;
    let half = x.len() / 2;
    Ok(Spectrum {
        magnitudes: full[..=half.min(full.len() - 1)]
            .iter()
            .map(|c| c.norm())
            .collect(),
    })
}
