use std::f64::consts::TAU;

/// SplitMix64 generator shared by dataset synthesis, weight init and
/// training-order shuffles.
///
/// The output stream depends only on the seed, so every consumer that
/// draws in a fixed order is bit-reproducible across platforms.
#[derive(Clone, Debug)]
pub struct SeededRng {
    state: u64,
    cached_gauss: Option<f64>,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            state: seed,
            cached_gauss: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform double in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`. Consumes one draw.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        debug_assert!(lo < hi);
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform index in `0..n`. Consumes one draw.
    pub fn index(&mut self, n: usize) -> usize {
        ((self.next_f64() * n as f64) as usize).min(n - 1)
    }

    /// Box–Muller normal sample. Each pair of outputs consumes two uniforms;
    /// the sine branch is cached and returned by the following call.
    pub fn gauss(&mut self, mu: f64, sigma: f64) -> f64 {
        if let Some(z) = self.cached_gauss.take() {
            return mu + sigma * z;
        }
        // 1 - u lies in (0, 1], keeping ln finite.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        self.cached_gauss = Some(r * s);
        mu + sigma * r * c
    }

    /// Fisher–Yates permutation of `0..n`, drawing `n - 1` uniforms.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.index(i + 1);
            p.swap(i, j);
        }
        p
    }
}
