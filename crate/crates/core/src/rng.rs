//! Portable seeded random numbers.
//!
//! A 64-bit linear congruential generator with Knuth's MMIX constants
//!
//! ```text
//! state <- state * 6364136223846793005 + 1442695040888963407   (mod 2^64)
//! ```
//!
//! Uniform variates take the top 53 bits of the new state, `u = (k + 0.5) / 2^53`,
//! so `u` lies strictly inside `(0, 1)`. Gaussian variates use the basic
//! Box–Muller transform and are produced in pairs (cosine branch first, sine
//! branch cached for the next call). The seed is used as the initial state
//! directly. Any implementation following these rules reproduces the same
//! "random" Hamiltonians bit for bit.

use crate::matcore::{CMat, CVec, C64};

pub const LCG_MULTIPLIER: u64 = 6_364_136_223_846_793_005;
pub const LCG_INCREMENT: u64 = 1_442_695_040_888_963_407;

#[derive(Debug, Clone)]
pub struct SeededRng {
    state: u64,
    spare: Option<f64>,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            state: seed,
            spare: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self
            .state
            .wrapping_mul(LCG_MULTIPLIER)
            .wrapping_add(LCG_INCREMENT);
        self.state
    }

    /// Uniform variate in the open interval `(0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        let k = self.next_u64() >> 11;
        (k as f64 + 0.5) / (1u64 << 53) as f64
    }

    /// Uniform variate in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal variate.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(g) = self.spare.take() {
            return g;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let phi = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * phi.sin());
        r * phi.cos()
    }

    /// Complex number with independent `N(0, scale²)` real and imaginary parts.
    pub fn complex(&mut self, scale: f64) -> C64 {
        let re = self.gaussian();
        let im = self.gaussian();
        C64::new(scale * re, scale * im)
    }

    /// Matrix filled row by row with [`SeededRng::complex`] entries.
    pub fn complex_matrix(&mut self, rows: usize, cols: usize, scale: f64) -> CMat {
        let entries: Vec<C64> = (0..rows * cols).map(|_| self.complex(scale)).collect();
        CMat::from_row_slice(rows, cols, &entries)
    }

    pub fn complex_vector(&mut self, n: usize, scale: f64) -> CVec {
        CVec::from_iterator(n, (0..n).map(|_| self.complex(scale)))
    }

    /// Hermitian `(G + G†)/2` with `G` from [`SeededRng::complex_matrix`].
    pub fn hermitian(&mut self, n: usize, scale: f64) -> CMat {
        let g = self.complex_matrix(n, n, scale);
        (&g + g.adjoint()).scale(0.5)
    }

    /// Unit vector in `C^n` (normalized Gaussian vector).
    pub fn unit_vector(&mut self, n: usize) -> CVec {
        let v = self.complex_vector(n, 1.0);
        let norm = v.norm();
        v.unscale(norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lcg_sequence_is_pinned() {
        let mut rng = SeededRng::new(0);
        assert_eq!(rng.next_u64(), LCG_INCREMENT);
        assert_eq!(
            rng.next_u64(),
            LCG_INCREMENT
                .wrapping_mul(LCG_MULTIPLIER)
                .wrapping_add(LCG_INCREMENT)
        );
    }

    #[test]
    fn uniform_stays_inside_unit_interval() {
        let mut rng = SeededRng::new(42);
        for _ in 0..10_000 {
            let u = rng.uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn gaussian_moments_are_plausible() {
        let mut rng = SeededRng::new(7);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.gaussian()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn same_seed_same_stream() {
        let a = SeededRng::new(99).hermitian(4, 1.0);
        let b = SeededRng::new(99).hermitian(4, 1.0);
        assert_eq!(a, b);
        assert_eq!(a, a.adjoint());
    }
}
