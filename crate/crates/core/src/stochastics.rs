//! Seeded random stream and the samplers the model consumes.
//!
//! Every random decision in a run flows through one [`RandomStream`]. The
//! generator is PCG-64 MCG (`Mcg128Xsl64`) seeded through `seed_from_u64`,
//! and all samplers below are written against its raw 64-bit output so a
//! given seed yields the same sequence on every platform:
//!
//! * uniform reals take the top 53 bits of one word, giving `[0, 1)`;
//! * bounded integers use Lemire's multiply-and-reject method;
//! * normals use the Marsaglia polar method, discarding the spare value;
//! * Poisson uses sequential inversion for `lambda < 10` and Hörmann's
//!   PTRS transformed rejection for `lambda >= 10`, both on top of `libm`.
//!
//! `draw_count` counts raw 64-bit words taken from the generator. Degenerate
//! parameters (zero deviation, zero lambda) return their exact value without
//! consuming a word.

use libm::{exp, floor, log, sqrt};
use rand_pcg::rand_core::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;
use thiserror::Error;

/// Rejected sampler parameter.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("normal deviation must be finite and non-negative, got {0}")]
    Deviation(f64),
    #[error("poisson lambda must be finite and non-negative, got {0}")]
    Lambda(f64),
    #[error("probability must be a percentage in [0, 100], got {0}")]
    Probability(f64),
}

/// Inversion is used below this mean, PTRS at or above it.
const PTRS_CUTOFF: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    rng: Pcg64Mcg,
    draw_count: u64,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: Pcg64Mcg::seed_from_u64(seed),
            draw_count: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Raw 64-bit words consumed so far.
    pub fn draw_count(&self) -> u64 {
        self.draw_count
    }

    pub fn next_u64(&mut self) -> u64 {
        self.draw_count += 1;
        self.rng.next_u64()
    }

    /// Uniform real in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, bound)`. `bound` must be non-zero.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let mut wide = u128::from(self.next_u64()) * u128::from(bound);
        let mut low = wide as u64;
        if low < bound {
            let threshold = bound.wrapping_neg() % bound;
            while low < threshold {
                wide = u128::from(self.next_u64()) * u128::from(bound);
                low = wide as u64;
            }
        }
        (wide >> 64) as u64
    }

    /// Fisher-Yates, walking from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    pub fn sample_normal(&mut self, mean: f64, deviation: f64) -> Result<f64, SamplingError> {
        if !(deviation >= 0.0) || !deviation.is_finite() {
            return Err(SamplingError::Deviation(deviation));
        }
        if deviation == 0.0 {
            return Ok(mean);
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                return Ok(mean + deviation * u * sqrt(-2.0 * log(s) / s));
            }
        }
    }

    pub fn sample_poisson(&mut self, lambda: f64) -> Result<u64, SamplingError> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(SamplingError::Lambda(lambda));
        }
        if lambda == 0.0 {
            return Ok(0);
        }
        if lambda < PTRS_CUTOFF {
            Ok(self.poisson_inversion(lambda))
        } else {
            Ok(self.poisson_ptrs(lambda))
        }
    }

    /// `true` with probability `probability / 100`.
    pub fn sample_bernoulli(&mut self, probability: f64) -> Result<bool, SamplingError> {
        if !(0.0..=100.0).contains(&probability) {
            return Err(SamplingError::Probability(probability));
        }
        Ok(self.uniform() < probability / 100.0)
    }

    fn poisson_inversion(&mut self, lambda: f64) -> u64 {
        let u = self.uniform();
        let mut k = 0u64;
        let mut p = exp(-lambda);
        let mut cumulative = p;
        while u > cumulative {
            k += 1;
            p *= lambda / k as f64;
            if p == 0.0 {
                // cumulative sum saturated below u through rounding
                break;
            }
            cumulative += p;
        }
        k
    }

    // W. Hörmann, "The transformed rejection method for generating Poisson
    // random variables", Insurance: Mathematics and Economics 12 (1993).
    fn poisson_ptrs(&mut self, lambda: f64) -> u64 {
        let slam = sqrt(lambda);
        let loglam = log(lambda);
        let b = 0.931 + 2.53 * slam;
        let a = -0.059 + 0.02483 * b;
        let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        let v_r = 0.9277 - 3.6224 / (b - 2.0);
        loop {
            let u = self.uniform() - 0.5;
            let v = self.uniform();
            let us = 0.5 - u.abs();
            let k = floor((2.0 * a / us + b) * u + lambda + 0.43);
            if us >= 0.07 && v <= v_r {
                return k as u64;
            }
            if k < 0.0 || (us < 0.013 && v > us) {
                continue;
            }
            let lhs = log(v) + log(inv_alpha) - log(a / (us * us) + b);
            let rhs = -lambda + k * loglam - libm::lgamma(k + 1.0);
            if lhs <= rhs {
                return k as u64;
            }
        }
    }
}
