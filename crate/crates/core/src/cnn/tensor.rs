//! Minimal dense tensor used for the network parameters and gradients.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Row-major dense tensor of f64 values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Seeded uniform fill over `(-limit, limit)`.
    pub fn fill_uniform(&mut self, rng: &mut ChaCha8Rng, limit: f64) {
        for v in &mut self.data {
            *v = rng.random_range(-limit..limit);
        }
    }

    /// Seeded Gaussian fill with standard deviation `sqrt(2 / fan_in)`.
    pub fn fill_fan_in_gaussian(&mut self, rng: &mut ChaCha8Rng, fan_in: usize) {
        let std = (2.0 / fan_in as f64).sqrt();
        for v in &mut self.data {
            *v = standard_normal(rng) * std;
        }
    }
}

/// One standard-normal draw via the Box-Muller transform.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
