use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Ornstein-Uhlenbeck exploration noise with unit time step.
#[derive(Debug, Clone)]
pub struct OuNoise {
    pub theta: f64,
    pub sigma: f64,
    value: f64,
    rng: ChaCha8Rng,
}

impl OuNoise {
    pub fn new(theta: f64, sigma: f64, seed: u64) -> Self {
        Self {
            theta,
            sigma,
            value: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn reset(&mut self) {
        self.value = 0.0;
    }

    pub fn sample(&mut self) -> f64 {
        let n: f64 = StandardNormal.sample(&mut self.rng);
        self.value += -self.theta * self.value + self.sigma * n;
        self.value
    }
}
