//! The environment the leader interacts with.
//!
//! Learners only see the game through [`Environment`]: known expected costs,
//! sampled transitions, and observed (possibly noisy) costs. The kernel is
//! never exposed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{sample_transition, GameModel};

/// RNG stream ids, one per component, so adding draws in one component never
/// shifts another.
pub mod stream {
    pub const TRANSITIONS: u64 = 1;
    pub const SIMULATOR: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const LEADER: u64 = 4;
    pub const ADVERSARY: u64 = 5;
    pub const LEARNER: u64 = 6;
}

/// ChaCha8 generator for `seed` on its own stream.
pub fn component_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub trait Environment {
    fn n_states(&self) -> usize;
    fn n_actions1(&self) -> usize;
    fn n_actions2(&self) -> usize;
    fn cost_dim(&self) -> usize;

    /// Expected stage cost `c(s, a1, a2)`.
    fn cost(&self, s: usize, a1: usize, a2: usize) -> &[f64];

    /// Next state of the real system after `(a1, a2)` is played at `s`.
    fn step(&mut self, s: usize, a1: usize, a2: usize) -> Result<usize>;

    /// Independent draw from the same transition law, for off-line
    /// simulation. Does not move the real system.
    fn simulate(&mut self, s: usize, a1: usize, a2: usize) -> Result<usize>;

    /// The cost as observed on the real system.
    fn observe_cost(&mut self, s: usize, a1: usize, a2: usize) -> Result<Vec<f64>>;
}

/// An [`Environment`] backed by a [`GameModel`].
///
/// Observed costs carry optional noise, uniform on
/// `[-noise_std·√3, noise_std·√3]` per component: zero mean, standard
/// deviation `noise_std`, bounded.
#[derive(Debug, Clone)]
pub struct ModelEnvironment<'m> {
    model: &'m GameModel,
    noise_std: f64,
    transitions: ChaCha8Rng,
    simulator: ChaCha8Rng,
    noise: ChaCha8Rng,
}

impl<'m> ModelEnvironment<'m> {
    pub fn new(model: &'m GameModel, seed: u64) -> Self {
        Self {
            model,
            noise_std: 0.0,
            transitions: component_rng(seed, stream::TRANSITIONS),
            simulator: component_rng(seed, stream::SIMULATOR),
            noise: component_rng(seed, stream::NOISE),
        }
    }

    pub fn with_noise(model: &'m GameModel, seed: u64, noise_std: f64) -> Result<Self> {
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::Config(format!("noise_std must be >= 0, got {noise_std}")));
        }
        let mut env = Self::new(model, seed);
        env.noise_std = noise_std;
        Ok(env)
    }

    pub fn model(&self) -> &'m GameModel {
        self.model
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }
}

impl Environment for ModelEnvironment<'_> {
    fn n_states(&self) -> usize {
        self.model.n_states()
    }

    fn n_actions1(&self) -> usize {
        self.model.n_actions1()
    }

    fn n_actions2(&self) -> usize {
        self.model.n_actions2()
    }

    fn cost_dim(&self) -> usize {
        self.model.cost_dim()
    }

    fn cost(&self, s: usize, a1: usize, a2: usize) -> &[f64] {
        self.model.cost(s, a1, a2)
    }

    fn step(&mut self, s: usize, a1: usize, a2: usize) -> Result<usize> {
        sample_transition(self.model, s, a1, a2, &mut self.transitions)
    }

    fn simulate(&mut self, s: usize, a1: usize, a2: usize) -> Result<usize> {
        sample_transition(self.model, s, a1, a2, &mut self.simulator)
    }

    fn observe_cost(&mut self, s: usize, a1: usize, a2: usize) -> Result<Vec<f64>> {
        self.model.check_indices(s, a1, a2)?;
        let mut c = self.model.cost(s, a1, a2).to_vec();
        if self.noise_std > 0.0 {
            let half = self.noise_std * 3f64.sqrt();
            for v in c.iter_mut() {
                *v += self.noise.random_range(-half..=half);
            }
        }
        Ok(c)
    }
}
