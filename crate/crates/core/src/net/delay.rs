use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::NetError;
use crate::model::AgentId;

/// Gamma-distributed per-message delay with mean `mean_us` and standard
/// deviation `stdev_ratio * mean_us`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayModel {
    pub mean_us: f64,
    pub stdev_ratio: f64,
    pub seed: u64,
}

impl Default for DelayModel {
    fn default() -> Self {
        DelayModel { mean_us: 0.0, stdev_ratio: 0.10, seed: 0 }
    }
}

impl DelayModel {
    pub fn from_ms(mean_ms: f64, stdev_ratio: f64, seed: u64) -> Self {
        DelayModel { mean_us: mean_ms * 1000.0, stdev_ratio, seed }
    }

    /// Shape `k = 1/ratio²`.
    pub fn shape(&self) -> f64 {
        1.0 / (self.stdev_ratio * self.stdev_ratio)
    }

    /// Scale `θ = mean/k`.
    pub fn scale(&self) -> f64 {
        self.mean_us / self.shape()
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if !self.stdev_ratio.is_finite() || self.stdev_ratio <= 0.0 {
            return Err(NetError::Config(format!("delay stdev ratio must be > 0, got {}", self.stdev_ratio)));
        }
        if !self.mean_us.is_finite() || self.mean_us < 0.0 {
            return Err(NetError::Config(format!("delay mean must be >= 0, got {}", self.mean_us)));
        }
        Ok(())
    }

    fn distribution(&self) -> Result<Option<Gamma<f64>>, NetError> {
        self.validate()?;
        if self.mean_us == 0.0 {
            return Ok(None);
        }
        Gamma::new(self.shape(), self.scale()).map(Some).map_err(|e| NetError::Config(e.to_string()))
    }
}

/// One delay draw in microseconds.
pub fn sample_delay<R: Rng + ?Sized>(model: &DelayModel, rng: &mut R) -> Result<u64, NetError> {
    Ok(match model.distribution()? {
        None => 0,
        Some(g) => g.sample(rng).round() as u64,
    })
}

/// Source of per-delivery delays for a transport.
pub trait DelaySource: Send {
    fn delay_us(&mut self, from: AgentId, to: AgentId) -> u64;
}

/// Seeded gamma sampler.
#[derive(Debug, Clone)]
pub struct DelaySampler {
    dist: Option<Gamma<f64>>,
    rng: ChaCha8Rng,
}

impl DelaySampler {
    pub fn new(model: &DelayModel) -> Result<Self, NetError> {
        Ok(DelaySampler { dist: model.distribution()?, rng: ChaCha8Rng::seed_from_u64(model.seed) })
    }

    /// Sampler on an independent stream of the same seed.
    pub fn with_stream(model: &DelayModel, stream: u64) -> Result<Self, NetError> {
        let mut s = Self::new(model)?;
        s.rng.set_stream(stream);
        Ok(s)
    }

    pub fn sample(&mut self) -> u64 {
        match &self.dist {
            None => 0,
            Some(g) => g.sample(&mut self.rng).round() as u64,
        }
    }
}

impl DelaySource for DelaySampler {
    fn delay_us(&mut self, _from: AgentId, _to: AgentId) -> u64 {
        self.sample()
    }
}

/// Fixed delay per ordered channel, for tests.
#[derive(Debug, Clone)]
pub struct ChannelDelays {
    pub n: usize,
    pub delays_us: Vec<u64>,
}

impl ChannelDelays {
    pub fn uniform(n: usize, delay_us: u64) -> Self {
        ChannelDelays { n, delays_us: vec![delay_us; n * n] }
    }

    pub fn set(&mut self, from: AgentId, to: AgentId, delay_us: u64) {
        self.delays_us[from.index() * self.n + to.index()] = delay_us;
    }
}

impl DelaySource for ChannelDelays {
    fn delay_us(&mut self, from: AgentId, to: AgentId) -> u64 {
        self.delays_us[from.index() * self.n + to.index()]
    }
}
