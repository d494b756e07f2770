use rand::Rng;
use serde::Serialize;

use crate::seed::StreamSeed;
use crate::{Error, Result};

/// IID Bernoulli channel states `ξ_0 … ξ_T` with `Prob(ξ_t = 1) = p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErasureRealization {
    pub p: f64,
    pub xi: Vec<bool>,
    pub seed: StreamSeed,
}

impl ErasureRealization {
    /// Number of channel uses covered, i.e. `T` for `ξ_0 … ξ_T`.
    pub fn horizon(&self) -> usize {
        self.xi.len().saturating_sub(1)
    }

    pub fn delivered_fraction(&self) -> f64 {
        self.xi.iter().filter(|&&b| b).count() as f64 / self.xi.len() as f64
    }

    /// All packets delivered (or all erased when `delivered` is false).
    pub fn constant(delivered: bool, horizon: usize) -> Self {
        ErasureRealization {
            p: if delivered { 1.0 } else { 0.0 },
            xi: vec![delivered; horizon + 1],
            seed: StreamSeed::new(0, 0),
        }
    }
}

/// Draws `ξ_0 … ξ_T` with `ξ_t = [u_t < p]`, `u_t` the `t`-th uniform of the
/// seeded stream.
///
/// Because the uniforms do not depend on `p`, sequences drawn from the same
/// seed at different `p` are coupled: raising `p` only turns erasures into
/// deliveries.
pub fn erasure_sequence(p: f64, horizon: usize, seed: impl Into<StreamSeed>) -> Result<ErasureRealization> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("p", "must lie in (0, 1)"));
    }
    let seed = seed.into();
    let mut rng = seed.rng();
    let xi = (0..=horizon).map(|_| rng.random::<f64>() < p).collect();
    Ok(ErasureRealization { p, xi, seed })
}
