use serde::Serialize;

use super::ErasureRealization;
use crate::dynsys::{diverged, ObserverGain, PlantNoise, SystemModel};
use crate::linalg::serialize_vectors;
use crate::seed::StreamSeed;
use crate::{Error, Result, Vector};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObserverRun {
    #[serde(serialize_with = "serialize_vectors")]
    pub plant_states: Vec<Vector>,
    #[serde(serialize_with = "serialize_vectors")]
    pub observer_states: Vec<Vector>,
    /// `‖x_t − x̂_t‖`.
    pub error_norms: Vec<f64>,
    pub realization: ErasureRealization,
    /// First step at which the observer state left the finite range; the run
    /// is truncated there.
    pub diverged_at: Option<usize>,
}

/// Runs plant and observer for `realization.horizon()` steps.
///
/// When `ξ_t = 0` the correction `K(y_t) − K(ŷ_t)` is `K(0) − K(0) = 0`, so
/// the observer predicts with `f` alone.
pub fn observe_run(
    model: &SystemModel,
    gain: &ObserverGain,
    x0: &Vector,
    xhat0: &Vector,
    realization: &ErasureRealization,
    noise_amplitude: f64,
    noise_seed: impl Into<StreamSeed>,
) -> Result<ObserverRun> {
    gain.check_conforms(model)?;
    if xhat0.len() != model.state_dim() {
        return Err(Error::Dimension {
            what: "observer state",
            expected: model.state_dim(),
            got: xhat0.len(),
        });
    }
    if !(noise_amplitude >= 0.0 && noise_amplitude.is_finite()) {
        return Err(Error::invalid("noise_amplitude", "must be finite and >= 0"));
    }
    let horizon = realization.horizon();
    let mut noise = PlantNoise::new(noise_amplitude, noise_seed.into());

    let mut plant_states = Vec::with_capacity(horizon + 1);
    let mut observer_states = Vec::with_capacity(horizon + 1);
    let mut error_norms = Vec::with_capacity(horizon + 1);
    plant_states.push(x0.clone());
    observer_states.push(xhat0.clone());
    error_norms.push((x0 - xhat0).norm());
    let mut diverged_at = None;

    for t in 0..horizon {
        let x = &plant_states[t];
        let xh = &observer_states[t];
        let mut next_x = model.step(x)?;
        noise.perturb(&mut next_x);
        if diverged(&next_x) {
            return Err(Error::Diverged { step: t + 1 });
        }
        let mut next_xh = model.step(xh)?;
        if realization.xi[t] {
            next_xh += gain.apply(&model.output(x)?) - gain.apply(&model.output(xh)?);
        }
        if diverged(&next_xh) {
            diverged_at = Some(t + 1);
            break;
        }
        error_norms.push((&next_x - &next_xh).norm());
        plant_states.push(next_x);
        observer_states.push(next_xh);
    }

    Ok(ObserverRun {
        plant_states,
        observer_states,
        error_norms,
        realization: realization.clone(),
        diverged_at,
    })
}
