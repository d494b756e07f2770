use serde::Serialize;

use super::ErasureRealization;
use crate::dynsys::{ObserverGain, SystemModel};
use crate::linalg::{serialize_matrices, symmetrize};
use crate::{Error, Matrix, Result, Vector, DIVERGENCE_THRESHOLD};

/// Second moments of the linearised error `η_t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceTrace {
    #[serde(serialize_with = "serialize_matrices")]
    pub sigma: Vec<Matrix>,
    pub traces: Vec<f64>,
    /// `max_t trace(Σ_t)`; `+∞` when the propagation diverged.
    pub peak_trace: f64,
    pub diverged_at: Option<usize>,
}

impl CovarianceTrace {
    /// Peak of `trace(Σ_t)` over `t ≥ burn_in`.
    pub fn peak_after(&self, burn_in: usize) -> f64 {
        if self.diverged_at.is_some() {
            return f64::INFINITY;
        }
        self.traces.iter().skip(burn_in).copied().fold(0.0, f64::max)
    }
}

/// Error Jacobians along the noise-free orbit: `A(x_t)` when the packet is
/// erased and `A(x_t) − K̃(x_t) C(x_t)` when it is delivered, with
/// `K̃(x_t) = ∂K/∂y(h(x_t))`.
#[derive(Debug, Clone)]
pub struct LinearisedOrbit {
    pub open_loop: Vec<Matrix>,
    pub closed_loop: Vec<Matrix>,
}

impl LinearisedOrbit {
    pub fn new(model: &SystemModel, gain: &ObserverGain, x0: &Vector, horizon: usize) -> Result<Self> {
        gain.check_conforms(model)?;
        let orbit = model.orbit(x0, horizon)?;
        let mut open_loop = Vec::with_capacity(horizon);
        let mut closed_loop = Vec::with_capacity(horizon);
        for x in &orbit[..horizon] {
            let a = model.jacobian(x)?;
            let c = model.output_jacobian(x)?;
            let k = gain.jacobian(&model.output(x)?);
            closed_loop.push(&a - k * c);
            open_loop.push(a);
        }
        Ok(LinearisedOrbit {
            open_loop,
            closed_loop,
        })
    }

    pub fn horizon(&self) -> usize {
        self.open_loop.len()
    }

    fn step(&self, t: usize, delivered: bool) -> &Matrix {
        if delivered {
            &self.closed_loop[t]
        } else {
            &self.open_loop[t]
        }
    }

    /// Peak of `trace(Σ_t)` over `t ≥ burn_in` without storing the sequence.
    pub(crate) fn peak_trace(&self, sigma0: &Matrix, xi: &[bool], burn_in: usize) -> (f64, Option<usize>) {
        let mut sigma = sigma0.clone();
        let mut peak = if burn_in == 0 { sigma.trace() } else { 0.0 };
        for (t, &delivered) in xi.iter().enumerate().take(self.horizon()) {
            let a = self.step(t, delivered);
            sigma = a * &sigma * a.transpose();
            let tr = sigma.trace();
            if !(tr.is_finite() && tr <= DIVERGENCE_THRESHOLD * DIVERGENCE_THRESHOLD) {
                return (f64::INFINITY, Some(t + 1));
            }
            if t + 1 >= burn_in {
                peak = peak.max(tr);
            }
            if tr == 0.0 {
                // nilpotent closed loop reached zero; stays zero
                break;
            }
        }
        (peak, None)
    }
}

fn check_sigma0(sigma0: &Matrix, n: usize) -> Result<()> {
    if sigma0.nrows() != n || sigma0.ncols() != n {
        return Err(Error::Dimension {
            what: "Sigma0",
            expected: n,
            got: sigma0.nrows(),
        });
    }
    if crate::linalg::asymmetry(sigma0) > 1e-10 || crate::linalg::sym_eig_range(sigma0).0 < -1e-10 {
        return Err(Error::invalid("Sigma0", "must be symmetric positive semi-definite"));
    }
    Ok(())
}

fn record(sigmas: Vec<Matrix>, diverged_at: Option<usize>) -> CovarianceTrace {
    let traces: Vec<f64> = sigmas.iter().map(|s| s.trace()).collect();
    let peak_trace = if diverged_at.is_some() {
        f64::INFINITY
    } else {
        traces.iter().copied().fold(0.0, f64::max)
    };
    CovarianceTrace {
        sigma: sigmas,
        traces,
        peak_trace,
        diverged_at,
    }
}

/// `Σ_{t+1} = 𝒜 Σ_t 𝒜'` with `𝒜 = A(x_t) − ξ_t K̃(x_t) C(x_t)` along the
/// noise-free orbit from `x0`, for one erasure realization.
pub fn covariance_propagate(
    model: &SystemModel,
    gain: &ObserverGain,
    x0: &Vector,
    sigma0: &Matrix,
    realization: &ErasureRealization,
) -> Result<CovarianceTrace> {
    check_sigma0(sigma0, model.state_dim())?;
    let orbit = LinearisedOrbit::new(model, gain, x0, realization.horizon())?;
    let mut sigmas = vec![symmetrize(sigma0)];
    let mut diverged_at = None;
    for t in 0..orbit.horizon() {
        let a = orbit.step(t, realization.xi[t]);
        let next = symmetrize(&(a * &sigmas[t] * a.transpose()));
        let tr = next.trace();
        if !(tr.is_finite() && tr <= DIVERGENCE_THRESHOLD * DIVERGENCE_THRESHOLD) {
            diverged_at = Some(t + 1);
            break;
        }
        sigmas.push(next);
    }
    Ok(record(sigmas, diverged_at))
}

/// Exact expectation over the channel of the linearised second moment:
/// `E_{t+1} = p 𝒜₁ E_t 𝒜₁' + (1 − p) 𝒜₀ E_t 𝒜₀'`.
///
/// Valid because `ξ_t` is independent of `η_t`.
pub fn expected_second_moment(
    model: &SystemModel,
    gain: &ObserverGain,
    x0: &Vector,
    sigma0: &Matrix,
    p: f64,
    horizon: usize,
) -> Result<CovarianceTrace> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("p", "must lie in [0, 1]"));
    }
    check_sigma0(sigma0, model.state_dim())?;
    let orbit = LinearisedOrbit::new(model, gain, x0, horizon)?;
    let mut sigmas = vec![symmetrize(sigma0)];
    let mut diverged_at = None;
    for t in 0..horizon {
        let s = &sigmas[t];
        let (a0, a1) = (&orbit.open_loop[t], &orbit.closed_loop[t]);
        let next = symmetrize(&((a1 * s * a1.transpose()) * p + (a0 * s * a0.transpose()) * (1.0 - p)));
        let tr = next.trace();
        if !(tr.is_finite() && tr <= DIVERGENCE_THRESHOLD * DIVERGENCE_THRESHOLD) {
            diverged_at = Some(t + 1);
            break;
        }
        sigmas.push(next);
    }
    Ok(record(sigmas, diverged_at))
}
