//! Lyapunov spectrum by QR re-orthonormalisation of the tangent cocycle.
//!
//! An orthonormal frame is pushed through `A(x_t)` along the noise-free orbit
//! and re-orthonormalised every `renorm_period` steps. The logs of the
//! triangular factor's diagonal, averaged over the steps after `burn_in`,
//! estimate `Λ¹ ≥ … ≥ Λᴺ` (natural log per step).

use serde::Serialize;

use crate::dynsys::{diverged, SystemModel};
use crate::linalg::{log_abs_det, CompensatedSum};
use crate::{Error, Matrix, Result, Vector};

pub const DEFAULT_BURN_IN: usize = 1_000;
pub const DEFAULT_RENORM_PERIOD: usize = 1;
/// A spectrum counts as converged when no exponent moved by more than this
/// over the last 10% of the run.
pub const CONVERGENCE_THRESHOLD: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovSpectrum {
    /// Sorted non-increasing.
    pub exponents: Vec<f64>,
    pub horizon: usize,
    pub burn_in: usize,
    pub renorm_period: usize,
    /// Largest spread of any running estimate over the last 10% of the run.
    pub convergence_residual: f64,
}

impl LyapunovSpectrum {
    pub fn converged(&self) -> bool {
        self.convergence_residual < CONVERGENCE_THRESHOLD
    }

    pub fn sum(&self) -> f64 {
        self.exponents.iter().sum()
    }

    /// `Σ (Λᵏ)⁺`, the Ruelle upper bound on the entropy.
    pub fn positive_sum(&self) -> f64 {
        self.exponents.iter().map(|l| l.max(0.0)).sum()
    }

    pub fn has_negative(&self) -> bool {
        self.exponents.iter().any(|&l| l < 0.0)
    }
}

struct CocycleRun {
    spectrum: LyapunovSpectrum,
    mean_log_det: Option<f64>,
}

/// Estimates the Lyapunov spectrum of the model's map from `x0`.
///
/// `horizon` counts all steps including `burn_in`; requires
/// `horizon ≥ 10·burn_in` and `renorm_period ≥ 1`.
pub fn spectrum(
    model: &SystemModel,
    x0: &Vector,
    horizon: usize,
    burn_in: usize,
    renorm_period: usize,
) -> Result<LyapunovSpectrum> {
    run_cocycle(model, x0, horizon, burn_in, renorm_period, false).map(|r| r.spectrum)
}

/// `|(1/T) Σ_t log|det A(x_t)| − Σ_k Λᵏ|` over a common accumulation window.
pub fn det_sum_check(model: &SystemModel, x0: &Vector, horizon: usize) -> Result<f64> {
    let burn_in = DEFAULT_BURN_IN.min(horizon / 10);
    let run = run_cocycle(model, x0, horizon, burn_in, DEFAULT_RENORM_PERIOD, true)?;
    let mean_log_det = run.mean_log_det.expect("determinants tracked");
    Ok((mean_log_det - run.spectrum.sum()).abs())
}

fn run_cocycle(
    model: &SystemModel,
    x0: &Vector,
    horizon: usize,
    burn_in: usize,
    renorm_period: usize,
    track_det: bool,
) -> Result<CocycleRun> {
    if horizon < 1 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    if renorm_period < 1 {
        return Err(Error::invalid("renorm_period", "must be at least 1"));
    }
    if horizon < burn_in.saturating_mul(10) {
        return Err(Error::invalid(
            "burn_in",
            format!("horizon {horizon} must be at least 10 x burn_in ({burn_in})"),
        ));
    }
    let n = model.state_dim();
    let mut x = x0.clone();
    if x.len() != n {
        return Err(Error::Dimension {
            what: "state",
            expected: n,
            got: x.len(),
        });
    }

    let accumulated = horizon - burn_in;
    let window_start = accumulated - accumulated / 10;
    let mut sums = vec![CompensatedSum::default(); n];
    let mut log_det = CompensatedSum::default();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];

    let mut frame = Matrix::identity(n, n);
    let mut pending = 0usize;
    for t in 0..horizon {
        let jac = model.jacobian(&x)?;
        let accumulating = t >= burn_in;
        if track_det && accumulating {
            let ld = log_abs_det(&jac).ok_or(Error::SingularJacobian { step: t })?;
            log_det.add(ld);
        }
        frame = jac * frame;
        x = model.step(&x)?;
        if diverged(&x) {
            return Err(Error::Diverged { step: t + 1 });
        }
        pending += 1;

        let renorm = !accumulating || pending == renorm_period || t + 1 == horizon;
        if !renorm {
            continue;
        }
        let qr = frame.qr();
        let r = qr.r();
        for k in 0..n {
            let d = r[(k, k)].abs();
            if d == 0.0 || !d.is_finite() {
                return Err(Error::DegenerateCocycle { step: t });
            }
            if accumulating {
                sums[k].add(d.ln());
            }
        }
        frame = qr.q();
        pending = 0;

        let done = t + 1 - burn_in.min(t + 1);
        if accumulating && done >= window_start && done > 0 {
            for k in 0..n {
                let est = sums[k].value() / done as f64;
                lo[k] = lo[k].min(est);
                hi[k] = hi[k].max(est);
            }
        }
    }

    let mut exponents: Vec<f64> = sums.iter().map(|s| s.value() / accumulated as f64).collect();
    exponents.sort_by(|a, b| b.total_cmp(a));
    let convergence_residual = lo
        .iter()
        .zip(&hi)
        .map(|(l, h)| if h >= l { h - l } else { 0.0 })
        .fold(0.0, f64::max);

    Ok(CocycleRun {
        spectrum: LyapunovSpectrum {
            exponents,
            horizon,
            burn_in,
            renorm_period,
            convergence_residual,
        },
        mean_log_det: track_det.then(|| log_det.value() / accumulated as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{builtin, linear};
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn diagonal_linear_exponents_are_log_moduli() {
        let (m, _) = builtin("linear-diagonal").unwrap();
        let s = spectrum(&m, &dvector![0.0, 0.0], 500, 10, 1).unwrap();
        assert!((s.exponents[0] - 3f64.ln()).abs() < 1e-10);
        assert!((s.exponents[1] - 2f64.ln()).abs() < 1e-10);
        assert!(s.converged());
    }

    #[test]
    fn non_normal_linear_exponents_are_log_moduli() {
        // eigenvalues −3 and 0.5, non-orthogonal eigenvectors
        let a = dmatrix![-3.0, 1.7; 0.0, 0.5];
        let (m, _) = linear(a, dmatrix![1.0, 0.0], &dmatrix![0.0; 0.0]).unwrap();
        let s = spectrum(&m, &dvector![0.0, 0.0], 20_000, 100, 1).unwrap();
        assert!((s.exponents[0] - 3f64.ln()).abs() < 1e-3);
        assert!((s.exponents[1] - 0.5f64.ln()).abs() < 1e-3);
    }

    #[test]
    fn identity_map_has_zero_exponents() {
        let (m, _) = linear(Matrix::identity(2, 2), dmatrix![1.0, 0.0], &dmatrix![0.0; 0.0]).unwrap();
        let s = spectrum(&m, &dvector![0.3, 0.4], 100, 0, 1).unwrap();
        assert_eq!(s.exponents, vec![0.0, 0.0]);
        assert_eq!(det_sum_check(&m, &dvector![0.3, 0.4], 100).unwrap(), 0.0);
    }

    #[test]
    fn constant_jacobian_det_sum_is_exact() {
        let (m, _) = builtin("linear-diagonal").unwrap();
        for t in [1, 7, 250] {
            assert!(det_sum_check(&m, &dvector![0.0, 0.0], t).unwrap() < 1e-12);
        }
    }

    #[test]
    fn renormalisation_period_does_not_change_linear_result() {
        let (m, _) = builtin("linear-diagonal").unwrap();
        let a = spectrum(&m, &dvector![0.0, 0.0], 300, 0, 1).unwrap();
        let b = spectrum(&m, &dvector![0.0, 0.0], 300, 0, 7).unwrap();
        for (x, y) in a.exponents.iter().zip(&b.exponents) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn logistic_exponent_is_log_two() {
        let (m, _) = builtin("logistic").unwrap();
        let s = spectrum(&m, &dvector![0.1234], 200_000, 1000, 1).unwrap();
        assert!((s.exponents[0] - 2f64.ln()).abs() < 2e-2, "{:?}", s.exponents);
    }

    #[test]
    fn preconditions_are_enforced() {
        let (m, _) = builtin("henon").unwrap();
        let x0 = dvector![0.1, 0.1];
        assert!(spectrum(&m, &x0, 100, 20, 1).is_err());
        assert!(spectrum(&m, &x0, 100, 0, 0).is_err());
        assert!(spectrum(&m, &dvector![0.1], 100, 0, 1).is_err());
    }

    #[test]
    fn degenerate_cocycle_reports_step() {
        // zero Jacobian from the first step
        let (m, _) = linear(Matrix::zeros(2, 2), dmatrix![1.0, 0.0], &dmatrix![0.0; 0.0]).unwrap();
        assert_eq!(
            spectrum(&m, &dvector![1.0, 1.0], 10, 0, 1).unwrap_err(),
            Error::DegenerateCocycle { step: 0 }
        );
        assert_eq!(
            det_sum_check(&m, &dvector![1.0, 1.0], 5).unwrap_err(),
            Error::SingularJacobian { step: 0 }
        );
    }

    #[test]
    fn henon_sum_rule_and_initial_condition_invariance() {
        let (m, _) = builtin("henon").unwrap();
        let a = spectrum(&m, &dvector![0.1, 0.1], 200_000, 1000, 1).unwrap();
        let b = spectrum(&m, &dvector![-0.5, 0.2], 200_000, 1000, 1).unwrap();
        assert!((a.sum() - 0.3f64.ln()).abs() < 1e-3);
        assert!(a.exponents[0] > 0.0 && a.exponents[1] < 0.0);
        // the last-10% spread understates the O(1/sqrt(T)) sampling error,
        // so compare at the convergence threshold instead
        assert!(a.converged() && b.converged());
        for (x, y) in a.exponents.iter().zip(&b.exponents) {
            assert!((x - y).abs() <= CONVERGENCE_THRESHOLD, "{x} vs {y}");
        }
    }
}
