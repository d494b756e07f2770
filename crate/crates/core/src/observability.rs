//! Observability rank condition for the stacked output map
//! `θ(x) = (h(x), h(f(x)), …, h(f^{N−1}(x)))`.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynsys::{diverged, SystemModel};
use crate::linalg::{serialize_matrix, serialize_vector, sym_eig_range};
use crate::{Error, Matrix, Result, Vector};

/// Relative singular-value tolerance used when none is given.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservabilityReport {
    #[serde(serialize_with = "serialize_vector")]
    pub point: Vector,
    /// `∂θ/∂x`, (N·M)×N.
    #[serde(serialize_with = "serialize_matrix")]
    pub theta_jacobian: Matrix,
    /// `(∂θ/∂x)' ∂θ/∂x`, N×N.
    #[serde(serialize_with = "serialize_matrix")]
    pub gram: Matrix,
    pub rank: usize,
    pub min_eig: f64,
    pub max_eig: f64,
    pub satisfied: bool,
}

/// Builds `∂θ/∂x` at `x` by the chain rule along the noise-free orbit and
/// checks it has full column rank.
///
/// Singular values below `tol · σ_max` are treated as zero.
pub fn rank_condition(model: &SystemModel, x: &Vector, tol: f64) -> Result<ObservabilityReport> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid("tol", "must be > 0"));
    }
    let theta_jacobian = theta_jacobian(model, x)?;
    let n = model.state_dim();
    let sv = theta_jacobian.singular_values();
    let sigma_max = sv.max();
    let rank = sv.iter().filter(|&&s| s > tol * sigma_max && s > 0.0).count();
    let gram = crate::linalg::symmetrize(&(theta_jacobian.transpose() * &theta_jacobian));
    let (min_eig, max_eig) = sym_eig_range(&gram);
    Ok(ObservabilityReport {
        point: x.clone(),
        theta_jacobian,
        gram,
        rank,
        min_eig: min_eig.max(0.0),
        max_eig,
        satisfied: rank == n,
    })
}

/// Stacked Jacobian rows `C(x_k) A(x_{k−1}) ⋯ A(x_0)` for `k = 0 … N−1`.
pub fn theta_jacobian(model: &SystemModel, x: &Vector) -> Result<Matrix> {
    let n = model.state_dim();
    let m = model.output_dim();
    let mut out = Matrix::zeros(n * m, n);
    let mut state = x.clone();
    let mut transport = Matrix::identity(n, n);
    for k in 0..n {
        let c = model.output_jacobian(&state)?;
        out.rows_mut(k * m, m).copy_from(&(c * &transport));
        if k + 1 < n {
            transport = model.jacobian(&state)? * transport;
            state = model.step(&state)?;
            if diverged(&state) {
                return Err(Error::Diverged { step: k + 1 });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsScan {
    /// `min` over samples of the Gram matrix's smallest eigenvalue.
    pub alpha_theta: f64,
    /// `max` over samples of the Gram matrix's largest eigenvalue.
    pub beta_theta: f64,
    #[serde(serialize_with = "serialize_vector")]
    pub worst_point: Vector,
    /// False when any sample fails the rank condition.
    pub satisfied: bool,
    /// Indices of samples that fail the rank condition.
    pub failing: Vec<usize>,
}

/// Scans samples (in parallel) for the observability bounds `α_θ`, `β_θ`.
pub fn bounds_scan(model: &SystemModel, samples: &[Vector], tol: f64) -> Result<BoundsScan> {
    if samples.is_empty() {
        return Err(Error::invalid("samples", "must be nonempty"));
    }
    let reports: Vec<ObservabilityReport> = samples
        .par_iter()
        .map(|x| rank_condition(model, x, tol))
        .collect::<Result<_>>()?;

    let mut alpha = f64::INFINITY;
    let mut beta = f64::NEG_INFINITY;
    let mut worst = 0;
    let mut failing = Vec::new();
    for (i, r) in reports.iter().enumerate() {
        if r.min_eig < alpha {
            alpha = r.min_eig;
            worst = i;
        }
        beta = beta.max(r.max_eig);
        if !r.satisfied {
            failing.push(i);
        }
    }
    Ok(BoundsScan {
        alpha_theta: alpha,
        beta_theta: beta,
        worst_point: samples[worst].clone(),
        satisfied: failing.is_empty(),
        failing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{builtin, linear};
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn henon_at_origin_is_identity() {
        let (m, _) = builtin("henon").unwrap();
        let r = rank_condition(&m, &dvector![0.0, 0.0], DEFAULT_RANK_TOL).unwrap();
        assert_eq!(r.theta_jacobian, Matrix::identity(2, 2));
        assert_eq!(r.rank, 2);
        assert!(r.satisfied);
    }

    #[test]
    fn repeated_row_is_not_observable() {
        let (m, _) = linear(Matrix::identity(2, 2), dmatrix![1.0, 0.0], &dmatrix![0.0; 0.0]).unwrap();
        let r = rank_condition(&m, &dvector![0.4, -0.2], DEFAULT_RANK_TOL).unwrap();
        assert_eq!(r.rank, 1);
        assert!(!r.satisfied);

        let scan = bounds_scan(&m, &[dvector![0.4, -0.2], dvector![1.0, 1.0]], DEFAULT_RANK_TOL).unwrap();
        assert!(scan.alpha_theta.abs() < 1e-12);
        assert!(!scan.satisfied);
        assert_eq!(scan.failing, vec![0, 1]);
    }

    #[test]
    fn single_sample_bounds_are_that_points_eigenvalues() {
        let (m, _) = builtin("henon").unwrap();
        let x = dvector![0.0, 0.0];
        let r = rank_condition(&m, &x, DEFAULT_RANK_TOL).unwrap();
        let scan = bounds_scan(&m, std::slice::from_ref(&x), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(scan.alpha_theta, r.min_eig);
        assert_eq!(scan.beta_theta, r.max_eig);
        assert_eq!(scan.worst_point, x);
    }

    #[test]
    fn gram_eigenvalues_are_squared_singular_values() {
        let (m, _) = builtin("linear-diagonal").unwrap();
        let (h, _) = builtin("henon").unwrap();
        for (model, x) in [(&m, dvector![0.2, 0.7]), (&h, dvector![-0.9, 0.1]), (&h, dvector![1.2, -0.3])] {
            let r = rank_condition(model, &x, DEFAULT_RANK_TOL).unwrap();
            let sv = r.theta_jacobian.singular_values();
            let (smin, smax) = (sv.min(), sv.max());
            assert!((r.min_eig - smin * smin).abs() <= 1e-8 * smin * smin);
            assert!((r.max_eig - smax * smax).abs() <= 1e-8 * smax * smax);
        }
    }

    #[test]
    fn rejects_non_positive_tolerance_and_empty_samples() {
        let (m, _) = builtin("henon").unwrap();
        assert!(rank_condition(&m, &dvector![0.0, 0.0], 0.0).is_err());
        assert!(bounds_scan(&m, &[], 1e-8).is_err());
    }

    #[test]
    fn parallel_scan_matches_sequential() {
        let (m, _) = builtin("henon").unwrap();
        let tr = m.trajectory(&dvector![0.1, 0.1], 2000, 0.0, 0).unwrap();
        let samples = &tr.states[100..];
        let par = bounds_scan(&m, samples, DEFAULT_RANK_TOL).unwrap();
        let seq = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| bounds_scan(&m, samples, DEFAULT_RANK_TOL).unwrap());
        assert_eq!(par, seq);
        assert!(par.alpha_theta > 0.0);
    }
}
