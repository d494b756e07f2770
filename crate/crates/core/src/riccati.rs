//! Riccati-like recursion along a trajectory and the pointwise necessary
//! condition for mean-square stability of the linearised error.
//!
//! ```text
//! Q₀(x_{t+1}) = A Q₀ A' + R − A Q₀ C' (I_M + C Q₀ C')⁻¹ C Q₀ A'
//! (1 − p)^M det(A)² det Q₀(x_t) / det Q₀(x_{t+1}) < 1
//! ```
//!
//! Determinants are handled in log space throughout.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynsys::SystemModel;
use crate::linalg::{log_abs_det, log_det_spd, serialize_matrices, serialize_vectors, sym_eig_range, symmetrize};
use crate::{Error, Matrix, Result, Vector};

pub const DEFAULT_EPSILON: f64 = 1e-3;
/// `Q₀` eigenvalues outside `[EIG_FLOOR, EIG_CEILING]` stop the recursion.
pub const EIG_FLOOR: f64 = 1e-12;
pub const EIG_CEILING: f64 = 1e12;

/// Choice of the positive semi-definite term `R(x_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RPolicy {
    /// `R = ε I_N`, `ε ≥ 0`.
    ScaledIdentity(f64),
}

impl Default for RPolicy {
    fn default() -> Self {
        RPolicy::ScaledIdentity(DEFAULT_EPSILON)
    }
}

impl RPolicy {
    pub fn matrix(&self, n: usize) -> Matrix {
        match *self {
            RPolicy::ScaledIdentity(eps) => Matrix::identity(n, n) * eps,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            RPolicy::ScaledIdentity(eps) if eps >= 0.0 && eps.is_finite() => Ok(()),
            RPolicy::ScaledIdentity(_) => Err(Error::invalid("epsilon", "must be finite and >= 0")),
        }
    }
}

/// One step of the Riccati-like recursion, symmetrised.
pub fn riccati_step(q0: &Matrix, a: &Matrix, c: &Matrix, r: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    check_shape("Q0", q0, n, n)?;
    check_shape("R", r, n, n)?;
    if c.ncols() != n {
        return Err(Error::Dimension {
            what: "C columns",
            expected: n,
            got: c.ncols(),
        });
    }
    let m = c.nrows();
    let aq = a * q0;
    let cq = c * q0;
    let innovation = Matrix::identity(m, m) + &cq * c.transpose();
    let inv = innovation
        .try_inverse()
        .ok_or(Error::Singular("I_M + C Q0 C'"))?;
    let next = &aq * a.transpose() + r - &aq * c.transpose() * inv * cq * a.transpose();
    Ok(symmetrize(&next))
}

/// Trace-minimising gain `A Q C' (C Q C')⁻¹`.
pub fn optimal_gain(q: &Matrix, a: &Matrix, c: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    check_shape("Q", q, n, n)?;
    let qc = q * c.transpose();
    let s = c * &qc;
    let inv = s
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or(Error::Singular("C Q C' (output map rank-deficient at this state)"))?;
    Ok(a * qc * inv)
}

/// `det(I_N − p C'(C Q C')⁻¹ C Q)`; equals `(1 − p)^M` when `C Q C'` is invertible.
pub fn erasure_determinant(q: &Matrix, c: &Matrix, p: f64) -> Result<f64> {
    let n = q.nrows();
    let s = (c * q * c.transpose())
        .try_inverse()
        .ok_or(Error::Singular("C Q C'"))?;
    let m = Matrix::identity(n, n) - c.transpose() * s * c * q * p;
    Ok(m.determinant())
}

fn check_shape(what: &'static str, m: &Matrix, rows: usize, cols: usize) -> Result<()> {
    if m.nrows() != rows {
        return Err(Error::Dimension {
            what,
            expected: rows,
            got: m.nrows(),
        });
    }
    if m.ncols() != cols {
        return Err(Error::Dimension {
            what,
            expected: cols,
            got: m.ncols(),
        });
    }
    Ok(())
}

/// Why a trace stopped early.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundednessViolation {
    /// Index of the first `Q₀` outside the allowed eigenvalue range.
    pub step: usize,
    pub eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiccatiTrace {
    pub p: f64,
    pub output_dim: usize,
    #[serde(serialize_with = "serialize_vectors")]
    pub states: Vec<Vector>,
    /// `Q₀(x_t)`, one more entry than there are condition values.
    #[serde(serialize_with = "serialize_matrices")]
    pub q0: Vec<Matrix>,
    pub log_det_q0: Vec<f64>,
    /// `K̃*(x_t)`; `None` where `C Q₀ C'` is singular.
    #[serde(skip)]
    pub gains: Vec<Option<Matrix>>,
    pub condition_values: Vec<f64>,
    pub log_condition_values: Vec<f64>,
    /// Mean of `log_condition_values[0..=t]`.
    pub running_log_mean: Vec<f64>,
    pub min_eig_seen: f64,
    pub max_eig_seen: f64,
    pub violation: Option<BoundednessViolation>,
}

impl RiccatiTrace {
    /// Number of completed steps.
    pub fn len(&self) -> usize {
        self.condition_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.condition_values.is_empty()
    }

    pub fn final_log_mean(&self) -> f64 {
        self.running_log_mean.last().copied().unwrap_or(f64::NAN)
    }

    /// Negative running log mean at the horizon: the necessary condition can hold.
    pub fn satisfied(&self) -> bool {
        self.final_log_mean() < 0.0
    }

    /// Columns `t, det_Q0, condition_value, running_log_mean`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "det_Q0", "condition_value", "running_log_mean"])?;
        for t in 0..self.len() {
            out.write_record([
                t.to_string(),
                crate::output::fmt_f64(self.log_det_q0[t].exp()),
                crate::output::fmt_f64(self.condition_values[t]),
                crate::output::fmt_f64(self.running_log_mean[t]),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Runs the Riccati-like recursion along the noise-free orbit from `x0` and
/// records the pointwise condition at each step.
///
/// Stops early (with [`RiccatiTrace::violation`] set) when `Q₀` leaves the
/// eigenvalue range `[EIG_FLOOR, EIG_CEILING]`.
pub fn condition_trace(
    model: &SystemModel,
    x0: &Vector,
    horizon: usize,
    p: f64,
    r_policy: RPolicy,
    q_init: &Matrix,
) -> Result<RiccatiTrace> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("p", "must lie in (0, 1)"));
    }
    if horizon < 1 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    r_policy.validate()?;
    let n = model.state_dim();
    let m = model.output_dim();
    check_shape("Q_init", q_init, n, n)?;
    let r = r_policy.matrix(n);
    let log_erasure = m as f64 * (1.0 - p).ln();

    let (lo, hi) = sym_eig_range(q_init);
    if lo < EIG_FLOOR || hi > EIG_CEILING {
        return Err(Error::invalid("Q_init", "must be positive definite within [1e-12, 1e12]"));
    }

    let mut trace = RiccatiTrace {
        p,
        output_dim: m,
        states: vec![x0.clone()],
        q0: vec![symmetrize(q_init)],
        log_det_q0: vec![log_det_spd(q_init)?],
        gains: Vec::with_capacity(horizon),
        condition_values: Vec::with_capacity(horizon),
        log_condition_values: Vec::with_capacity(horizon),
        running_log_mean: Vec::with_capacity(horizon),
        min_eig_seen: lo,
        max_eig_seen: hi,
        violation: None,
    };

    let mut sum = crate::linalg::CompensatedSum::default();
    for t in 0..horizon {
        let x = &trace.states[t];
        let a = model.jacobian(x)?;
        let c = model.output_jacobian(x)?;
        let q = &trace.q0[t];
        let next_q = riccati_step(q, &a, &c, &r)?;
        let (lo, hi) = sym_eig_range(&next_q);
        if !(lo >= EIG_FLOOR && hi <= EIG_CEILING) {
            let eigenvalue = if lo < EIG_FLOOR { lo } else { hi };
            trace.violation = Some(BoundednessViolation {
                step: t + 1,
                eigenvalue,
            });
            break;
        }
        let next_x = model.step(x)?;
        if crate::dynsys::diverged(&next_x) {
            return Err(Error::Diverged { step: t + 1 });
        }

        let gain = optimal_gain(q, &a, &c).ok();
        let next_log_det = log_det_spd(&next_q)?;
        let log_det_a = log_abs_det(&a).unwrap_or(f64::NEG_INFINITY);
        let log_cond = log_erasure + 2.0 * log_det_a + trace.log_det_q0[t] - next_log_det;
        sum.add(log_cond);

        trace.min_eig_seen = trace.min_eig_seen.min(lo);
        trace.max_eig_seen = trace.max_eig_seen.max(hi);
        trace.gains.push(gain);
        trace.log_condition_values.push(log_cond);
        trace.condition_values.push(log_cond.exp());
        trace.running_log_mean.push(sum.value() / (t + 1) as f64);
        trace.states.push(next_x);
        trace.q0.push(next_q);
        trace.log_det_q0.push(next_log_det);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{builtin, linear};
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn scalar_step_by_hand() {
        // 4·1 + 1 − 4/(1 + 1) = 3
        let q = riccati_step(&dmatrix![1.0], &dmatrix![2.0], &dmatrix![1.0], &dmatrix![1.0]).unwrap();
        assert!((q[(0, 0)] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn no_output_leaves_lyapunov_update() {
        let q = dmatrix![2.0, 0.5; 0.5, 1.0];
        let a = dmatrix![1.0, 2.0; -0.5, 0.3];
        let r = dmatrix![0.1, 0.0; 0.0, 0.2];
        let next = riccati_step(&q, &a, &Matrix::zeros(1, 2), &r).unwrap();
        let expected = &a * &q * a.transpose() + &r;
        assert!((next - expected).amax() < 1e-14);
    }

    #[test]
    fn identity_case_halves() {
        let i = Matrix::identity(3, 3);
        let next = riccati_step(&i, &i, &i, &Matrix::zeros(3, 3)).unwrap();
        assert!((next - &i * 0.5).amax() < 1e-15);
    }

    #[test]
    fn optimal_gain_examples() {
        for q in [0.3, 1.0, 17.0] {
            let k = optimal_gain(&dmatrix![q], &dmatrix![2.0], &dmatrix![1.0]).unwrap();
            assert!((k[(0, 0)] - 2.0).abs() < 1e-14);
        }
        let i = Matrix::identity(2, 2);
        assert_eq!(optimal_gain(&i, &i, &i).unwrap(), i);

        let (m, _) = builtin("henon").unwrap();
        let x = dvector![0.0, 0.0];
        let k = optimal_gain(&i, &m.jacobian(&x).unwrap(), &m.output_jacobian(&x).unwrap()).unwrap();
        assert!((k - dmatrix![0.0; 0.3]).amax() < 1e-15);
    }

    #[test]
    fn optimal_gain_reports_singular_output() {
        let i = Matrix::identity(2, 2);
        assert!(matches!(
            optimal_gain(&i, &i, &Matrix::zeros(1, 2)),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn scalar_linear_condition_converges_to_four_times_erasure() {
        let (m, _) = builtin("linear-scalar").unwrap();
        for p in [0.5, 0.75, 0.9] {
            let tr = condition_trace(&m, &dvector![0.0], 200, p, RPolicy::default(), &dmatrix![1.0]).unwrap();
            let last = *tr.condition_values.last().unwrap();
            assert!((last - 4.0 * (1.0 - p)).abs() < 1e-6, "p={p}: {last}");
            assert!(tr.violation.is_none());
        }
    }

    #[test]
    fn condition_values_are_recomputable_from_stored_q0() {
        let (m, _) = builtin("henon").unwrap();
        let tr = condition_trace(&m, &dvector![0.1, 0.1], 200, 0.6, RPolicy::default(), &Matrix::identity(2, 2)).unwrap();
        for t in 0..tr.len() {
            let a = m.jacobian(&tr.states[t]).unwrap();
            let v = 0.4 * a.determinant().powi(2) * tr.q0[t].determinant() / tr.q0[t + 1].determinant();
            assert!((v - tr.condition_values[t]).abs() <= 1e-9 * v.abs());
            assert!(crate::linalg::asymmetry(&tr.q0[t]) < 1e-10);
        }
    }

    #[test]
    fn no_output_with_expansion_is_flagged_unbounded() {
        let (m, _) = linear(dmatrix![2.0, 0.0; 0.0, 1.5], Matrix::zeros(1, 2), &dmatrix![0.0; 0.0]).unwrap();
        let tr = condition_trace(&m, &dvector![0.0, 0.0], 1000, 0.5, RPolicy::default(), &Matrix::identity(2, 2)).unwrap();
        let v = tr.violation.expect("unbounded Q0 must be flagged");
        assert!(v.eigenvalue > EIG_CEILING);
        assert!(tr.len() < 1000);
        assert!(tr.log_det_q0.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rejects_invalid_probability() {
        let (m, _) = builtin("linear-scalar").unwrap();
        for p in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(condition_trace(&m, &dvector![0.0], 10, p, RPolicy::default(), &dmatrix![1.0]).is_err());
        }
    }

    #[test]
    fn csv_has_header_and_one_row_per_step() {
        let (m, _) = builtin("linear-scalar").unwrap();
        let tr = condition_trace(&m, &dvector![0.0], 5, 0.8, RPolicy::default(), &dmatrix![1.0]).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,det_Q0,condition_value,running_log_mean");
        assert_eq!(lines.len(), 6);
    }
}
