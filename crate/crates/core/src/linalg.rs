//! Small dense linear-algebra helpers shared across modules.

use nalgebra::linalg::{Cholesky, SymmetricEigen};
use serde::ser::SerializeSeq;
use serde::Serializer;

use crate::{Error, Matrix, Result};

/// `(X + X') / 2`.
pub fn symmetrize(x: &Matrix) -> Matrix {
    (x + x.transpose()) * 0.5
}

/// Largest absolute entry of `X - X'`.
pub fn asymmetry(x: &Matrix) -> f64 {
    (x - x.transpose()).amax()
}

/// `log det Q` for symmetric positive-definite `Q`, through its Cholesky factor.
pub fn log_det_spd(q: &Matrix) -> Result<f64> {
    let chol = Cholesky::new(q.clone()).ok_or(Error::Singular("matrix is not positive definite"))?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// `log |det A|` via LU; `None` when the determinant is exactly zero.
pub fn log_abs_det(a: &Matrix) -> Option<f64> {
    let det = a.clone().lu().determinant();
    (det != 0.0 && det.is_finite()).then(|| det.abs().ln())
}

/// Smallest and largest eigenvalue of a symmetric matrix.
/// Moduli of the (possibly complex) eigenvalues of a square matrix.
///
/// Uses a bounded Schur iteration; nalgebra's unbounded variant can fail to
/// terminate on some inputs.
pub fn eigenvalue_moduli(a: &Matrix) -> Result<Vec<f64>> {
    let schur = a
        .clone()
        .try_schur(f64::EPSILON, 10_000)
        .ok_or(Error::Singular("Schur decomposition did not converge"))?;
    Ok(schur.complex_eigenvalues().iter().map(|z| z.norm()).collect())
}

pub fn sym_eig_range(x: &Matrix) -> (f64, f64) {
    let eig = SymmetricEigen::new(x.clone()).eigenvalues;
    (eig.min(), eig.max())
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Serialises a matrix as a list of rows.
pub fn serialize_matrix<S: Serializer>(m: &Matrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    s.collect_seq(rows)
}

pub fn serialize_matrices<S: Serializer>(
    ms: &[Matrix],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(ms.len()))?;
    for m in ms {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        seq.serialize_element(&rows)?;
    }
    seq.end()
}

pub fn serialize_vector<S: Serializer>(
    v: &crate::Vector,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

pub fn serialize_vectors<S: Serializer>(
    vs: &[crate::Vector],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(vs.len()))?;
    for v in vs {
        seq.serialize_element(v.as_slice())?;
    }
    seq.end()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalue_moduli_of_rotation_and_diagonal() {
        let rot = nalgebra::dmatrix![0.0, -2.0; 2.0, 0.0];
        let m = eigenvalue_moduli(&rot).unwrap();
        assert!(m.iter().all(|v| (v - 2.0).abs() < 1e-12));
        let mut d = eigenvalue_moduli(&nalgebra::dmatrix![2.0, 0.0; 0.0, -3.0]).unwrap();
        d.sort_by(f64::total_cmp);
        assert_eq!(d, vec![2.0, 3.0]);
    }

    #[test]
    fn log_det_matches_direct_determinant() {
        let q = Matrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        assert!((log_det_spd(&q).unwrap() - 11f64.ln()).abs() < 1e-14);
        assert!((log_abs_det(&q).unwrap() - 11f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn log_det_rejects_indefinite() {
        let q = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(log_det_spd(&q).is_err());
        assert!(log_abs_det(&Matrix::zeros(2, 2)).is_none());
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }
}
