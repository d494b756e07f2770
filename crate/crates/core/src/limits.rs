//! Closed-form critical erasure probabilities.
//!
//! All conditions are evaluated in log space:
//! `lhs = M log(1 − p) + 2 S`, where `S` is `Σ log|λ_k|` for linear systems,
//! `Σ (Λᵏ)⁺` for nonlinear ones, or an entropy value. The condition holds
//! when `lhs < 0`, i.e. when `p > p* = 1 − exp(−2S/M)`.

use serde::Serialize;

use crate::lyapunov::{LyapunovSpectrum, CONVERGENCE_THRESHOLD};
use crate::{Error, Result};

/// Critical probability for a system, before a particular `p` is chosen.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalProbability {
    pub output_dim: usize,
    /// `S` in `M log(1 − p) + 2S`.
    pub expansion: f64,
    /// `p*`: the channel must deliver with probability above this.
    pub critical_p: f64,
    /// `q* = 1 − p*`, the critical dropout rate.
    pub critical_q: f64,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitVerdict {
    pub p: f64,
    pub output_dim: usize,
    /// `M log(1 − p) + 2S`.
    pub lhs: f64,
    pub critical_p: f64,
    pub critical_q: f64,
    /// `lhs < 0`.
    pub satisfied: bool,
    pub notes: Vec<String>,
}

impl CriticalProbability {
    fn from_expansion(expansion: f64, output_dim: usize, notes: Vec<String>) -> Self {
        let critical_q = (-2.0 * expansion / output_dim as f64).exp();
        CriticalProbability {
            output_dim,
            expansion,
            critical_p: 1.0 - critical_q,
            critical_q,
            notes,
        }
    }

    /// `M log(1 − p) + 2S`.
    pub fn lhs(&self, p: f64) -> f64 {
        self.output_dim as f64 * (1.0 - p).ln() + 2.0 * self.expansion
    }

    pub fn verdict(&self, p: f64) -> Result<LimitVerdict> {
        check_probability(p)?;
        let lhs = self.lhs(p);
        Ok(LimitVerdict {
            p,
            output_dim: self.output_dim,
            lhs,
            critical_p: self.critical_p,
            critical_q: self.critical_q,
            satisfied: lhs < 0.0,
            notes: self.notes.clone(),
        })
    }
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("p", "must lie in (0, 1)"))
    }
}

fn check_outputs(m: usize) -> Result<()> {
    if m >= 1 {
        Ok(())
    } else {
        Err(Error::invalid("M", "must be at least 1"))
    }
}

fn multi_output_note(m: usize) -> Option<String> {
    (m > 1).then(|| {
        format!("M = {m}: critical probability uses the M-th root form 1 - exp(-2S/M) of the product condition")
    })
}

/// `p* = 1 − (Π|λ_k|)^(−2/M)` for a linear system whose eigenvalues all lie
/// outside the unit circle.
pub fn linear_critical_p(eigenvalue_moduli: &[f64], output_dim: usize) -> Result<CriticalProbability> {
    check_outputs(output_dim)?;
    if eigenvalue_moduli.is_empty() {
        return Err(Error::invalid("eigenvalue_moduli", "must be nonempty"));
    }
    if let Some(bad) = eigenvalue_moduli.iter().find(|&&l| !(l > 1.0 && l.is_finite())) {
        return Err(Error::invalid(
            "eigenvalue_moduli",
            format!("{bad} is not > 1; the linear limit assumes every eigenvalue has modulus greater than one"),
        ));
    }
    let expansion: f64 = eigenvalue_moduli.iter().map(|l| l.ln()).sum();
    let notes = multi_output_note(output_dim).into_iter().collect();
    let mut cp = CriticalProbability::from_expansion(expansion, output_dim, notes);
    // exact when the product is representable, e.g. 1 − 2^(−2) = 0.75
    let product: f64 = eigenvalue_moduli.iter().product();
    if product.is_finite() {
        cp.critical_q = product.powf(-2.0 / output_dim as f64);
        cp.critical_p = 1.0 - cp.critical_q;
    }
    Ok(cp)
}

/// `p* = 1 − exp(−2 Σ(Λᵏ)⁺ / M)` from a converged Lyapunov spectrum.
///
/// Only positive exponents contribute; when some exponent is negative the
/// result is labelled as using the positive-part convention.
pub fn nonlinear_critical_p(spectrum: &LyapunovSpectrum, output_dim: usize) -> Result<CriticalProbability> {
    if !spectrum.converged() {
        return Err(Error::NotConverged {
            residual: spectrum.convergence_residual,
            threshold: CONVERGENCE_THRESHOLD,
        });
    }
    critical_p_from_exponents(&spectrum.exponents, output_dim)
}

/// As [`nonlinear_critical_p`], for exponents obtained elsewhere.
pub fn critical_p_from_exponents(exponents: &[f64], output_dim: usize) -> Result<CriticalProbability> {
    check_outputs(output_dim)?;
    if exponents.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFinite("exponents"));
    }
    let expansion: f64 = exponents.iter().map(|l| l.max(0.0)).sum();
    let mut notes = Vec::new();
    if expansion == 0.0 {
        notes.push("no positive exponents: no limitation (critical p = 0)".to_string());
    } else if exponents.iter().any(|&l| l < 0.0) {
        notes.push(
            "negative exponents present: only the positive part enters (positive-part convention; the bound is proved for all-positive spectra)"
                .to_string(),
        );
    }
    notes.extend(multi_output_note(output_dim));
    Ok(CriticalProbability::from_expansion(expansion, output_dim, notes))
}

/// `M log(1 − p) + 2H < 0` for an entropy `H` (or the Ruelle bound `Σ(Λᵏ)⁺`).
pub fn entropy_condition(p: f64, output_dim: usize, entropy: f64) -> Result<LimitVerdict> {
    check_probability(p)?;
    check_outputs(output_dim)?;
    if !(entropy >= 0.0 && entropy.is_finite()) {
        return Err(Error::invalid("entropy", "must be finite and >= 0"));
    }
    CriticalProbability::from_expansion(entropy, output_dim, Vec::new()).verdict(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_examples() {
        assert_eq!(linear_critical_p(&[2.0], 1).unwrap().critical_p, 0.75);
        let p = linear_critical_p(&[2.0, 3.0], 1).unwrap().critical_p;
        assert!((p - (1.0 - 1.0 / 36.0)).abs() < 1e-15);
        let p = linear_critical_p(&[2.0, 3.0], 2).unwrap().critical_p;
        assert!((p - (1.0 - 1.0 / 6.0)).abs() < 1e-15);
    }

    #[test]
    fn linear_rejects_stable_modes() {
        let err = linear_critical_p(&[2.0, 1.0], 1).unwrap_err().to_string();
        assert!(err.contains("greater than one"), "{err}");
        assert!(linear_critical_p(&[0.5], 1).is_err());
        assert!(linear_critical_p(&[2.0], 0).is_err());
    }

    #[test]
    fn henon_exponents_give_reported_critical_p() {
        let cp = critical_p_from_exponents(&[0.426, -1.63], 1).unwrap();
        assert!((cp.critical_p - 0.5734).abs() < 5e-5, "{}", cp.critical_p);
        assert!((cp.critical_q - (-0.852f64).exp()).abs() < 1e-15);
        assert!(cp.notes.iter().any(|n| n.contains("positive-part")));
    }

    #[test]
    fn scalar_log_two_matches_linear() {
        let a = critical_p_from_exponents(&[2f64.ln()], 1).unwrap().critical_p;
        let b = linear_critical_p(&[2.0], 1).unwrap().critical_p;
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn zero_spectrum_has_no_limitation() {
        let cp = critical_p_from_exponents(&[0.0, 0.0], 1).unwrap();
        assert_eq!(cp.critical_p, 0.0);
        assert!(!cp.notes.is_empty());
    }

    #[test]
    fn entropy_examples() {
        let v = entropy_condition(0.7, 1, 0.426).unwrap();
        assert!((v.lhs - (0.3f64.ln() + 0.852)).abs() < 1e-15);
        assert!((v.lhs + 0.352).abs() < 1e-3);
        assert!(v.satisfied);

        let v = entropy_condition(0.55, 1, 0.426).unwrap();
        assert!((v.lhs - 0.0534).abs() < 1e-3);
        assert!(!v.satisfied);

        for p in [0.01, 0.5, 0.99] {
            assert!(entropy_condition(p, 1, 0.0).unwrap().satisfied);
        }
        assert!(entropy_condition(1.0, 1, 0.1).is_err());
        assert!(entropy_condition(0.5, 1, -0.1).is_err());
    }

    #[test]
    fn multi_output_is_flagged() {
        let cp = linear_critical_p(&[2.0, 3.0], 2).unwrap();
        assert!(cp.notes.iter().any(|n| n.contains("M-th root")));
    }

    #[test]
    fn unconverged_spectrum_is_rejected() {
        let s = LyapunovSpectrum {
            exponents: vec![0.4],
            horizon: 100,
            burn_in: 0,
            renorm_period: 1,
            convergence_residual: 0.5,
        };
        assert!(matches!(nonlinear_critical_p(&s, 1), Err(Error::NotConverged { .. })));
    }
}
