use erasure_obs::dynsys::builtin;
use erasure_obs::lyapunov;
use erasure_obs::riccati::{condition_trace, erasure_determinant, riccati_step, RPolicy};
use erasure_obs::{Matrix, Vector};
use nalgebra::dvector;
use proptest::prelude::*;

fn spd(n: usize, entries: &[f64]) -> Matrix {
    let b = Matrix::from_fn(n, n, |i, j| entries[i * 5 + j]);
    &b * b.transpose() + Matrix::identity(n, n) * 0.05
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sylvester_determinant_identity(
        n in 1usize..=5,
        m_frac in 0.0f64..1.0,
        q_entries in prop::collection::vec(-1.0f64..1.0, 25),
        c_entries in prop::collection::vec(-2.0f64..2.0, 25),
        p in 0.01f64..0.99,
    ) {
        let m = 1 + ((n as f64 * m_frac) as usize).min(n - 1);
        let q = spd(n, &q_entries);
        let c = Matrix::from_fn(m, n, |i, j| c_entries[i * 5 + j]);
        prop_assume!((&c * c.transpose()).determinant().abs() > 1e-3);
        let expected = (1.0 - p).powi(m as i32);
        let got = erasure_determinant(&q, &c, p).unwrap();
        prop_assert!(((got - expected) / expected).abs() < 1e-8, "{got} vs {expected}");
    }

    #[test]
    fn riccati_step_preserves_symmetry_and_positivity(
        n in 1usize..=4,
        q_entries in prop::collection::vec(-1.0f64..1.0, 25),
        a_entries in prop::collection::vec(-2.0f64..2.0, 25),
        eps in 0.0f64..0.1,
    ) {
        let q = spd(n, &q_entries);
        let a = Matrix::from_fn(n, n, |i, j| a_entries[i * 5 + j]);
        let c = Matrix::from_fn(1, n, |_, j| if j == 0 { 1.0 } else { 0.0 });
        let next = riccati_step(&q, &a, &c, &(Matrix::identity(n, n) * eps)).unwrap();
        prop_assert!((&next - next.transpose()).norm() == 0.0);
        prop_assert!(next.symmetric_eigenvalues().min() > -1e-9 * (1.0 + next.norm()));
    }
}

#[test]
fn constant_jacobian_models_reach_a_fixed_point() {
    for name in ["linear-scalar", "linear-diagonal"] {
        let (model, _) = builtin(name).unwrap();
        let n = model.state_dim();
        for p in [0.5, 0.9] {
            let trace = condition_trace(&model, &Vector::zeros(n), 1000, p, RPolicy::default(), &Matrix::identity(n, n)).unwrap();
            let settled = trace.q0.windows(2).position(|w| (&w[1] - &w[0]).norm() < 1e-8);
            assert!(settled.is_some_and(|t| t < 1000), "{name} p={p}");
        }
    }
}

#[test]
fn linear_condition_value_converges_across_r_scales() {
    let (model, _) = builtin("linear-diagonal").unwrap();
    let finals: Vec<f64> = [1e-4, 1e-3, 1e-2]
        .iter()
        .map(|&eps| {
            let t = condition_trace(&model, &dvector![0.0, 0.0], 1000, 0.8, RPolicy::ScaledIdentity(eps), &Matrix::identity(2, 2)).unwrap();
            *t.condition_values.last().unwrap()
        })
        .collect();
    // (1 − p)^M |det A|² = 0.2 · 36
    for v in &finals {
        assert!((v - 7.2).abs() < 1e-8, "{v}");
    }
}

#[test]
fn henon_running_mean_tracks_full_exponent_sum() {
    let (model, _) = builtin("henon").unwrap();
    let x0 = dvector![0.1, 0.1];
    let spec = lyapunov::spectrum(&model, &x0, 200_000, 1000, 1).unwrap();
    for p in [0.55, 0.7] {
        let trace = condition_trace(&model, &x0, 100_000, p, RPolicy::default(), &Matrix::identity(2, 2)).unwrap();
        assert!(trace.violation.is_none());
        let full = (1.0 - p).ln() + 2.0 * spec.sum();
        assert!((trace.final_log_mean() - full).abs() < 0.02, "p={p}: {} vs {full}", trace.final_log_mean());
        assert!(trace.satisfied());
    }
}

#[test]
fn henon_without_r_collapses_and_is_flagged() {
    let (model, _) = builtin("henon").unwrap();
    let trace = condition_trace(&model, &dvector![0.1, 0.1], 1000, 0.55, RPolicy::ScaledIdentity(0.0), &Matrix::identity(2, 2)).unwrap();
    let v = trace.violation.expect("Q0 must leave the bounded range");
    assert!(v.eigenvalue < 1e-12);
    assert!(trace.len() < 1000);
}

#[test]
fn no_output_information_with_expansion_is_unbounded() {
    let (model, _) = builtin("linear-scalar").unwrap();
    let trace = condition_trace(&model, &dvector![0.0], 1000, 0.01, RPolicy::default(), &Matrix::identity(1, 1)).unwrap();
    // Q0 → 4Q/(1 + Q) + ε converges; the condition stays above one
    assert!(!trace.satisfied());
}
