//! Small-error nonlinear observer runs against the linearised error propagation.

use erasure_obs::dynsys::builtin;
use erasure_obs::simulate::{covariance_propagate, erasure_sequence, observe_run};
use erasure_obs::StreamSeed;
use nalgebra::dvector;

#[test]
fn henon_small_errors_follow_linearisation() {
    let (model, gain) = builtin("henon").unwrap();
    let x0 = dvector![0.1, 0.1];
    let delta = dvector![1e-6, -0.7e-6];
    let sigma0 = &delta * delta.transpose();
    for (stream, p) in [(0u64, 0.55), (1, 0.7), (2, 0.9)] {
        let real = erasure_sequence(p, 200, StreamSeed::new(11, stream)).unwrap();
        let run = observe_run(&model, &gain, &x0, &(&x0 + &delta), &real, 0.0, 0u64).unwrap();
        let cov = covariance_propagate(&model, &gain, &x0, &sigma0, &real).unwrap();
        let mut compared = 0;
        for t in 0..cov.traces.len() {
            let lin = cov.traces[t];
            let nonlin = run.error_norms[t].powi(2);
            if lin == 0.0 || lin > 1e-8 {
                // zero after a deadbeat reset, or out of the linear regime
                if lin > 1e-8 {
                    break;
                }
                assert!(nonlin < 1e-20, "t={t}: {nonlin}");
                continue;
            }
            assert!((nonlin / lin - 1.0).abs() < 0.05, "p={p} t={t}: {nonlin} vs {lin}");
            compared += 1;
        }
        assert!(compared > 0);
    }
}
