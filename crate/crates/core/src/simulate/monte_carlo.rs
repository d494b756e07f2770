use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{erasure_sequence, observe_run};
use crate::dynsys::{ObserverGain, SystemModel};
use crate::output::fmt_f64;
use crate::seed::{StreamRole, StreamSeed};
use crate::{Error, Result, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub p: f64,
    pub horizon: usize,
    pub realizations: usize,
    pub noise_amplitude: f64,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub p: f64,
    pub realizations: usize,
    pub horizon: usize,
    pub noise_amplitude: f64,
    pub master_seed: u64,
    /// `(1/R) Σ_r ‖e_t^{(r)}‖²` for `t = 0 … T`; `+∞` once any run diverged.
    pub mean_sq_error: Vec<f64>,
    pub peak_mean_sq_error: f64,
    /// `(realization, step)` for every run whose observer diverged.
    pub diverged_runs: Vec<(usize, usize)>,
}

impl MonteCarloReport {
    pub fn diverged(&self) -> bool {
        !self.diverged_runs.is_empty()
    }

    /// Columns `t, mean_sq_error`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "mean_sq_error"])?;
        for (t, v) in self.mean_sq_error.iter().enumerate() {
            out.write_record([t.to_string(), fmt_f64(*v)])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Averages `‖x_t − x̂_t‖²` over `R` erasure/noise realizations.
///
/// Realization `r` draws its channel from stream `(master_seed, 2r)` and its
/// plant noise from `(master_seed, 2r + 1)`. Runs execute in parallel, are
/// gathered by index and summed in index order, so the report does not
/// depend on scheduling or thread count.
pub fn monte_carlo(
    model: &SystemModel,
    gain: &ObserverGain,
    x0: &Vector,
    xhat0: &Vector,
    config: &MonteCarloConfig,
) -> Result<MonteCarloReport> {
    if config.realizations < 1 {
        return Err(Error::invalid("realizations", "must be at least 1"));
    }
    if config.horizon < 1 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    let runs: Vec<(Vec<f64>, Option<usize>)> = (0..config.realizations)
        .into_par_iter()
        .map(|r| {
            let r = r as u64;
            let real = erasure_sequence(
                config.p,
                config.horizon,
                StreamSeed::realization(config.master_seed, r, StreamRole::Erasure),
            )?;
            let run = observe_run(
                model,
                gain,
                x0,
                xhat0,
                &real,
                config.noise_amplitude,
                StreamSeed::realization(config.master_seed, r, StreamRole::PlantNoise),
            )?;
            let sq = run.error_norms.iter().map(|e| e * e).collect();
            Ok((sq, run.diverged_at))
        })
        .collect::<Result<_>>()?;

    let n = config.horizon + 1;
    let mut sums = vec![0.0; n];
    let mut diverged_runs = Vec::new();
    for (r, (sq, div)) in runs.iter().enumerate() {
        for (t, s) in sums.iter_mut().enumerate() {
            *s += sq.get(t).copied().unwrap_or(f64::INFINITY);
        }
        if let Some(step) = div {
            diverged_runs.push((r, *step));
        }
    }
    let scale = config.realizations as f64;
    let mean_sq_error: Vec<f64> = sums.into_iter().map(|s| s / scale).collect();
    let peak_mean_sq_error = mean_sq_error.iter().copied().fold(0.0, f64::max);
    Ok(MonteCarloReport {
        p: config.p,
        realizations: config.realizations,
        horizon: config.horizon,
        noise_amplitude: config.noise_amplitude,
        master_seed: config.master_seed,
        mean_sq_error,
        peak_mean_sq_error,
        diverged_runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::builtin;
    use nalgebra::dvector;

    fn config(realizations: usize) -> MonteCarloConfig {
        MonteCarloConfig {
            p: 0.6,
            horizon: 400,
            realizations,
            noise_amplitude: 1e-6,
            master_seed: 99,
        }
    }

    #[test]
    fn single_realization_is_observe_run_squared() {
        let (m, g) = builtin("henon").unwrap();
        let x0 = dvector![0.1, 0.1];
        let rep = monte_carlo(&m, &g, &x0, &x0, &config(1)).unwrap();
        let real = erasure_sequence(0.6, 400, StreamSeed::realization(99, 0, StreamRole::Erasure)).unwrap();
        let run = observe_run(&m, &g, &x0, &x0, &real, 1e-6, StreamSeed::realization(99, 0, StreamRole::PlantNoise)).unwrap();
        let sq: Vec<f64> = run.error_norms.iter().map(|e| e * e).collect();
        assert_eq!(rep.mean_sq_error, sq);
    }

    #[test]
    fn thread_count_does_not_change_report() {
        let (m, g) = builtin("henon").unwrap();
        let x0 = dvector![0.1, 0.1];
        let run_with = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| monte_carlo(&m, &g, &x0, &x0, &config(16)).unwrap())
        };
        let a = run_with(1);
        let b = run_with(4);
        assert_eq!(a, b);
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        a.write_csv(&mut csv_a).unwrap();
        b.write_csv(&mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
    }

    #[test]
    fn diverged_runs_are_reported() {
        let (m, g) = builtin("henon").unwrap();
        let cfg = MonteCarloConfig {
            p: 0.01,
            horizon: 60,
            realizations: 4,
            noise_amplitude: 0.0,
            master_seed: 1,
        };
        let rep = monte_carlo(&m, &g, &dvector![0.1, 0.1], &dvector![3.0, 0.0], &cfg).unwrap();
        assert!(rep.diverged());
        assert_eq!(rep.peak_mean_sq_error, f64::INFINITY);
    }

    #[test]
    fn rejects_zero_realizations() {
        let (m, g) = builtin("henon").unwrap();
        let x0 = dvector![0.1, 0.1];
        assert!(monte_carlo(&m, &g, &x0, &x0, &config(0)).is_err());
    }
}
