use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::covariance::LinearisedOrbit;
use super::{erasure_sequence, monte_carlo, MonteCarloConfig};
use crate::dynsys::{ObserverGain, SystemModel};
use crate::output::fmt_f64;
use crate::seed::{StreamRole, StreamSeed};
use crate::{Error, Matrix, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// Peak of the Monte Carlo mean-square error of the nonlinear observer.
    Full,
    /// Mean over realizations of the peak `trace(Σ_t)` of the linearised error.
    Linearized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub p_grid: Vec<f64>,
    pub horizon: usize,
    pub realizations: usize,
    pub mode: SweepMode,
    pub master_seed: u64,
    /// Peaks are taken over `t ≥ burn_in` (linearised mode).
    pub burn_in: usize,
    /// Initial second moment (linearised mode).
    pub sigma0: Matrix,
    /// Initial observer state (full mode).
    pub xhat0: Vector,
    /// Plant noise amplitude (full mode).
    pub noise_amplitude: f64,
    /// Critical probability to annotate the output with.
    pub critical_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub p: f64,
    pub peak: f64,
    pub diverged: bool,
    pub critical_p: Option<f64>,
}

/// Peak error statistic at each grid probability, ordered by `p`.
///
/// Realization `r` uses the same channel stream at every grid point, so the
/// sweep compares probabilities on coupled erasure sequences.
pub fn sweep_p(model: &SystemModel, gain: &ObserverGain, x0: &Vector, config: &SweepConfig) -> Result<Vec<SweepPoint>> {
    if config.p_grid.is_empty() {
        return Err(Error::invalid("p_grid", "must be nonempty"));
    }
    if let Some(bad) = config.p_grid.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        return Err(Error::invalid("p_grid", format!("{bad} is outside (0, 1)")));
    }
    if config.realizations < 1 {
        return Err(Error::invalid("realizations", "must be at least 1"));
    }
    let mut grid = config.p_grid.clone();
    grid.sort_by(f64::total_cmp);

    let points: Vec<(f64, bool)> = match config.mode {
        SweepMode::Linearized => {
            let orbit = LinearisedOrbit::new(model, gain, x0, config.horizon)?;
            let n = model.state_dim();
            if config.sigma0.nrows() != n || config.sigma0.ncols() != n {
                return Err(Error::Dimension {
                    what: "Sigma0",
                    expected: n,
                    got: config.sigma0.nrows(),
                });
            }
            let jobs: Vec<(usize, usize)> = (0..grid.len())
                .flat_map(|i| (0..config.realizations).map(move |r| (i, r)))
                .collect();
            let peaks: Vec<(f64, Option<usize>)> = jobs
                .par_iter()
                .map(|&(i, r)| {
                    let real = erasure_sequence(
                        grid[i],
                        config.horizon,
                        StreamSeed::realization(config.master_seed, r as u64, StreamRole::Erasure),
                    )?;
                    Ok(orbit.peak_trace(&config.sigma0, &real.xi, config.burn_in))
                })
                .collect::<Result<_>>()?;
            peaks
                .chunks(config.realizations)
                .map(|chunk| {
                    let diverged = chunk.iter().any(|(_, d)| d.is_some());
                    let mean = chunk.iter().map(|(p, _)| p).sum::<f64>() / chunk.len() as f64;
                    (if diverged { f64::INFINITY } else { mean }, diverged)
                })
                .collect()
        }
        SweepMode::Full => grid
            .par_iter()
            .map(|&p| {
                let cfg = MonteCarloConfig {
                    p,
                    horizon: config.horizon,
                    realizations: config.realizations,
                    noise_amplitude: config.noise_amplitude,
                    master_seed: config.master_seed,
                };
                let rep = monte_carlo(model, gain, x0, &config.xhat0, &cfg)?;
                Ok((rep.peak_mean_sq_error, rep.diverged()))
            })
            .collect::<Result<_>>()?,
    };

    Ok(grid
        .into_iter()
        .zip(points)
        .map(|(p, (peak, diverged))| SweepPoint {
            p,
            peak,
            diverged,
            critical_p: config.critical_p,
        })
        .collect())
}

/// Columns `p, peak, diverged_flag, critical_p`.
pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["p", "peak", "diverged_flag", "critical_p"])?;
    for pt in points {
        out.write_record([
            fmt_f64(pt.p),
            fmt_f64(pt.peak),
            u8::from(pt.diverged).to_string(),
            pt.critical_p.map(fmt_f64).unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
