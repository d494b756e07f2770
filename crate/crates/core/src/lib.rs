//! Fundamental limits of nonlinear state observation over an erasure channel.
//!
//! The crate is organised around the pieces needed to state and check the
//! limitation results numerically:
//!
//! - [`dynsys`]: discrete-time models `x_{t+1} = f(x_t)`, `y_t = h(x_t)`,
//!   their Jacobians, trajectories and the built-in examples.
//! - [`observability`]: the observability rank condition and sampled bounds
//!   on the stacked-output Gram matrix.
//! - [`lyapunov`]: QR (Benettin) estimation of the Lyapunov spectrum.
//! - [`riccati`]: the Riccati-like recursion, its trace-minimising gain and
//!   the pointwise necessary condition for mean-square stability.
//! - [`limits`]: closed-form critical erasure probabilities.
//! - [`simulate`]: erasure sequences, observer runs, linearised covariance
//!   propagation, Monte Carlo averaging and probability sweeps.
//! - [`cli`]: the command-line front end.

pub mod cli;
pub mod config;
pub mod dynsys;
pub mod error;
pub mod limits;
pub mod linalg;
pub mod lyapunov;
pub mod observability;
pub mod output;
pub mod riccati;
pub mod seed;
pub mod simulate;

pub use dynsys::{builtin, JacobianMode, ObserverGain, SystemModel, Trajectory};
pub use error::{Error, Result};
pub use limits::{CriticalProbability, LimitVerdict};
pub use lyapunov::LyapunovSpectrum;
pub use observability::ObservabilityReport;
pub use riccati::RiccatiTrace;
pub use seed::StreamSeed;
pub use simulate::{CovarianceTrace, ErasureRealization, MonteCarloReport, ObserverRun};

/// States and outputs are dynamically sized column vectors.
pub type Vector = nalgebra::DVector<f64>;
/// Jacobians, covariances and gains.
pub type Matrix = nalgebra::DMatrix<f64>;

/// A state norm (or covariance trace, for second moments) beyond this is
/// treated as divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;
