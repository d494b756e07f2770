//! Observer simulation over an erasure channel.
//!
//! The plant evolves as `x_{t+1} = f(x_t) + r_t` and the observer as
//! `x̂_{t+1} = f(x̂_t) + ξ_t (K(h(x_t)) − K(h(x̂_t)))`, where `ξ_t ∈ {0, 1}` is
//! the channel state, known to the observer at time `t`. The gain sees only
//! output values, so it cannot depend on the erasure history.

mod covariance;
mod erasure;
mod monte_carlo;
mod observer;
mod sweep;

pub use covariance::{covariance_propagate, expected_second_moment, CovarianceTrace, LinearisedOrbit};
pub use erasure::{erasure_sequence, ErasureRealization};
pub use monte_carlo::{monte_carlo, MonteCarloConfig, MonteCarloReport};
pub use observer::{observe_run, ObserverRun};
pub use sweep::{sweep_p, write_sweep_csv, SweepConfig, SweepMode, SweepPoint};
