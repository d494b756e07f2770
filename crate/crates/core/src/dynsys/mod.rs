//! Discrete-time system models `x_{t+1} = f(x_t)`, `y_t = h(x_t)`.

mod builtin;
mod polynomial;

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use builtin::{builtin, henon, linear, Henon, Linear, ShiftedLogistic, BUILTIN_NAMES};
pub use polynomial::{ModelDescriptor, PolynomialMap, PolynomialModel, Term};

use crate::seed::StreamSeed;
use crate::{Error, Matrix, Result, Vector, DIVERGENCE_THRESHOLD};

/// Map, output and their Jacobians for a concrete system.
///
/// Implementations must be pure: repeated evaluation at the same point
/// returns the same value.
pub trait Dynamics: Send + Sync + fmt::Debug {
    fn state_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn map(&self, x: &Vector) -> Vector;
    fn output(&self, x: &Vector) -> Vector;
    /// `A(x) = ∂f/∂x`, N×N.
    fn map_jacobian(&self, x: &Vector) -> Matrix;
    /// `C(x) = ∂h/∂x`, M×N.
    fn output_jacobian(&self, x: &Vector) -> Matrix;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianMode {
    #[default]
    Analytic,
    FiniteDifference,
}

/// A system model together with how its Jacobians are evaluated.
#[derive(Clone)]
pub struct SystemModel {
    dynamics: Arc<dyn Dynamics>,
    mode: JacobianMode,
    name: String,
    description: String,
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("name", &self.name)
            .field("state_dim", &self.state_dim())
            .field("output_dim", &self.output_dim())
            .field("mode", &self.mode)
            .finish()
    }
}

impl SystemModel {
    pub fn new(
        dynamics: impl Dynamics + 'static,
        name: impl Into<String>,
        description: impl Into<String>,
    ) -> Result<Self> {
        let (n, m) = (dynamics.state_dim(), dynamics.output_dim());
        if n == 0 {
            return Err(Error::invalid("state_dim", "must be at least 1"));
        }
        if m == 0 || m > n {
            return Err(Error::invalid(
                "output_dim",
                format!("must satisfy 1 <= M <= N = {n}, got {m}"),
            ));
        }
        Ok(SystemModel {
            dynamics: Arc::new(dynamics),
            mode: JacobianMode::Analytic,
            name: name.into(),
            description: description.into(),
        })
    }

    pub fn with_mode(mut self, mode: JacobianMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mode(&self) -> JacobianMode {
        self.mode
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.dynamics.output_dim()
    }

    fn check_state(&self, x: &Vector) -> Result<()> {
        if x.len() != self.state_dim() {
            return Err(Error::Dimension {
                what: "state",
                expected: self.state_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn check_finite_state(&self, x: &Vector) -> Result<()> {
        self.check_state(x)?;
        if x.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("state"))
        }
    }

    /// `f(x)`, without noise.
    pub fn step(&self, x: &Vector) -> Result<Vector> {
        self.check_state(x)?;
        Ok(self.dynamics.map(x))
    }

    /// `h(x)`.
    pub fn output(&self, x: &Vector) -> Result<Vector> {
        self.check_state(x)?;
        Ok(self.dynamics.output(x))
    }

    /// `A(x)`, evaluated according to the model's [`JacobianMode`].
    pub fn jacobian(&self, x: &Vector) -> Result<Matrix> {
        self.check_finite_state(x)?;
        Ok(match self.mode {
            JacobianMode::Analytic => self.dynamics.map_jacobian(x),
            JacobianMode::FiniteDifference => central_difference(|v| self.dynamics.map(v), x),
        })
    }

    /// `C(x)`, evaluated according to the model's [`JacobianMode`].
    pub fn output_jacobian(&self, x: &Vector) -> Result<Matrix> {
        self.check_finite_state(x)?;
        Ok(match self.mode {
            JacobianMode::Analytic => self.dynamics.output_jacobian(x),
            JacobianMode::FiniteDifference => central_difference(|v| self.dynamics.output(v), x),
        })
    }

    /// Generates `x_0 … x_T` with `x_{t+1} = f(x_t) + r_t`, each component of
    /// `r_t` uniform on `[0, noise_amplitude]`.
    pub fn trajectory(
        &self,
        x0: &Vector,
        horizon: usize,
        noise_amplitude: f64,
        seed: impl Into<StreamSeed>,
    ) -> Result<Trajectory> {
        if horizon < 1 {
            return Err(Error::invalid("horizon", "must be at least 1"));
        }
        if !(noise_amplitude >= 0.0 && noise_amplitude.is_finite()) {
            return Err(Error::invalid("noise_amplitude", "must be finite and >= 0"));
        }
        self.check_finite_state(x0)?;
        let seed = seed.into();
        let mut noise = PlantNoise::new(noise_amplitude, seed);
        let mut states = Vec::with_capacity(horizon + 1);
        states.push(x0.clone());
        for t in 0..horizon {
            let mut next = self.dynamics.map(&states[t]);
            noise.perturb(&mut next);
            if diverged(&next) {
                return Err(Error::Diverged { step: t + 1 });
            }
            states.push(next);
        }
        Ok(Trajectory {
            states,
            noise_amplitude,
            seed,
        })
    }

    /// Noise-free orbit `x_0 … x_T` used for nominal (linearisation) trajectories.
    pub fn orbit(&self, x0: &Vector, horizon: usize) -> Result<Vec<Vector>> {
        self.check_finite_state(x0)?;
        let mut states = Vec::with_capacity(horizon + 1);
        states.push(x0.clone());
        for t in 0..horizon {
            let next = self.dynamics.map(&states[t]);
            if diverged(&next) {
                return Err(Error::Diverged { step: t + 1 });
            }
            states.push(next);
        }
        Ok(states)
    }

    /// Extreme singular values of `A(x)` over the given states.
    ///
    /// The Jacobian bounds required by the theory are global; this only records
    /// what is seen on the samples.
    pub fn jacobian_bounds(&self, samples: &[Vector]) -> Result<JacobianBounds> {
        let mut bounds = JacobianBounds {
            min_singular_value: f64::INFINITY,
            max_singular_value: 0.0,
        };
        for x in samples {
            let sv = self.jacobian(x)?.singular_values();
            bounds.min_singular_value = bounds.min_singular_value.min(sv.min());
            bounds.max_singular_value = bounds.max_singular_value.max(sv.max());
        }
        Ok(bounds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JacobianBounds {
    pub min_singular_value: f64,
    pub max_singular_value: f64,
}

pub(crate) fn diverged(x: &Vector) -> bool {
    !x.iter().all(|v| v.is_finite()) || x.norm() > DIVERGENCE_THRESHOLD
}

/// Central differences with step `max(1e-6, 1e-6·|x_i|)`.
pub fn central_difference(f: impl Fn(&Vector) -> Vector, x: &Vector) -> Matrix {
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    let mut probe = x.clone();
    for i in 0..n {
        let h = (1e-6 * x[i].abs()).max(1e-6);
        probe[i] = x[i] + h;
        let plus = f(&probe);
        probe[i] = x[i] - h;
        let minus = f(&probe);
        probe[i] = x[i];
        cols.push((plus - minus) / (2.0 * h));
    }
    Matrix::from_columns(&cols)
}

/// Uniform additive plant noise drawn from a seeded stream.
#[derive(Debug)]
pub(crate) struct PlantNoise {
    amplitude: f64,
    rng: rand_chacha::ChaCha8Rng,
}

impl PlantNoise {
    pub(crate) fn new(amplitude: f64, seed: StreamSeed) -> Self {
        PlantNoise {
            amplitude,
            rng: seed.rng(),
        }
    }

    pub(crate) fn perturb(&mut self, x: &mut Vector) {
        for v in x.iter_mut() {
            *v += self.amplitude * self.rng.random::<f64>();
        }
    }
}

/// A (possibly noisy) state sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    #[serde(serialize_with = "crate::linalg::serialize_vectors")]
    pub states: Vec<Vector>,
    pub noise_amplitude: f64,
    pub seed: StreamSeed,
}

/// Output-injection gain `K: Y → X`.
///
/// The gain sees only the output value, never the channel state, so it cannot
/// depend on the erasure history. `K(0) = 0` is enforced at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverGain {
    map: PolynomialMap,
    description: String,
}

impl ObserverGain {
    pub fn new(map: PolynomialMap, description: impl Into<String>) -> Result<Self> {
        if map.has_constant_term() {
            return Err(Error::invalid("gain", "K(0) must be 0 (no constant terms)"));
        }
        Ok(ObserverGain {
            map,
            description: description.into(),
        })
    }

    /// Linear gain `K(y) = K y`.
    pub fn linear(k: &Matrix, description: impl Into<String>) -> Result<Self> {
        Self::new(PolynomialMap::linear(k), description)
    }

    /// `K ≡ 0`: pure prediction.
    pub fn zero(state_dim: usize, output_dim: usize) -> Self {
        ObserverGain {
            map: PolynomialMap::linear(&Matrix::zeros(state_dim, output_dim)),
            description: "zero gain (open-loop prediction)".into(),
        }
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn output_dim(&self) -> usize {
        self.map.input_dim()
    }

    pub fn state_dim(&self) -> usize {
        self.map.output_dim()
    }

    pub fn polynomial(&self) -> &PolynomialMap {
        &self.map
    }

    pub fn apply(&self, y: &Vector) -> Vector {
        self.map.eval(y)
    }

    /// `∂K/∂y` at `y`.
    pub fn jacobian(&self, y: &Vector) -> Matrix {
        self.map.jacobian(y)
    }

    pub(crate) fn check_conforms(&self, model: &SystemModel) -> Result<()> {
        if self.state_dim() != model.state_dim() {
            return Err(Error::Dimension {
                what: "gain state dimension",
                expected: model.state_dim(),
                got: self.state_dim(),
            });
        }
        if self.output_dim() != model.output_dim() {
            return Err(Error::Dimension {
                what: "gain output dimension",
                expected: model.output_dim(),
                got: self.output_dim(),
            });
        }
        Ok(())
    }
}
