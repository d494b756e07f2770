//! Experiment configuration shared by the CLI commands.
//!
//! A config can be read from JSON (`--config`) and overridden field by field
//! from flags. Unknown fields are rejected and every error names the
//! offending field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynsys::{builtin, ModelDescriptor, ObserverGain, SystemModel};
use crate::simulate::SweepMode;
use crate::{Error, Result, Vector};

/// Which observer gain to run with.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GainChoice {
    /// The model's own gain (deadbeat for built-ins, the descriptor's `gain` otherwise).
    #[default]
    Shipped,
    /// `K ≡ 0`: open-loop prediction.
    Zero,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_descriptor: Option<ModelDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<GainChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realizations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub renorm_period: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xhat0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<SweepMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critical_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// Replaces `$field` in `self` by `other`'s when the latter is set.
macro_rules! overlay {
    ($self:ident, $other:ident; $($field:ident),* $(,)?) => {
        $( if $other.$field.is_some() { $self.$field = $other.$field; } )*
    };
}

impl ExperimentConfig {
    /// Parses JSON; errors carry the path of the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                Error::Config(inner.to_string())
            } else {
                Error::Config(format!("field `{path}`: {inner}"))
            }
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Fields set in `other` win.
    pub fn overlay(&mut self, other: ExperimentConfig) {
        overlay!(self, other;
            model, model_descriptor, gain, p, p_grid, steps, realizations,
            noise_amplitude, master_seed, burn_in, renorm_period, epsilon, x0,
            xhat0, mode, samples, tol, entropy, critical_p, out,
        );
    }

    /// Builds the selected model and gain; a descriptor takes precedence
    /// only when no built-in name is given.
    pub fn build_model(&self) -> Result<(SystemModel, ObserverGain)> {
        let (model, gain) = match (&self.model, &self.model_descriptor) {
            (Some(_), Some(_)) => {
                return Err(Error::invalid("model", "give either a built-in name or a descriptor, not both"))
            }
            (Some(name), None) => builtin(name)?,
            (None, Some(desc)) => desc.build()?,
            (None, None) => return Err(Error::invalid("model", "required (built-in name or descriptor)")),
        };
        let gain = match self.gain.unwrap_or_default() {
            GainChoice::Shipped => gain,
            GainChoice::Zero => ObserverGain::zero(model.state_dim(), model.output_dim()),
        };
        Ok((model, gain))
    }

    /// True when the model's map is linear, so exact eigenvalues apply.
    pub fn model_is_linear(&self) -> bool {
        match (&self.model, &self.model_descriptor) {
            (Some(name), _) => name.starts_with("linear"),
            (None, Some(desc)) => desc
                .map
                .iter()
                .flatten()
                .all(|t| t.exponents.iter().sum::<u32>() == 1 || t.coeff == 0.0),
            (None, None) => false,
        }
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.master_seed
            .ok_or_else(|| Error::invalid("master_seed", "required for stochastic commands (--seed)"))
    }

    pub fn require_p(&self) -> Result<f64> {
        let p = self.p.ok_or_else(|| Error::invalid("p", "required (--p)"))?;
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid("p", format!("{p} is outside (0, 1)")));
        }
        Ok(p)
    }

    /// `x0` (or the model's default) as a state vector of the right size.
    pub fn initial_state(&self, model: &SystemModel) -> Result<Vector> {
        match &self.x0 {
            Some(v) => state_vector("x0", v, model.state_dim()),
            None => Ok(default_initial_state(model)),
        }
    }

    /// `xhat0`, defaulting to `x0` (synchronised start).
    pub fn observer_initial_state(&self, model: &SystemModel, x0: &Vector) -> Result<Vector> {
        match &self.xhat0 {
            Some(v) => state_vector("xhat0", v, model.state_dim()),
            None => Ok(x0.clone()),
        }
    }
}

fn state_vector(name: &'static str, v: &[f64], n: usize) -> Result<Vector> {
    if v.len() != n {
        return Err(Error::invalid(name, format!("has {} entries, model state dimension is {n}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(name, "entries must be finite"));
    }
    Ok(Vector::from_column_slice(v))
}

/// Starting point used when `x0` is not given: inside the basin of the
/// attractor for the chaotic built-ins, the origin otherwise.
pub fn default_initial_state(model: &SystemModel) -> Vector {
    match model.name() {
        "henon" => Vector::from_column_slice(&[0.1, 0.1]),
        "logistic" => Vector::from_column_slice(&[0.1]),
        _ => Vector::zeros(model.state_dim()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentConfig {
        ExperimentConfig {
            model: Some("henon".into()),
            p: Some(0.7),
            p_grid: Some(vec![0.45, 0.5]),
            steps: Some(10_000),
            realizations: Some(50),
            noise_amplitude: Some(1e-6),
            master_seed: Some(1),
            x0: Some(vec![0.1, 0.1]),
            mode: Some(SweepMode::Linearized),
            gain: Some(GainChoice::Zero),
            out: Some("run.csv".into()),
            ..Default::default()
        }
    }

    #[test]
    fn round_trips_through_json() {
        let c = sample();
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
        let empty = ExperimentConfig::default();
        assert_eq!(empty.to_json(), "{}");
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), empty);
    }

    #[test]
    fn unknown_field_is_rejected_and_named() {
        let err = ExperimentConfig::from_json(r#"{"model": "henon", "seeed": 3}"#).unwrap_err();
        assert!(err.to_string().contains("seeed"), "{err}");
    }

    #[test]
    fn bad_value_names_the_field() {
        let err = ExperimentConfig::from_json(r#"{"p_grid": [0.5, "x"]}"#).unwrap_err();
        assert!(err.to_string().contains("p_grid"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"mode": "exact"}"#).unwrap_err();
        assert!(err.to_string().contains("mode"), "{err}");
    }

    #[test]
    fn overlay_prefers_set_fields() {
        let mut c = sample();
        c.overlay(ExperimentConfig {
            p: Some(0.55),
            ..Default::default()
        });
        assert_eq!(c.p, Some(0.55));
        assert_eq!(c.steps, Some(10_000));
    }

    #[test]
    fn seed_and_p_are_validated() {
        let c = ExperimentConfig::default();
        assert!(matches!(c.require_seed(), Err(Error::InvalidArgument { name: "master_seed", .. })));
        let c = ExperimentConfig {
            p: Some(1.0),
            ..Default::default()
        };
        assert!(matches!(c.require_p(), Err(Error::InvalidArgument { name: "p", .. })));
    }

    #[test]
    fn builds_models_and_checks_initial_state() {
        let c = sample();
        let (m, g) = c.build_model().unwrap();
        assert_eq!(g.apply(&Vector::from_column_slice(&[1.0])).norm(), 0.0);
        let bad = ExperimentConfig {
            x0: Some(vec![0.1]),
            ..c.clone()
        };
        assert!(bad.initial_state(&m).is_err());
        assert!(ExperimentConfig::default().build_model().is_err());
        assert!(!c.model_is_linear());
    }
}
