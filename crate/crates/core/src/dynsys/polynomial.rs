//! Polynomial maps and the JSON model descriptor built from them.

use serde::{Deserialize, Serialize};

use super::{Dynamics, ObserverGain, SystemModel};
use crate::{Error, Matrix, Result, Vector};

/// `coeff · Π_j x_j^{exponents[j]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub coeff: f64,
    pub exponents: Vec<u32>,
}

impl Term {
    pub fn new(coeff: f64, exponents: Vec<u32>) -> Self {
        Term { coeff, exponents }
    }

    fn eval(&self, x: &Vector) -> f64 {
        self.exponents
            .iter()
            .zip(x.iter())
            .fold(self.coeff, |acc, (&e, &v)| acc * v.powi(e as i32))
    }

    /// `∂/∂x_j` of this term.
    fn partial(&self, x: &Vector, j: usize) -> f64 {
        let ej = self.exponents[j];
        if ej == 0 {
            return 0.0;
        }
        self.exponents
            .iter()
            .zip(x.iter())
            .enumerate()
            .fold(self.coeff * ej as f64, |acc, (i, (&e, &v))| {
                let e = if i == j { e - 1 } else { e };
                acc * v.powi(e as i32)
            })
    }
}

/// A vector-valued polynomial: one list of terms per output coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialMap {
    input_dim: usize,
    components: Vec<Vec<Term>>,
}

impl PolynomialMap {
    pub fn new(input_dim: usize, components: Vec<Vec<Term>>) -> Result<Self> {
        for (i, terms) in components.iter().enumerate() {
            for term in terms {
                if term.exponents.len() != input_dim {
                    return Err(Error::Descriptor(format!(
                        "component {i}: exponent vector has length {}, expected {input_dim}",
                        term.exponents.len()
                    )));
                }
                if !term.coeff.is_finite() {
                    return Err(Error::Descriptor(format!(
                        "component {i}: non-finite coefficient"
                    )));
                }
            }
        }
        Ok(PolynomialMap {
            input_dim,
            components,
        })
    }

    /// `x ↦ K x`.
    pub fn linear(k: &Matrix) -> Self {
        let components = k
            .row_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &c)| c != 0.0)
                    .map(|(j, &c)| {
                        let mut e = vec![0; k.ncols()];
                        e[j] = 1;
                        Term::new(c, e)
                    })
                    .collect()
            })
            .collect();
        PolynomialMap {
            input_dim: k.ncols(),
            components,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Vec<Term>] {
        &self.components
    }

    pub fn has_constant_term(&self) -> bool {
        self.components
            .iter()
            .flatten()
            .any(|t| t.coeff != 0.0 && t.exponents.iter().all(|&e| e == 0))
    }

    pub fn eval(&self, x: &Vector) -> Vector {
        Vector::from_iterator(
            self.components.len(),
            self.components
                .iter()
                .map(|terms| terms.iter().map(|t| t.eval(x)).sum::<f64>()),
        )
    }

    pub fn jacobian(&self, x: &Vector) -> Matrix {
        Matrix::from_fn(self.components.len(), self.input_dim, |i, j| {
            self.components[i].iter().map(|t| t.partial(x, j)).sum()
        })
    }
}

/// A system whose map and output are both polynomials.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialModel {
    map: PolynomialMap,
    output: PolynomialMap,
}

impl PolynomialModel {
    pub fn new(map: PolynomialMap, output: PolynomialMap) -> Result<Self> {
        let n = map.input_dim();
        if map.output_dim() != n {
            return Err(Error::Descriptor(format!(
                "map has {} components for state_dim {n}",
                map.output_dim()
            )));
        }
        if output.input_dim() != n {
            return Err(Error::Descriptor(format!(
                "output terms use {} variables for state_dim {n}",
                output.input_dim()
            )));
        }
        Ok(PolynomialModel { map, output })
    }
}

impl Dynamics for PolynomialModel {
    fn state_dim(&self) -> usize {
        self.map.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.output.output_dim()
    }
    fn map(&self, x: &Vector) -> Vector {
        self.map.eval(x)
    }
    fn output(&self, x: &Vector) -> Vector {
        self.output.eval(x)
    }
    fn map_jacobian(&self, x: &Vector) -> Matrix {
        self.map.jacobian(x)
    }
    fn output_jacobian(&self, x: &Vector) -> Matrix {
        self.output.jacobian(x)
    }
}

/// JSON descriptor for a user-defined polynomial system.
///
/// ```json
/// {
///   "name": "henon-like",
///   "state_dim": 2,
///   "output_dim": 1,
///   "map": [
///     [{"coeff": 1.0, "exponents": [0, 0]}, {"coeff": -1.4, "exponents": [2, 0]},
///      {"coeff": 1.0, "exponents": [0, 1]}],
///     [{"coeff": 0.3, "exponents": [1, 0]}]
///   ],
///   "output": [[{"coeff": 1.0, "exponents": [1, 0]}]],
///   "gain": [[{"coeff": -1.4, "exponents": [2]}], [{"coeff": 0.3, "exponents": [1]}]]
/// }
/// ```
///
/// `map` has `state_dim` entries with exponent vectors of length `state_dim`;
/// `output` has `output_dim` entries, also over the state. The optional `gain`
/// has `state_dim` entries with exponent vectors of length `output_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDescriptor {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub state_dim: usize,
    pub output_dim: usize,
    pub map: Vec<Vec<Term>>,
    pub output: Vec<Vec<Term>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<Vec<Vec<Term>>>,
}

impl ModelDescriptor {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                Error::Descriptor(inner.to_string())
            } else {
                Error::Descriptor(format!("field `{path}`: {inner}"))
            }
        })
    }

    /// Builds the model and its gain (zero gain when none is given).
    pub fn build(&self) -> Result<(SystemModel, ObserverGain)> {
        let n = self.state_dim;
        let m = self.output_dim;
        if self.map.len() != n {
            return Err(Error::Descriptor(format!(
                "`map` has {} components, expected state_dim = {n}",
                self.map.len()
            )));
        }
        if self.output.len() != m {
            return Err(Error::Descriptor(format!(
                "`output` has {} components, expected output_dim = {m}",
                self.output.len()
            )));
        }
        let model = PolynomialModel::new(
            PolynomialMap::new(n, self.map.clone())?,
            PolynomialMap::new(n, self.output.clone())?,
        )?;
        let name = self.name.clone().unwrap_or_else(|| "polynomial".into());
        let model = SystemModel::new(model, name, "user-defined polynomial map")?;
        let gain = match &self.gain {
            Some(terms) => {
                if terms.len() != n {
                    return Err(Error::Descriptor(format!(
                        "`gain` has {} components, expected state_dim = {n}",
                        terms.len()
                    )));
                }
                ObserverGain::new(PolynomialMap::new(m, terms.clone())?, "user-defined gain")?
            }
            None => ObserverGain::zero(n, m),
        };
        Ok((model, gain))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::central_difference;
    use nalgebra::dvector;

    fn henon_descriptor() -> &'static str {
        r#"{
            "name": "henon-like",
            "state_dim": 2,
            "output_dim": 1,
            "map": [
                [{"coeff": 1.0, "exponents": [0, 0]}, {"coeff": -1.4, "exponents": [2, 0]},
                 {"coeff": 1.0, "exponents": [0, 1]}],
                [{"coeff": 0.3, "exponents": [1, 0]}]
            ],
            "output": [[{"coeff": 1.0, "exponents": [1, 0]}]],
            "gain": [[{"coeff": -1.4, "exponents": [2]}], [{"coeff": 0.3, "exponents": [1]}]]
        }"#
    }

    #[test]
    fn descriptor_reproduces_builtin_henon() {
        let (poly, pgain) = ModelDescriptor::from_json(henon_descriptor())
            .unwrap()
            .build()
            .unwrap();
        let (henon, hgain) = crate::dynsys::builtin("henon").unwrap();
        for x in [dvector![0.0, 0.0], dvector![0.3, -0.2], dvector![-1.1, 0.25]] {
            assert!((poly.step(&x).unwrap() - henon.step(&x).unwrap()).amax() < 1e-15);
            assert!((poly.jacobian(&x).unwrap() - henon.jacobian(&x).unwrap()).amax() < 1e-15);
            let y = henon.output(&x).unwrap();
            assert!((pgain.apply(&y) - hgain.apply(&y)).amax() < 1e-15);
        }
    }

    #[test]
    fn descriptor_rejects_unknown_fields_and_bad_shapes() {
        let unknown = r#"{"state_dim":1,"output_dim":1,"map":[[]],"output":[[]],"extra":1}"#;
        assert!(ModelDescriptor::from_json(unknown).is_err());

        let short = r#"{"state_dim":2,"output_dim":1,"map":[[]],"output":[[]]}"#;
        let err = ModelDescriptor::from_json(short).unwrap().build().unwrap_err();
        assert!(err.to_string().contains("`map`"), "{err}");

        let bad_exp = r#"{"state_dim":1,"output_dim":1,
            "map":[[{"coeff":2.0,"exponents":[1,0]}]],"output":[[{"coeff":1.0,"exponents":[1]}]]}"#;
        assert!(ModelDescriptor::from_json(bad_exp).unwrap().build().is_err());
    }

    #[test]
    fn missing_gain_defaults_to_zero() {
        let text = r#"{"state_dim":1,"output_dim":1,
            "map":[[{"coeff":2.0,"exponents":[1]}]],"output":[[{"coeff":1.0,"exponents":[1]}]]}"#;
        let (_, gain) = ModelDescriptor::from_json(text).unwrap().build().unwrap();
        assert_eq!(gain.apply(&dvector![3.0]), dvector![0.0]);
    }

    #[test]
    fn polynomial_jacobian_matches_central_difference() {
        let map = PolynomialMap::new(
            3,
            vec![
                vec![Term::new(2.0, vec![2, 1, 0]), Term::new(-1.0, vec![0, 0, 3])],
                vec![Term::new(0.5, vec![1, 1, 1])],
            ],
        )
        .unwrap();
        let x = dvector![0.7, -1.3, 0.4];
        let fd = central_difference(|v| map.eval(v), &x);
        let an = map.jacobian(&x);
        assert!((fd - &an).amax() < 1e-8 * an.amax());
    }
}
