//! Built-in models and their default observer gains.

use nalgebra::dmatrix;

use super::{Dynamics, ObserverGain, PolynomialMap, SystemModel, Term};
use crate::{Error, Matrix, Result, Vector};

pub const BUILTIN_NAMES: [&str; 4] = ["henon", "linear-scalar", "linear-diagonal", "logistic"];

/// Henon map `(x₁, x₂) ↦ (1 − a x₁² + x₂, b x₁)` observed through `y = x₁`.
///
/// The Jacobian determinant is `−b` everywhere. Note `f(0) = (1, 0)`: the map
/// is used in its standard coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Henon {
    pub a: f64,
    pub b: f64,
}

impl Default for Henon {
    fn default() -> Self {
        Henon { a: 1.4, b: 0.3 }
    }
}

impl Dynamics for Henon {
    fn state_dim(&self) -> usize {
        2
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn map(&self, x: &Vector) -> Vector {
        Vector::from_column_slice(&[1.0 - self.a * x[0] * x[0] + x[1], self.b * x[0]])
    }
    fn output(&self, x: &Vector) -> Vector {
        Vector::from_element(1, x[0])
    }
    fn map_jacobian(&self, x: &Vector) -> Matrix {
        Matrix::from_row_slice(2, 2, &[-2.0 * self.a * x[0], 1.0, self.b, 0.0])
    }
    fn output_jacobian(&self, _x: &Vector) -> Matrix {
        Matrix::from_row_slice(1, 2, &[1.0, 0.0])
    }
}

impl Henon {
    /// `K(y) = (−a y², b y)`.
    ///
    /// With every packet delivered the error obeys `e_{t+1} = (e₂, 0)`, so it
    /// vanishes after two steps.
    pub fn deadbeat_gain(&self) -> ObserverGain {
        let map = PolynomialMap::new(
            1,
            vec![vec![Term::new(-self.a, vec![2])], vec![Term::new(self.b, vec![1])]],
        )
        .expect("well-formed gain");
        ObserverGain::new(map, format!("deadbeat output injection K(y) = (-{} y^2, {} y)", self.a, self.b))
            .expect("no constant term")
    }
}

/// `x ↦ A x`, `y = C x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    a: Matrix,
    c: Matrix,
}

impl Linear {
    pub fn new(a: Matrix, c: Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::invalid("A", "must be square"));
        }
        let n = a.nrows();
        if c.ncols() != n {
            return Err(Error::Dimension {
                what: "C columns",
                expected: n,
                got: c.ncols(),
            });
        }
        if c.nrows() == 0 || c.nrows() > n {
            return Err(Error::invalid(
                "output_dim",
                format!("must satisfy 1 <= M <= N = {n}, got {}", c.nrows()),
            ));
        }
        Ok(Linear { a, c })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }
}

impl Dynamics for Linear {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    fn output_dim(&self) -> usize {
        self.c.nrows()
    }
    fn map(&self, x: &Vector) -> Vector {
        &self.a * x
    }
    fn output(&self, x: &Vector) -> Vector {
        &self.c * x
    }
    fn map_jacobian(&self, _x: &Vector) -> Matrix {
        self.a.clone()
    }
    fn output_jacobian(&self, _x: &Vector) -> Matrix {
        self.c.clone()
    }
}

/// Logistic map `z ↦ 4z(1 − z)` written in the shifted coordinate
/// `u = z − 3/4`, which puts the interior fixed point at the origin:
/// `f(u) = −2u − 4u²`, observed through `y = u`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ShiftedLogistic;

impl ShiftedLogistic {
    pub const SHIFT: f64 = 0.75;

    /// `K(y) = −2y − 4y²`, i.e. `K = f`: one delivered packet synchronises
    /// the observer.
    pub fn deadbeat_gain(&self) -> ObserverGain {
        let map = PolynomialMap::new(
            1,
            vec![vec![Term::new(-2.0, vec![1]), Term::new(-4.0, vec![2])]],
        )
        .expect("well-formed gain");
        ObserverGain::new(map, "deadbeat output injection K(y) = -2y - 4y^2").expect("no constant term")
    }
}

impl Dynamics for ShiftedLogistic {
    fn state_dim(&self) -> usize {
        1
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn map(&self, x: &Vector) -> Vector {
        let u = x[0];
        Vector::from_element(1, -2.0 * u - 4.0 * u * u)
    }
    fn output(&self, x: &Vector) -> Vector {
        x.clone()
    }
    fn map_jacobian(&self, x: &Vector) -> Matrix {
        Matrix::from_element(1, 1, -2.0 - 8.0 * x[0])
    }
    fn output_jacobian(&self, _x: &Vector) -> Matrix {
        Matrix::identity(1, 1)
    }
}

/// Henon model with parameters `a`, `b` and its deadbeat gain.
pub fn henon(a: f64, b: f64) -> Result<(SystemModel, ObserverGain)> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::invalid("a, b", "must be finite"));
    }
    let h = Henon { a, b };
    let model = SystemModel::new(h, "henon", format!("Henon map a = {a}, b = {b}; y = x1"))?;
    Ok((model, h.deadbeat_gain()))
}

/// Linear model `x ↦ A x`, `y = C x` with gain `K(y) = K y`.
pub fn linear(a: Matrix, c: Matrix, k: &Matrix) -> Result<(SystemModel, ObserverGain)> {
    let lin = Linear::new(a, c)?;
    let model = SystemModel::new(lin, "linear", "linear map x -> A x, y = C x")?;
    let gain = ObserverGain::linear(k, "linear gain")?;
    gain.check_conforms(&model)?;
    Ok((model, gain))
}

/// Looks up a built-in model by name.
///
/// Every default gain makes the error dynamics without erasures deadbeat.
pub fn builtin(name: &str) -> Result<(SystemModel, ObserverGain)> {
    match name {
        "henon" => henon(1.4, 0.3),
        "linear-scalar" => {
            let (m, g) = linear(dmatrix![2.0], dmatrix![1.0], &dmatrix![2.0])?;
            Ok((
                rename(m, "linear-scalar", "f(x) = 2x, h(x) = x"),
                relabel(g, "K(y) = 2y"),
            ))
        }
        "linear-diagonal" => {
            // A - K C = [[6, 4], [-9, -6]] is nilpotent
            let (m, g) = linear(
                dmatrix![2.0, 0.0; 0.0, 3.0],
                dmatrix![1.0, 1.0],
                &dmatrix![-4.0; 9.0],
            )?;
            Ok((
                rename(m, "linear-diagonal", "f(x) = diag(2, 3) x, h(x) = x1 + x2"),
                relabel(g, "K(y) = (-4y, 9y)"),
            ))
        }
        "logistic" => {
            let l = ShiftedLogistic;
            let model = SystemModel::new(
                l,
                "logistic",
                "logistic map z -> 4z(1-z) in u = z - 3/4: f(u) = -2u - 4u^2, h(u) = u",
            )?;
            Ok((model, l.deadbeat_gain()))
        }
        other => Err(Error::UnknownModel {
            name: other.to_string(),
            available: BUILTIN_NAMES.join(", "),
        }),
    }
}

fn rename(mut m: SystemModel, name: &str, description: &str) -> SystemModel {
    m.name = name.into();
    m.description = description.into();
    m
}

fn relabel(mut g: ObserverGain, description: &str) -> ObserverGain {
    g.description = description.into();
    g
}
