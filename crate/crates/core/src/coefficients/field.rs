use serde::{Deserialize, Serialize};

use super::expr::Expr;
use crate::error::{Error, Result};

pub type Point = [f64; 3];

/// Regular tensor grid samples with multilinear interpolation. Axes beyond
/// `shape.len()` are ignored; evaluation clamps to the grid box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSamples {
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub shape: Vec<usize>,
    /// Row-major with the x index varying fastest.
    pub values: Vec<f64>,
}

impl GridSamples {
    pub fn validate(&self) -> Result<()> {
        let d = self.shape.len();
        if d == 0 || d > 3 || self.origin.len() != d || self.spacing.len() != d {
            return Err(Error::Config("grid field needs matching origin/spacing/shape of length 1..=3".into()));
        }
        if self.shape.iter().any(|&n| n < 2) || self.spacing.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::Config("grid field needs at least 2 samples and positive spacing per axis".into()));
        }
        let n: usize = self.shape.iter().product();
        if n != self.values.len() {
            return Err(Error::Config(format!(
                "grid field expects {n} values, got {}",
                self.values.len()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: &Point) -> f64 {
        let d = self.shape.len();
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..d {
            let t = ((x[a] - self.origin[a]) / self.spacing[a]).clamp(0.0, (self.shape[a] - 1) as f64);
            let i = (t.floor() as usize).min(self.shape[a] - 2);
            base[a] = i;
            frac[a] = t - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = 0;
            let mut stride = 1;
            for a in 0..d {
                let bit = (corner >> a) & 1;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                idx += (base[a] + bit) * stride;
                stride *= self.shape[a];
            }
            if w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScalarField {
    Constant(f64),
    Expression { source: String, expr: Expr },
    Grid(GridSamples),
}

impl ScalarField {
    /// Parses an expression; a purely numeric result collapses to a constant.
    pub fn parse(text: &str) -> Result<Self> {
        let expr = Expr::parse(text)?;
        if let Expr::Num(v) = expr {
            return Ok(ScalarField::Constant(v));
        }
        Ok(ScalarField::Expression {
            source: text.to_string(),
            expr,
        })
    }

    pub fn constant(v: f64) -> Self {
        ScalarField::Constant(v)
    }

    pub fn grid(samples: GridSamples) -> Result<Self> {
        samples.validate()?;
        Ok(ScalarField::Grid(samples))
    }

    pub fn eval(&self, x: &Point) -> f64 {
        match self {
            ScalarField::Constant(v) => *v,
            ScalarField::Expression { expr, .. } => expr.eval(x),
            ScalarField::Grid(g) => g.eval(x),
        }
    }

    /// True when the field provably does not vary along `axis`.
    pub fn independent_of(&self, axis: usize) -> bool {
        match self {
            ScalarField::Constant(_) => true,
            ScalarField::Expression { expr, .. } => !expr.depends_on(axis),
            ScalarField::Grid(g) => axis >= g.shape.len(),
        }
    }

    pub fn is_constant(&self) -> bool {
        (0..3).all(|a| self.independent_of(a))
    }

    pub fn describe(&self) -> String {
        match self {
            ScalarField::Constant(v) => format!("{v:?}"),
            ScalarField::Expression { expr, .. } => expr.to_string(),
            ScalarField::Grid(g) => format!("grid{:?}", g.shape),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField(pub [ScalarField; 3]);

impl VectorField {
    pub fn zero() -> Self {
        VectorField([ScalarField::Constant(0.0), ScalarField::Constant(0.0), ScalarField::Constant(0.0)])
    }

    pub fn parse(components: &[&str]) -> Result<Self> {
        if components.is_empty() || components.len() > 3 {
            return Err(Error::Config(format!(
                "vector field needs 1 to 3 components, got {}",
                components.len()
            )));
        }
        let mut out = Self::zero();
        for (slot, text) in out.0.iter_mut().zip(components) {
            *slot = ScalarField::parse(text)?;
        }
        Ok(out)
    }

    pub fn eval(&self, x: &Point) -> [f64; 3] {
        [self.0[0].eval(x), self.0[1].eval(x), self.0[2].eval(x)]
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| matches!(c, ScalarField::Constant(v) if *v == 0.0))
    }
}

/// A scalar field together with whichever analytic derivatives were declared.
///
/// Derivatives of constant fields, and derivatives along axes an expression
/// never mentions, are exactly zero and need no declaration.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffField {
    pub name: String,
    pub value: ScalarField,
    pub grad: [Option<ScalarField>; 3],
    /// Upper triangle, row-major: xx, xy, xz, yy, yz, zz.
    pub hess: [Option<ScalarField>; 6],
}

pub(crate) const HESS_INDEX: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];
const AXIS: [&str; 3] = ["x", "y", "z"];

impl DiffField {
    pub fn new(name: &str, value: ScalarField) -> Self {
        DiffField {
            name: name.to_string(),
            value,
            grad: [None, None, None],
            hess: [None, None, None, None, None, None],
        }
    }

    pub fn with_grad(mut self, axis: usize, f: ScalarField) -> Self {
        self.grad[axis] = Some(f);
        self
    }

    pub fn with_hess(mut self, i: usize, j: usize, f: ScalarField) -> Self {
        self.hess[HESS_INDEX[i][j]] = Some(f);
        self
    }

    pub fn eval(&self, x: &Point) -> f64 {
        self.value.eval(x)
    }

    pub fn is_constant(&self) -> bool {
        self.value.is_constant()
    }

    fn grad_component(&self, axis: usize) -> Result<Option<&ScalarField>> {
        if let Some(f) = &self.grad[axis] {
            return Ok(Some(f));
        }
        if self.value.independent_of(axis) {
            return Ok(None);
        }
        Err(Error::MissingDerivative {
            field: self.name.clone(),
            derivative: format!("{}_{}", self.name, AXIS[axis]),
        })
    }

    fn hess_component(&self, i: usize, j: usize) -> Result<Option<&ScalarField>> {
        if let Some(f) = &self.hess[HESS_INDEX[i][j]] {
            return Ok(Some(f));
        }
        if self.value.independent_of(i) || self.value.independent_of(j) {
            return Ok(None);
        }
        let (a, b) = (i.min(j), i.max(j));
        Err(Error::MissingDerivative {
            field: self.name.clone(),
            derivative: format!("{}_{}{}", self.name, AXIS[a], AXIS[b]),
        })
    }

    /// Fails with `MissingDerivative` unless every gradient component is available.
    pub fn check_grad(&self) -> Result<()> {
        (0..3).try_for_each(|a| self.grad_component(a).map(|_| ()))
    }

    pub fn check_hess(&self) -> Result<()> {
        for i in 0..3 {
            for j in i..3 {
                self.hess_component(i, j)?;
            }
        }
        Ok(())
    }

    pub fn grad(&self, x: &Point) -> Result<[f64; 3]> {
        let mut g = [0.0; 3];
        for (a, slot) in g.iter_mut().enumerate() {
            if let Some(f) = self.grad_component(a)? {
                *slot = f.eval(x);
            }
        }
        Ok(g)
    }

    pub fn hess(&self, x: &Point) -> Result<[[f64; 3]; 3]> {
        let mut h = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                if let Some(f) = self.hess_component(i, j)? {
                    let v = f.eval(x);
                    h[i][j] = v;
                    h[j][i] = v;
                }
            }
        }
        Ok(h)
    }

    pub fn declared_grad(&self, axis: usize) -> Option<&ScalarField> {
        self.grad[axis].as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_multilinear() {
        let g = GridSamples {
            origin: vec![0.0, 0.0],
            spacing: vec![1.0, 1.0],
            shape: vec![2, 2],
            values: vec![0.0, 1.0, 2.0, 3.0],
        };
        let f = ScalarField::grid(g).unwrap();
        // f = x + 2y on the unit square
        assert!((f.eval(&[0.25, 0.5, 9.0]) - 1.25).abs() < 1e-15);
        assert!(f.independent_of(2));
        assert!(!f.independent_of(1));
    }

    #[test]
    fn grid_shape_mismatch() {
        let g = GridSamples {
            origin: vec![0.0],
            spacing: vec![0.5],
            shape: vec![3],
            values: vec![0.0, 1.0],
        };
        assert!(ScalarField::grid(g).is_err());
    }

    #[test]
    fn undeclared_derivative_is_an_error() {
        let p = DiffField::new("p", ScalarField::parse("exp(-x^2)").unwrap());
        assert!(matches!(p.grad(&[0.0; 3]), Err(Error::MissingDerivative { .. })));
        assert!(matches!(p.hess(&[0.0; 3]), Err(Error::MissingDerivative { .. })));
        let p = p
            .with_grad(0, ScalarField::parse("-2*x*exp(-x^2)").unwrap())
            .with_hess(0, 0, ScalarField::parse("(4*x^2-2)*exp(-x^2)").unwrap());
        assert_eq!(p.grad(&[0.0; 3]).unwrap(), [0.0; 3]);
        assert_eq!(p.hess(&[0.0; 3]).unwrap()[0][0], -2.0);
    }

    #[test]
    fn constants_have_zero_derivatives() {
        let phi = DiffField::new("phi", ScalarField::constant(3.0));
        assert_eq!(phi.hess(&[1.0, 2.0, 3.0]).unwrap(), [[0.0; 3]; 3]);
        let p = DiffField::new("p", ScalarField::parse("y^2").unwrap())
            .with_grad(1, ScalarField::parse("2*y").unwrap())
            .with_hess(1, 1, ScalarField::constant(2.0));
        let h = p.hess(&[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(h[1][1], 2.0);
        assert_eq!(h[0][1], 0.0);
    }
}
