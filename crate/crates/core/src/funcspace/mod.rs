//! Cubes, function specifications, grid sampling and cube averages.

mod cube;
pub mod expr;
pub mod quadrature;
mod sampled;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use cube::Cube;
pub use expr::{parse_number, Expr};
pub use quadrature::{cube_average, default_resolution, RealFn, TensorGrid};
pub use sampled::{Interpolation, SampledFunction};

use crate::error::{DomainError, Result};

/// A parsed analytic function on ℝⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSpec {
    expr: Expr,
    dim: usize,
}

impl FunctionSpec {
    pub fn new(expr: Expr) -> Self {
        let dim = expr.min_dim();
        FunctionSpec { expr, dim }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    /// Declares the ambient dimension; never lowers it below what the
    /// expression reads.
    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = self.dim.max(dim);
        self
    }

    /// `scale * self`, keeping the result printable and re-parsable.
    pub fn scaled(&self, scale: f64) -> FunctionSpec {
        let factor = if scale < 0.0 {
            Expr::Neg(Box::new(Expr::Num(-scale)))
        } else {
            Expr::Num(scale)
        };
        FunctionSpec {
            expr: Expr::Bin(
                expr::BinOp::Mul,
                Box::new(factor),
                Box::new(self.expr.clone()),
            ),
            dim: self.dim,
        }
    }

    /// Pointwise product.
    pub fn times(&self, other: &FunctionSpec) -> FunctionSpec {
        FunctionSpec {
            expr: Expr::Bin(
                expr::BinOp::Mul,
                Box::new(self.expr.clone()),
                Box::new(other.expr.clone()),
            ),
            dim: self.dim.max(other.dim),
        }
    }

    /// Whether the expression reads no coordinates.
    pub fn is_constant(&self) -> bool {
        self.expr.min_dim() == 0
    }
}

/// Parses an expression in the grammar documented in [`expr`].
pub fn parse_function(text: &str) -> Result<FunctionSpec> {
    expr::parse_expr(text).map(FunctionSpec::new)
}

impl FromStr for FunctionSpec {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_function(s)
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt(f)
    }
}

impl Serialize for FunctionSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FunctionSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_function(&s).map_err(serde::de::Error::custom)
    }
}

impl RealFn for FunctionSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> Result<f64, DomainError> {
        self.expr.eval(x)
    }

    fn breakpoints(&self, axis: usize) -> Vec<f64> {
        let mut out = Vec::new();
        self.expr.breakpoints(axis, &mut out);
        out
    }
}

/// Named functions used throughout the experiments.
pub mod catalog {
    use super::{parse_function, FunctionSpec};
    use crate::error::{Error, Result};

    /// Squared norm `x1*x1 + ... + xn*xn` as expression text.
    fn norm_sq(dim: usize) -> String {
        (1..=dim)
            .map(|i| format!("x{i}*x{i}"))
            .collect::<Vec<_>>()
            .join(" + ")
    }

    /// `½·log(1 + |x|²)`: a smooth stand-in for `log|x|` that agrees with it
    /// up to `O(|x|⁻²)` at infinity.
    pub fn smoothed_log(dim: usize) -> FunctionSpec {
        parse_function(&format!("0.5*log(1 + {})", norm_sq(dim)))
            .expect("catalog expression")
            .with_dim(dim)
    }

    /// `log|x|` itself (undefined at the origin).
    pub fn log_abs(dim: usize) -> FunctionSpec {
        let text = if dim == 1 {
            "log(abs(x1))".to_string()
        } else {
            format!("0.5*log({})", norm_sq(dim))
        };
        parse_function(&text).expect("catalog expression").with_dim(dim)
    }

    /// `∏ sin(x_k)`.
    pub fn sin_product(dim: usize) -> FunctionSpec {
        let text = (1..=dim).map(|i| format!("sin(x{i})")).collect::<Vec<_>>().join("*");
        parse_function(&text).expect("catalog expression").with_dim(dim)
    }

    /// Compactly supported smooth bump `exp(-1/(1-|x|²))` on the unit ball.
    pub fn bump(dim: usize) -> FunctionSpec {
        let text = if dim == 1 {
            "bump(x1)".to_string()
        } else {
            format!("bump(sqrt({}))", norm_sq(dim))
        };
        parse_function(&text).expect("catalog expression").with_dim(dim)
    }

    /// Resolves a catalog name, or parses `text` as an expression.
    pub fn resolve(text: &str, dim: usize) -> Result<FunctionSpec> {
        let f = match text.trim() {
            "smoothed_log" => smoothed_log(dim),
            "log_abs" => log_abs(dim),
            "sin_product" => sin_product(dim),
            "bump" => bump(dim),
            "sign" => parse_function("sign(x1)")?.with_dim(dim),
            "indicator01" => parse_function("ind(x1, 0, 1)")?.with_dim(dim),
            other => parse_function(other)?.with_dim(dim),
        };
        if f.dim > dim {
            return Err(Error::precondition(format!(
                "`{text}` reads {} coordinates but dim = {dim}",
                f.dim
            )));
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn log_average_on_exponential_interval() {
        // average of log over [e, e²] is 1 + 1/(e-1)
        let e = std::f64::consts::E;
        let f = catalog::log_abs(1);
        let q = Cube::from_bounds(&[e], &[e * e]).unwrap();
        let v = cube_average(&f, &q, 64).unwrap();
        assert!((v - (1.0 + 1.0 / (e - 1.0))).abs() < 1e-4, "{v}");
        assert!((v - 1.581977).abs() < 1e-4);
    }

    #[test]
    fn domain_error_propagates() {
        let f = parse_function("1/x1").unwrap();
        // res 3 on [-1,1] puts a node at 0
        let q = Cube::new(vec![0.0], 1.0).unwrap();
        assert!(matches!(
            cube_average(&f, &q, 3),
            Err(crate::Error::Domain(_))
        ));
    }

    #[test]
    fn catalog_dims() {
        assert_eq!(catalog::sin_product(2).to_string(), "(sin(x1) * sin(x2))");
        assert_eq!(catalog::smoothed_log(1).eval(&[0.0]).unwrap(), 0.0);
        assert!(catalog::resolve("x3", 2).is_err());
        assert_eq!(RealFn::dim(&catalog::resolve("7", 2).unwrap()), 2);
    }

    #[test]
    fn serde_roundtrip() {
        let f = catalog::smoothed_log(2);
        let s = serde_json::to_string(&f).unwrap();
        let g: FunctionSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(f.expr(), g.expr());
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0f64..1e6).prop_map(Expr::Num),
            (0usize..3).prop_map(Expr::Var),
        ];
        leaf.prop_recursive(4, 32, 3, |inner| {
            use expr::{BinOp, Func};
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (inner.clone(), inner.clone(), 0..4usize).prop_map(|(a, b, k)| {
                    let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div][k];
                    Expr::Bin(op, Box::new(a), Box::new(b))
                }),
                (inner.clone(), 0..6usize).prop_map(|(a, k)| {
                    let f = [Func::Sin, Func::Cos, Func::Exp, Func::Log, Func::Abs, Func::Sqrt][k];
                    Expr::Call(f, vec![a])
                }),
                (inner.clone(), inner.clone(), 0..3usize).prop_map(|(a, b, k)| {
                    let f = [Func::Pow, Func::Min, Func::Max][k];
                    Expr::Call(f, vec![a, b])
                }),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(e in arb_expr()) {
            let text = e.to_string();
            let back = expr::parse_expr(&text).unwrap();
            prop_assert_eq!(&back, &e);
            prop_assert_eq!(back.to_string(), text);
        }

        #[test]
        fn average_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -5.0f64..5.0) {
            let f = parse_function("sin(x1)*x2").unwrap();
            let g = parse_function("exp(x1) - x2*x2").unwrap();
            let q = Cube::new(vec![c, 0.5], 0.75).unwrap();
            let combo = parse_function(&format!("({a:?})*(sin(x1)*x2) + ({b:?})*(exp(x1) - x2*x2)")).unwrap();
            let lhs = cube_average(&combo, &q, 16).unwrap();
            let rhs = a * cube_average(&f, &q, 16).unwrap() + b * cube_average(&g, &q, 16).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn average_is_translation_covariant(t in -50.0f64..50.0, c in -2.0f64..2.0) {
            let f = parse_function("cos(x1) + x1*x1").unwrap();
            let shifted = quadrature::Shifted { f: &f, shift: vec![t] };
            let q = Cube::new(vec![c], 0.5).unwrap();
            let a = cube_average(&f, &q, 32).unwrap();
            let b = cube_average(&shifted, &q.translate(&[t]), 32).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn midpoint_error_is_second_order() {
        let f = parse_function("exp(x1)*exp(2*x2)").unwrap();
        let q = Cube::new(vec![0.3, 0.2], 0.5).unwrap();
        let exact = {
            let e1 = (0.8f64).exp() - (-0.2f64).exp();
            let e2 = ((1.4f64).exp() - (-0.6f64).exp()) / 2.0;
            e1 * e2
        };
        let err = |r| (cube_average(&f, &q, r).unwrap() - exact).abs();
        let ratio = err(16) / err(32);
        assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
    }
}
