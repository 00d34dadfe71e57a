//! Expression language for nonlinearities, initial data and analytic kernels.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := ('-')? atom ('^' integer)?
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Identifiers are the variables `z1..z16` (nonlinearities) or `x1..x3`
//! (spatial expressions) and the functions `sin cos tanh exp sqrt`.

mod diff;
mod parse;
mod poly;
mod random;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use diff::{differentiate, laplacian_symbolic};
pub use parse::{parse, ParseError, MAX_ARITY, MAX_SPATIAL_ARITY};
pub use poly::Polynomial;
pub use random::random_expr;

/// Which variable names an expression uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `z1..zN`, arguments of the nonlinearity.
    Z,
    /// `x1..xd`, spatial coordinates.
    X,
}

impl Family {
    pub fn prefix(self) -> char {
        match self {
            Family::Z => 'z',
            Family::X => 'x',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tanh,
    Exp,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tanh" => Func::Tanh,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub const ALL: [Func; 5] = [Func::Sin, Func::Cos, Func::Tanh, Func::Exp, Func::Sqrt];
}

/// Expression tree. Variables are 0-based (`z1` is `Var(Family::Z, 0)`).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Family, usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of negative value {0}")]
    SqrtOfNegative(f64),
    #[error("non-finite intermediate value")]
    NonFinite,
    #[error("variable index {index} out of range for a point of length {len}")]
    ArityMismatch { index: usize, len: usize },
}

impl Expr {
    /// Evaluates at `point`, reporting domain errors instead of producing
    /// NaN or infinities.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(c) => *c,
            Expr::Var(_, i) => *point.get(*i).ok_or(EvalError::ArityMismatch {
                index: *i,
                len: point.len(),
            })?,
            Expr::Neg(a) => -a.eval(point)?,
            Expr::Add(a, b) => a.eval(point)? + b.eval(point)?,
            Expr::Sub(a, b) => a.eval(point)? - b.eval(point)?,
            Expr::Mul(a, b) => a.eval(point)? * b.eval(point)?,
            Expr::Div(a, b) => {
                let num = a.eval(point)?;
                let den = b.eval(point)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                num / den
            }
            Expr::Pow(a, n) => a.eval(point)?.powi(*n as i32),
            Expr::Call(f, a) => {
                let x = a.eval(point)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Tanh => x.tanh(),
                    Func::Exp => x.exp(),
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(EvalError::SqrtOfNegative(x));
                        }
                        x.sqrt()
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Largest variable index + 1, or 0 for constant expressions.
    pub fn min_arity(&self) -> usize {
        match self {
            Expr::Num(_) => 0,
            Expr::Var(_, i) => i + 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.min_arity(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.min_arity().max(b.min_arity())
            }
        }
    }

    /// True when the tree has no variables.
    pub fn is_constant(&self) -> bool {
        self.min_arity() == 0
    }

    /// Expansion into a polynomial in `arity` variables, if the expression is
    /// one (arithmetic, integer powers, division by constants only).
    pub fn to_polynomial(&self, arity: usize) -> Option<Polynomial> {
        Polynomial::from_expr(self, arity)
    }

    pub fn is_polynomial(&self, arity: usize) -> bool {
        self.to_polynomial(arity).is_some()
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(..) => 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => 1 + a.node_count(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.node_count() + b.node_count()
            }
        }
    }
}

/// Canonical form: binary operations fully parenthesized, negative literals
/// wrapped as `(-c)`, so that parsing the printed text rebuilds the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) => {
                if c.is_sign_negative() {
                    write!(f, "(-{:?})", -c)
                } else {
                    write!(f, "{c:?}")
                }
            }
            Expr::Var(fam, i) => write!(f, "{}{}", fam.prefix(), i + 1),
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, n) => write!(f, "({a})^{n}"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NonlinearityError {
    #[error("component g{component}: {source}")]
    Parse {
        component: usize,
        #[source]
        source: ParseError,
    },
    #[error("a nonlinearity needs at least one component")]
    Empty,
    #[error("{0} components exceed the limit of {MAX_ARITY}")]
    TooManyComponents(usize),
}

/// `g = (g_1, ..., g_N)` in the variables `z1..zN` together with its exact
/// Jacobian `∂g_m/∂z_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearitySpec {
    components: Vec<Expr>,
    gradient: Vec<Vec<Expr>>,
}

impl NonlinearitySpec {
    pub fn new(components: Vec<Expr>) -> Result<Self, NonlinearityError> {
        let n = components.len();
        if n == 0 {
            return Err(NonlinearityError::Empty);
        }
        if n > MAX_ARITY {
            return Err(NonlinearityError::TooManyComponents(n));
        }
        let gradient = components
            .iter()
            .map(|g| (0..n).map(|j| differentiate(g, j)).collect())
            .collect();
        Ok(Self {
            components,
            gradient,
        })
    }

    pub fn parse<S: AsRef<str>>(texts: &[S]) -> Result<Self, NonlinearityError> {
        let n = texts.len();
        if n > MAX_ARITY {
            return Err(NonlinearityError::TooManyComponents(n));
        }
        let components = texts
            .iter()
            .enumerate()
            .map(|(m, t)| {
                parse(t.as_ref(), n, Family::Z).map_err(|source| NonlinearityError::Parse {
                    component: m + 1,
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(components)
    }

    /// Number of components `N` (also the number of variables).
    pub fn arity(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    /// `gradient()[m][n] = ∂g_m/∂z_n`.
    pub fn gradient(&self) -> &[Vec<Expr>] {
        &self.gradient
    }

    pub fn eval(&self, z: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.components.iter().map(|g| g.eval(z)).collect()
    }

    pub fn eval_gradient(&self, z: &[f64]) -> Result<Vec<Vec<f64>>, EvalError> {
        self.gradient
            .iter()
            .map(|row| row.iter().map(|e| e.eval(z)).collect())
            .collect()
    }

    /// `self - other`, componentwise. Both sides must have the same arity.
    pub fn difference(&self, other: &Self) -> Option<Self> {
        if self.arity() != other.arity() {
            return None;
        }
        let comps = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| Expr::Sub(Box::new(a.clone()), Box::new(b.clone())))
            .collect();
        Self::new(comps).ok()
    }

    /// `a * self`, componentwise.
    pub fn scaled(&self, a: f64) -> Self {
        let comps = self
            .components
            .iter()
            .map(|g| Expr::Mul(Box::new(Expr::Num(a)), Box::new(g.clone())))
            .collect();
        Self::new(comps).expect("arity unchanged")
    }

    pub fn is_polynomial(&self) -> bool {
        self.components
            .iter()
            .all(|g| g.is_polynomial(self.arity()))
    }

    pub fn display_components(&self) -> Vec<String> {
        self.components.iter().map(|g| g.to_string()).collect()
    }
}

/// Tolerance for `g(0) = 0`.
pub const ZERO_AT_ORIGIN_TOL: f64 = 1e-14;

/// Components whose value at the origin is not zero, with that value.
/// An evaluation error at the origin counts as a failure with value NaN.
pub fn nonzero_at_origin(g: &NonlinearitySpec) -> Vec<(usize, f64)> {
    let origin = vec![0.0; g.arity()];
    g.components()
        .iter()
        .enumerate()
        .filter_map(|(m, e)| match e.eval(&origin) {
            Ok(v) if v == 0.0 || v.abs() <= ZERO_AT_ORIGIN_TOL => None,
            Ok(v) => Some((m, v)),
            Err(_) => Some((m, f64::NAN)),
        })
        .collect()
}

/// Pass iff every `g_m(0)` vanishes (to `1e-14`).
pub fn check_zero_at_origin(g: &NonlinearitySpec) -> bool {
    nonzero_at_origin(g).is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(text: &str, arity: usize) -> Expr {
        parse(text, arity, Family::Z).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(z("z1*z2", 2).eval(&[2.0, 3.0]).unwrap(), 6.0);
        assert_eq!(z("z1^2 - z1", 1).eval(&[1.0]).unwrap(), 0.0);
        assert_eq!(z("exp(z1)-1", 1).eval(&[0.0]).unwrap(), 0.0);
        let x = parse("1/(1+x1^2+x2^2)", 2, Family::X).unwrap();
        assert_eq!(x.eval(&[0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn tanh_matches_reference_value() {
        // tanh(0.25) to 20 digits: 0.24491866240370912927...
        let v = z("tanh(z1*z2)", 2).eval(&[0.5, 0.5]).unwrap();
        assert!((v - 0.244_918_662_403_709_13).abs() <= 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert_eq!(z("1/z1", 1).eval(&[0.0]), Err(EvalError::DivisionByZero));
        assert!(matches!(
            z("sqrt(z1)", 1).eval(&[-1.0]),
            Err(EvalError::SqrtOfNegative(_))
        ));
        assert_eq!(z("exp(z1)", 1).eval(&[1e4]), Err(EvalError::NonFinite));
        assert!(matches!(
            z("z2", 2).eval(&[1.0]),
            Err(EvalError::ArityMismatch { index: 1, len: 1 })
        ));
    }

    #[test]
    fn zero_at_origin_check() {
        let ok = NonlinearitySpec::parse(&["z1*z2", "z1^2"]).unwrap();
        assert!(check_zero_at_origin(&ok));
        let bad = NonlinearitySpec::parse(&["z1+1"]).unwrap();
        assert!(!check_zero_at_origin(&bad));
        assert_eq!(nonzero_at_origin(&bad), vec![(0, 1.0)]);
        let sine = NonlinearitySpec::parse(&["sin(z1)"]).unwrap();
        assert!(check_zero_at_origin(&sine));
    }

    #[test]
    fn gradient_is_symbolic() {
        let g = NonlinearitySpec::parse(&["z1*z2", "z2"]).unwrap();
        let j = g.eval_gradient(&[1.0, 2.0]).unwrap();
        assert_eq!(j, vec![vec![2.0, 1.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn difference_and_scaling() {
        let g = NonlinearitySpec::parse(&["z1^2"]).unwrap();
        let h = g.scaled(1.5);
        let d = h.difference(&g).unwrap();
        assert!((d.eval(&[2.0]).unwrap()[0] - 2.0).abs() < 1e-15);
        let other = NonlinearitySpec::parse(&["z1", "z2"]).unwrap();
        assert!(g.difference(&other).is_none());
    }

    #[test]
    fn component_parse_errors_name_the_component() {
        let err = NonlinearitySpec::parse(&["z1", "z3"]).unwrap_err();
        assert!(matches!(err, NonlinearityError::Parse { component: 2, .. }));
        assert_eq!(
            NonlinearitySpec::parse::<&str>(&[]).unwrap_err(),
            NonlinearityError::Empty
        );
    }
}
