//! Symbolic differentiation with constant folding.

use super::{Expr, Func};

fn num(c: f64) -> Expr {
    Expr::Num(c)
}

fn as_num(e: &Expr) -> Option<f64> {
    match e {
        Expr::Num(c) => Some(*c),
        _ => None,
    }
}

pub(crate) fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(c) => num(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => num(x + y),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => num(x - y),
        (Some(0.0), _) => neg(b),
        (_, Some(0.0)) => a,
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => num(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => num(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        (Some(-1.0), _) => neg(b),
        (_, Some(-1.0)) => neg(a),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn div(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) if y != 0.0 => num(x / y),
        (Some(0.0), _) => num(0.0),
        (_, Some(1.0)) => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn pow(a: Expr, n: u32) -> Expr {
    match (n, as_num(&a)) {
        (0, _) => num(1.0),
        (1, _) => a,
        (_, Some(x)) => num(x.powi(n as i32)),
        _ => Expr::Pow(Box::new(a), n),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, Box::new(a))
}

/// Exact partial derivative with respect to variable `var` (0-based).
pub fn differentiate(e: &Expr, var: usize) -> Expr {
    match e {
        Expr::Num(_) => num(0.0),
        Expr::Var(_, i) => num(if *i == var { 1.0 } else { 0.0 }),
        Expr::Neg(a) => neg(differentiate(a, var)),
        Expr::Add(a, b) => add(differentiate(a, var), differentiate(b, var)),
        Expr::Sub(a, b) => sub(differentiate(a, var), differentiate(b, var)),
        Expr::Mul(a, b) => add(
            mul(differentiate(a, var), (**b).clone()),
            mul((**a).clone(), differentiate(b, var)),
        ),
        Expr::Div(a, b) => {
            let da = differentiate(a, var);
            let db = differentiate(b, var);
            if as_num(&db) == Some(0.0) {
                return div(da, (**b).clone());
            }
            div(
                sub(mul(da, (**b).clone()), mul((**a).clone(), db)),
                pow((**b).clone(), 2),
            )
        }
        Expr::Pow(a, n) => {
            if *n == 0 {
                return num(0.0);
            }
            mul(
                mul(num(*n as f64), pow((**a).clone(), n - 1)),
                differentiate(a, var),
            )
        }
        Expr::Call(f, a) => {
            let da = differentiate(a, var);
            if as_num(&da) == Some(0.0) {
                return num(0.0);
            }
            let inner = (**a).clone();
            let outer = match f {
                Func::Sin => call(Func::Cos, inner),
                Func::Cos => neg(call(Func::Sin, inner)),
                Func::Tanh => sub(num(1.0), pow(call(Func::Tanh, inner), 2)),
                Func::Exp => call(Func::Exp, inner),
                Func::Sqrt => div(num(0.5), call(Func::Sqrt, inner)),
            };
            mul(outer, da)
        }
    }
}

/// `Σ_{i<d} ∂²e/∂x_i²`.
pub fn laplacian_symbolic(e: &Expr, d: usize) -> Expr {
    (0..d)
        .map(|i| differentiate(&differentiate(e, i), i))
        .fold(num(0.0), add)
}

#[cfg(test)]
mod tests {
    use super::super::{parse, Family};
    use super::*;

    fn z(text: &str, arity: usize) -> Expr {
        parse(text, arity, Family::Z).unwrap()
    }

    #[test]
    fn simple_derivatives() {
        assert_eq!(
            differentiate(&z("z1^2 + sin(z2)", 2), 0),
            mul(num(2.0), Expr::Var(Family::Z, 0))
        );
        assert_eq!(differentiate(&z("z1*z2", 2), 1), Expr::Var(Family::Z, 0));
        assert_eq!(differentiate(&z("3.5", 1), 0), num(0.0));
    }

    #[test]
    fn laplacian_of_paraboloid_and_constant() {
        let p = parse("x1^2+x2^2", 2, Family::X).unwrap();
        assert_eq!(laplacian_symbolic(&p, 2), num(4.0));
        let c = parse("7", 2, Family::X).unwrap();
        assert_eq!(laplacian_symbolic(&c, 2), num(0.0));
    }

    #[test]
    fn laplacian_of_gaussian() {
        let g = parse("exp(-x1^2-x2^2)", 2, Family::X).unwrap();
        let lap = laplacian_symbolic(&g, 2);
        for &(a, b) in &[(0.0, 0.0), (0.3, -1.2), (2.0, 0.5)] {
            let r2: f64 = a * a + b * b;
            let exact = (4.0 * r2 - 4.0) * (-r2).exp();
            assert!((lap.eval(&[a, b]).unwrap() - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn special_function_derivatives() {
        let pt = [0.4];
        let cases = [
            ("sin(z1)", 0.4f64.cos()),
            ("cos(z1)", -0.4f64.sin()),
            ("tanh(z1)", 1.0 - 0.4f64.tanh().powi(2)),
            ("exp(z1)", 0.4f64.exp()),
            ("sqrt(z1)", 0.5 / 0.4f64.sqrt()),
            ("1/z1", -1.0 / 0.16),
            ("z1^0", 0.0),
        ];
        for (text, expect) in cases {
            let d = differentiate(&z(text, 1), 0).eval(&pt).unwrap();
            assert!((d - expect).abs() < 1e-14, "{text}: {d} vs {expect}");
        }
    }
}
