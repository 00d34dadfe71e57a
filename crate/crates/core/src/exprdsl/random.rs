//! Random expressions that evaluate without domain errors on all of `R^n`.
//!
//! Square roots and denominators are guarded as `sqrt(1 + a^2)` and
//! `a / (1 + b^2)`; `exp` is applied to `tanh(a)`.

use rand::Rng;

use super::{Expr, Family, Func};

fn b(e: Expr) -> Box<Expr> {
    Box::new(e)
}

fn one_plus_square(a: Expr) -> Expr {
    Expr::Add(b(Expr::Num(1.0)), b(Expr::Pow(b(a), 2)))
}

/// A random tree of depth at most `depth` over `arity` variables.
pub fn random_expr<R: Rng + ?Sized>(rng: &mut R, arity: usize, family: Family, depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.7) {
            Expr::Var(family, rng.gen_range(0..arity))
        } else {
            // two decimals so the value prints and parses back exactly
            Expr::Num((rng.gen_range(-200..=200) as f64) / 100.0)
        };
    }
    let sub = |rng: &mut R| random_expr(rng, arity, family, depth - 1);
    match rng.gen_range(0..10) {
        0 => Expr::Neg(b(sub(rng))),
        1 => Expr::Add(b(sub(rng)), b(sub(rng))),
        2 => Expr::Sub(b(sub(rng)), b(sub(rng))),
        3 | 4 => Expr::Mul(b(sub(rng)), b(sub(rng))),
        5 => Expr::Div(b(sub(rng)), b(one_plus_square(sub(rng)))),
        6 => Expr::Pow(b(sub(rng)), rng.gen_range(0..=3)),
        7 => {
            let f = [Func::Sin, Func::Cos, Func::Tanh][rng.gen_range(0..3)];
            Expr::Call(f, b(sub(rng)))
        }
        8 => Expr::Call(Func::Exp, b(Expr::Call(Func::Tanh, b(sub(rng))))),
        _ => Expr::Call(Func::Sqrt, b(one_plus_square(sub(rng)))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_expressions_evaluate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let e = random_expr(&mut rng, 3, Family::Z, 4);
            assert!(e.min_arity() <= 3);
            let z = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), 0.3];
            assert!(e.eval(&z).is_ok(), "{e}");
        }
    }
}
