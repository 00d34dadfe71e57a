use std::collections::BTreeMap;

use super::Expr;

/// Sparse real polynomial, keyed by exponent vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    arity: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn zero(arity: usize) -> Self {
        Self {
            arity,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(arity: usize, c: f64) -> Self {
        let mut p = Self::zero(arity);
        p.insert(vec![0; arity], c);
        p
    }

    pub fn variable(arity: usize, index: usize) -> Self {
        let mut exps = vec![0; arity];
        exps[index] = 1;
        let mut p = Self::zero(arity);
        p.insert(exps, 1.0);
        p
    }

    fn insert(&mut self, exps: Vec<u32>, c: f64) {
        if c == 0.0 {
            return;
        }
        let slot = self.terms.entry(exps).or_insert(0.0);
        *slot += c;
        if *slot == 0.0 {
            self.terms.retain(|_, v| *v != 0.0);
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// `(exponents, coefficient)` pairs with nonzero coefficients.
    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.terms.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|k| k.iter().sum()).max().unwrap_or(0)
    }

    /// Constant value, if the polynomial has no non-constant terms.
    pub fn as_constant(&self) -> Option<f64> {
        match self.terms.len() {
            0 => Some(0.0),
            1 => {
                let (k, v) = self.terms.iter().next().expect("one term");
                k.iter().all(|&e| e == 0).then_some(*v)
            }
            _ => None,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, &v) in &other.terms {
            out.insert(k.clone(), v);
        }
        out
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut out = Self::zero(self.arity);
        for (k, &v) in &self.terms {
            out.insert(k.clone(), a * v);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.arity);
        for (ka, &va) in &self.terms {
            for (kb, &vb) in &other.terms {
                let k = ka.iter().zip(kb).map(|(a, b)| a + b).collect();
                out.insert(k, va * vb);
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::constant(self.arity, 1.0);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(k, &c)| {
                c * k
                    .iter()
                    .zip(z)
                    .map(|(&e, &x)| x.powi(e as i32))
                    .product::<f64>()
            })
            .sum()
    }

    /// `Σ_β |c_β| r^{|β|}`: an upper bound for `sup_{|z| <= r} |p(z)|`, since
    /// every monomial satisfies `|z^β| <= |z|^{|β|}`.
    pub fn sup_bound(&self, r: f64) -> f64 {
        self.terms
            .iter()
            .map(|(k, &c)| c.abs() * r.powi(k.iter().sum::<u32>() as i32))
            .sum()
    }

    /// Expands `e`; `None` when it is not a polynomial in `arity` variables.
    pub fn from_expr(e: &Expr, arity: usize) -> Option<Self> {
        Some(match e {
            Expr::Num(c) => Self::constant(arity, *c),
            Expr::Var(_, i) => {
                if *i >= arity {
                    return None;
                }
                Self::variable(arity, *i)
            }
            Expr::Neg(a) => Self::from_expr(a, arity)?.scale(-1.0),
            Expr::Add(a, b) => Self::from_expr(a, arity)?.add(&Self::from_expr(b, arity)?),
            Expr::Sub(a, b) => {
                Self::from_expr(a, arity)?.add(&Self::from_expr(b, arity)?.scale(-1.0))
            }
            Expr::Mul(a, b) => Self::from_expr(a, arity)?.mul(&Self::from_expr(b, arity)?),
            Expr::Div(a, b) => {
                let den = Self::from_expr(b, arity)?.as_constant()?;
                if den == 0.0 {
                    return None;
                }
                Self::from_expr(a, arity)?.scale(1.0 / den)
            }
            Expr::Pow(a, n) => Self::from_expr(a, arity)?.pow(*n),
            Expr::Call(..) => return None,
        })
    }
}
