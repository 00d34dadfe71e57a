//! Brute-force references for the fast paths, usable on small grids only.
//!
//! Nothing here calls into the FFT, the symbolic differentiator or the
//! Halton sampler.

use thiserror::Error;

use crate::exprdsl::{EvalError, Expr, NonlinearitySpec};
use crate::model::{Problem, VectorField};
use crate::spectral::{Grid, ScalarField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("grid of {n} points per axis exceeds the direct-path budget of {max} for d = {d}")]
    BudgetExceeded { d: usize, n: usize, max: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("vector field has {found} components, problem has {expected}")]
    ComponentMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Largest grid, in points per axis, accepted by the `O(n^{2d})` paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_points_2d: usize,
    pub max_points_3d: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self {
            max_points_2d: 16,
            max_points_3d: 8,
        }
    }
}

impl OracleBudget {
    pub fn max_points(&self, d: usize) -> usize {
        if d == 2 {
            self.max_points_2d
        } else {
            self.max_points_3d
        }
    }

    pub fn check(&self, grid: &Grid) -> Result<(), OracleError> {
        let max = self.max_points(grid.dim());
        if grid.n() > max {
            return Err(OracleError::BudgetExceeded {
                d: grid.dim(),
                n: grid.n(),
                max,
            });
        }
        Ok(())
    }
}

fn indices(grid: &Grid, flat: usize) -> Vec<usize> {
    let d = grid.dim();
    let n = grid.n();
    let mut out = vec![0; d];
    let mut rest = flat;
    for i in (0..d).rev() {
        out[i] = rest % n;
        rest /= n;
    }
    out
}

fn flatten(grid: &Grid, idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| acc * grid.n() + i)
}

/// `h^d Σ_y K(x - y) f(y)` with periodic wrap, term by term.
pub fn direct_convolution(
    kernel: &ScalarField,
    f: &ScalarField,
    budget: &OracleBudget,
) -> Result<ScalarField, OracleError> {
    let grid = *f.grid();
    if kernel.grid() != &grid {
        return Err(OracleError::GridMismatch);
    }
    budget.check(&grid)?;
    let n = grid.n();
    let half = n / 2;
    let w = grid.spacing().powi(grid.dim() as i32);
    let all: Vec<Vec<usize>> = (0..grid.len()).map(|j| indices(&grid, j)).collect();
    let mut out = vec![0.0; grid.len()];
    let mut diff = vec![0; grid.dim()];
    for (i, xi) in all.iter().enumerate() {
        let mut acc = 0.0;
        for (j, yj) in all.iter().enumerate() {
            // x - y = (i - j) h sits at index (i - j + n/2) mod n of a grid starting at -L
            for (t, slot) in diff.iter_mut().enumerate() {
                *slot = (xi[t] + n + half - yj[t]) % n;
            }
            acc += kernel.values()[flatten(&grid, &diff)] * f.values()[j];
        }
        out[i] = w * acc;
    }
    Ok(ScalarField::new(grid, out).expect("finite inputs give finite sums"))
}

fn coords(grid: &Grid, flat: usize) -> Vec<f64> {
    let h = grid.spacing();
    indices(grid, flat)
        .into_iter()
        .map(|i| -grid.half_width() + i as f64 * h)
        .collect()
}

fn frequency(grid: &Grid, flat: usize) -> Vec<f64> {
    let n = grid.n() as i64;
    let step = std::f64::consts::PI / grid.half_width();
    indices(grid, flat)
        .into_iter()
        .map(|i| {
            let k = i as i64;
            let k = if k >= n / 2 { k - n } else { k };
            step * k as f64
        })
        .collect()
}

/// Applies the radial multiplier `m(|ξ|²)` through a naive DFT pair.
pub fn naive_multiplier(
    f: &ScalarField,
    m: impl Fn(f64) -> f64,
    budget: &OracleBudget,
) -> Result<ScalarField, OracleError> {
    let grid = *f.grid();
    budget.check(&grid)?;
    let xs: Vec<Vec<f64>> = (0..grid.len()).map(|j| coords(&grid, j)).collect();
    let ks: Vec<Vec<f64>> = (0..grid.len()).map(|j| frequency(&grid, j)).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let w = grid.spacing().powi(grid.dim() as i32);
    let spectrum: Vec<(f64, f64)> = ks
        .iter()
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (x, &v) in xs.iter().zip(f.values()) {
                let phase = dot(k, x);
                re += v * phase.cos();
                im -= v * phase.sin();
            }
            let s = m(dot(k, k));
            (w * re * s, w * im * s)
        })
        .collect();
    let vol = (2.0 * grid.half_width()).powi(grid.dim() as i32);
    let values = xs
        .iter()
        .map(|x| {
            let mut re = 0.0;
            for (k, &(a, b)) in ks.iter().zip(&spectrum) {
                let phase = dot(k, x);
                re += a * phase.cos() - b * phase.sin();
            }
            re / vol
        })
        .collect();
    Ok(ScalarField::new(grid, values).expect("finite inputs give finite sums"))
}

/// `t_g(v)` assembled from [`direct_convolution`] and [`naive_multiplier`].
pub fn direct_map_tg(
    problem: &Problem,
    v: &VectorField,
    budget: &OracleBudget,
) -> Result<Vec<ScalarField>, OracleError> {
    let grid = *problem.grid();
    if v.grid() != &grid {
        return Err(OracleError::GridMismatch);
    }
    if v.len() != problem.components() {
        return Err(OracleError::ComponentMismatch {
            expected: problem.components(),
            found: v.len(),
        });
    }
    budget.check(&grid)?;
    let n = problem.components();
    let u: Vec<Vec<f64>> = (0..n)
        .map(|m| {
            problem.u0().components()[m]
                .values()
                .iter()
                .zip(v.components()[m].values())
                .map(|(a, b)| a + b)
                .collect()
        })
        .collect();
    let mut gvals = vec![vec![0.0; grid.len()]; n];
    for i in 0..grid.len() {
        let z: Vec<f64> = (0..n).map(|m| u[m][i]).collect();
        for (m, comp) in problem.g().components().iter().enumerate() {
            gvals[m][i] = comp.eval(&z)?;
        }
    }
    (0..n)
        .map(|m| {
            let gm = ScalarField::new(grid, gvals[m].clone()).map_err(|_| EvalError::NonFinite)?;
            let conv = direct_convolution(&problem.kernels()[m].values, &gm, budget)?;
            let um = ScalarField::new(grid, u[m].clone()).expect("finite samples");
            let op = &problem.operators()[m];
            let tu = naive_multiplier(&um, |s| op.multiplier(s), budget)?;
            let values = tu
                .values()
                .iter()
                .zip(conv.values())
                .map(|(a, b)| a * b)
                .collect();
            Ok(ScalarField::new(grid, values).expect("finite products"))
        })
        .collect()
}

/// Central-difference Jacobian `J[m][n] ≈ ∂g_m/∂z_n`, step `1e-5 · max(1, |z|)`.
pub fn finite_diff_gradient(g: &NonlinearitySpec, z: &[f64]) -> Result<Vec<Vec<f64>>, EvalError> {
    let n = g.arity();
    let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
    let h = 1e-5 * norm.max(1.0);
    let mut jac = vec![vec![0.0; n]; n];
    let mut zp = z.to_vec();
    let mut zm = z.to_vec();
    for k in 0..n {
        zp[k] = z[k] + h;
        zm[k] = z[k] - h;
        for (m, comp) in g.components().iter().enumerate() {
            jac[m][k] = (comp.eval(&zp)? - comp.eval(&zm)?) / (2.0 * h);
        }
        zp[k] = z[k];
        zm[k] = z[k];
    }
    Ok(jac)
}

/// Kronecker sequence `frac(k α_j)` with `α_j = frac(√p_j)`.
struct Kronecker {
    alpha: Vec<f64>,
    k: u64,
}

impl Kronecker {
    fn new(dims: usize) -> Self {
        const P: [f64; 20] = [
            2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0, 29.0, 31.0, 37.0, 41.0, 43.0, 47.0,
            53.0, 59.0, 61.0, 67.0, 71.0,
        ];
        Self {
            alpha: P[..dims].iter().map(|p: &f64| p.sqrt().fract()).collect(),
            k: 0,
        }
    }

    fn next(&mut self) -> Vec<f64> {
        self.k += 1;
        let k = self.k as f64;
        self.alpha
            .iter()
            .map(|a| (k * a).fract().max(f64::MIN_POSITIVE))
            .collect()
    }
}

/// Uniform points of the ball of radius `r` in `R^n`, from a Kronecker
/// sequence pushed through Box–Muller.
pub fn dense_ball_points(n: usize, r: f64, samples: usize) -> impl Iterator<Item = Vec<f64>> {
    let pairs = n.div_ceil(2);
    let mut seq = Kronecker::new(2 * pairs + 1);
    (0..samples).map(move |_| {
        let u = seq.next();
        let mut dir = Vec::with_capacity(2 * pairs);
        for p in 0..pairs {
            let rad = (-2.0 * u[2 * p].ln()).sqrt();
            let th = 2.0 * std::f64::consts::PI * u[2 * p + 1];
            dir.push(rad * th.cos());
            dir.push(rad * th.sin());
        }
        dir.truncate(n);
        let len = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        let radius = r * u[2 * pairs].powf(1.0 / n as f64);
        if len == 0.0 {
            let mut e = vec![0.0; n];
            e[0] = radius;
            return e;
        }
        dir.into_iter().map(|x| radius * x / len).collect()
    })
}

/// `max |e(z)|` over `samples` points of the ball of radius `r` in `R^arity`.
pub fn dense_sup_estimate(
    e: &Expr,
    arity: usize,
    r: f64,
    samples: usize,
) -> Result<f64, EvalError> {
    let mut best = 0.0f64;
    for z in dense_ball_points(arity, r, samples) {
        best = best.max(e.eval(&z)?.abs());
    }
    Ok(best)
}

/// `Σ_m (sup|g_m| + Σ_n sup|∂g_m/∂z_n|)` over the ball, with derivatives by
/// finite differences.
pub fn dense_c1_norm(g: &NonlinearitySpec, r: f64, samples: usize) -> Result<f64, EvalError> {
    let n = g.arity();
    let mut sups = vec![vec![0.0f64; n + 1]; n];
    for z in dense_ball_points(n, r, samples) {
        let jac = finite_diff_gradient(g, &z)?;
        for (m, comp) in g.components().iter().enumerate() {
            sups[m][0] = sups[m][0].max(comp.eval(&z)?.abs());
            for k in 0..n {
                sups[m][k + 1] = sups[m][k + 1].max(jac[m][k].abs());
            }
        }
    }
    Ok(sups.iter().flatten().sum())
}
