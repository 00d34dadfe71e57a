//! Constants of the contraction argument and the certificate built on them.
//!
//! # Embedding constant
//!
//! For `φ` with transform `F`, Cauchy–Schwarz on the Fourier side gives
//!
//! ```text
//! |φ(x)| <= (2π)^{-d} ∫ |F| = (2π)^{-d} ∫ |F|(1+|ξ|⁴)^{1/2} (1+|ξ|⁴)^{-1/2}
//!        <= ‖φ‖_{H²} · ((2π)^{-d} ∫ (1+|ξ|⁴)^{-1} dξ)^{1/2}
//! ```
//!
//! so `c_e = (2π)^{-d/2} (∫ (1+|ξ|⁴)^{-1} dξ)^{1/2}`; `1/(2√2)` for `d = 2`.
//! On the periodic grid the integral becomes the lattice sum
//! `(2L)^{-d} Σ_k (1+|ξ_k|⁴)^{-1}`, which exceeds the integral on small boxes,
//! so the certified value is the larger of the two.
//!
//! # Algebra constant
//!
//! From `|ξ|⁴ <= (|η| + |ξ-η|)⁴ <= 8(|η|⁴ + |ξ-η|⁴)` we get
//! `(1+|ξ|⁴)^{1/2} <= √8 ((1+|η|⁴)^{1/2} + (1+|ξ-η|⁴)^{1/2})`. Writing
//! `F(φψ) = (2π)^{-d} F(φ) * F(ψ)` and applying Young's inequality
//! `‖a * b‖_{L²} <= ‖a‖_{L²} ‖b‖_{L¹}` to both terms, with
//! `‖F(ψ)‖_{L¹} <= (2π)^{d/2} c_e (2π)^{d/2} ‖ψ‖_{H²}` from the embedding
//! argument, yields `c_a = 2√8 c_e = 4√2 c_e`. On the grid, wrapped
//! frequencies only shrink `|ξ|`, so the same chain holds with the lattice
//! sum in place of the integral.

use quadrature::integrate;
use serde::Serialize;
use thiserror::Error;

use crate::exprdsl::{EvalError, NonlinearitySpec};
use crate::model::{LaplacianSource, Problem};
use crate::sampling;
use crate::spectral::Grid;

/// `c_a / c_e`.
pub const ALGEBRA_FACTOR: f64 = 4.0 * std::f64::consts::SQRT_2;

/// Inflation applied to sampled sup-norm estimates.
pub const SAMPLED_SAFETY_FACTOR: f64 = 1.1;

/// Interior sample points per component for sampled `C¹` norms.
pub const SAMPLES_INTERIOR_PER_COMPONENT: usize = 4096;
/// Boundary sample points per component for sampled `C¹` norms.
pub const SAMPLES_BOUNDARY_PER_COMPONENT: usize = 1024;

pub const ALGEBRA_DERIVATION: &str = "c_a = 4*sqrt(2)*c_e: (1+|xi|^4)^(1/2) <= sqrt(8)*((1+|eta|^4)^(1/2) + (1+|xi-eta|^4)^(1/2)), \
Young's inequality on the Fourier-side convolution, and ||F(psi)||_L1 bounded by the c_e Cauchy-Schwarz step";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("unsupported dimension {0}: only d = 2 and d = 3 are supported")]
    UnsupportedDimension(usize),
    #[error("Q must be positive, got {0}")]
    QNotPositive(f64),
    #[error("sigma must be below 1, got {0}")]
    SigmaNotBelowOne(f64),
    #[error("M must be positive, got {0}")]
    MNotPositive(f64),
    #[error("nonlinearities have different numbers of components")]
    ArityMismatch,
    #[error("evaluating the nonlinearity at z = {point:?}: {source}")]
    Eval {
        point: Vec<f64>,
        #[source]
        source: EvalError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    RigorousBound,
    SampledEstimate,
    Override,
}

/// `∫_0^∞ r^{d-1} (1 + r⁴)^{-1} dr`, folded onto `[0, 1]` with `r -> 1/r`.
fn radial_integral(d: usize) -> f64 {
    let a = d as i32 - 1;
    let b = 3 - d as i32;
    integrate(
        |r: f64| (r.powi(a) + r.powi(b)) / (1.0 + r.powi(4)),
        0.0,
        1.0,
        1e-15,
    )
    .integral
}

/// `c_e` for the whole space, `(2π)^{-d/2} (∫_{R^d} (1+|ξ|⁴)^{-1} dξ)^{1/2}`.
pub fn embedding_constant(d: usize) -> Result<f64, AnalysisError> {
    let sphere = match d {
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => return Err(AnalysisError::UnsupportedDimension(d)),
    };
    let two_pi = 2.0 * std::f64::consts::PI;
    Ok((sphere * radial_integral(d) / two_pi.powi(d as i32)).sqrt())
}

/// The lattice counterpart of [`embedding_constant`] for one grid.
pub fn grid_embedding_constant(grid: &Grid) -> f64 {
    let sum: f64 = grid
        .frequency_sq_table()
        .into_iter()
        .map(|s| 1.0 / (1.0 + s * s))
        .sum();
    (sum / grid.volume()).sqrt()
}

/// `max(c_e(d), c_e(grid))`, valid for every field sampled on `grid`.
pub fn effective_embedding_constant(grid: &Grid) -> f64 {
    let continuum = embedding_constant(grid.dim()).expect("grid dimension is 2 or 3");
    continuum.max(grid_embedding_constant(grid))
}

/// `c_a = 4√2 c_e(d)`.
pub fn algebra_constant(d: usize) -> Result<f64, AnalysisError> {
    Ok(ALGEBRA_FACTOR * embedding_constant(d)?)
}

pub fn effective_algebra_constant(grid: &Grid) -> f64 {
    ALGEBRA_FACTOR * effective_embedding_constant(grid)
}

/// Radius of the ball `I`: `c_e (‖u0‖ + 1)`.
pub fn ball_radius_i(c_e: f64, u0_norm: f64) -> f64 {
    c_e * (u0_norm + 1.0)
}

/// A `C¹(I)` norm value with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct C1Estimate {
    /// The value used downstream (inflated when sampled).
    pub value: f64,
    /// Sum of the sampled maxima before inflation; equal to `value` for
    /// rigorous bounds.
    pub raw: f64,
    pub provenance: Provenance,
}

/// `Σ_m (‖g_m‖_{C(I)} + Σ_n ‖∂g_m/∂z_n‖_{C(I)})` over the ball of radius `r`.
///
/// Polynomial nonlinearities get the rigorous coefficient bound
/// `Σ_β |c_β| r^{|β|}`; anything else is sampled on quasi-random interior and
/// boundary points and inflated by [`SAMPLED_SAFETY_FACTOR`].
pub fn c1_norm(g: &NonlinearitySpec, r: f64, seed: u64) -> Result<C1Estimate, AnalysisError> {
    let n = g.arity();
    if g.is_polynomial() {
        let mut total = 0.0;
        for (m, comp) in g.components().iter().enumerate() {
            let p = comp.to_polynomial(n).expect("checked polynomial");
            total += p.sup_bound(r);
            for d in &g.gradient()[m] {
                total += d
                    .to_polynomial(n)
                    .expect("derivative of a polynomial")
                    .sup_bound(r);
            }
        }
        return Ok(C1Estimate {
            value: total,
            raw: total,
            provenance: Provenance::RigorousBound,
        });
    }
    let raw = sampled_c1_norm(g, r, seed)?;
    Ok(C1Estimate {
        value: SAMPLED_SAFETY_FACTOR * raw,
        raw,
        provenance: Provenance::SampledEstimate,
    })
}

fn sampled_c1_norm(g: &NonlinearitySpec, r: f64, seed: u64) -> Result<f64, AnalysisError> {
    let n = g.arity();
    let points = sampling::ball_points(
        n,
        r,
        SAMPLES_INTERIOR_PER_COMPONENT * n,
        SAMPLES_BOUNDARY_PER_COMPONENT * n,
        seed,
    );
    // sups[m][0] = sup|g_m|, sups[m][1 + k] = sup|∂g_m/∂z_k|
    let mut sups = vec![vec![0.0f64; n + 1]; n];
    for z in &points {
        let wrap = |source| AnalysisError::Eval {
            point: z.clone(),
            source,
        };
        let values = g.eval(z).map_err(wrap)?;
        let jac = g.eval_gradient(z).map_err(wrap)?;
        for m in 0..n {
            sups[m][0] = sups[m][0].max(values[m].abs());
            for k in 0..n {
                sups[m][k + 1] = sups[m][k + 1].max(jac[m][k].abs());
            }
        }
    }
    Ok(sups.iter().flatten().sum())
}

/// `M >= ‖g‖_{C¹(I, R^N)}` on the ball of radius `r_i`.
pub fn estimate_m(g: &NonlinearitySpec, r_i: f64, seed: u64) -> Result<C1Estimate, AnalysisError> {
    c1_norm(g, r_i, seed)
}

/// `‖g1 - g2‖_{C¹(I, R^N)}`, same policy as [`estimate_m`].
pub fn c1_distance(
    g1: &NonlinearitySpec,
    g2: &NonlinearitySpec,
    r_i: f64,
    seed: u64,
) -> Result<C1Estimate, AnalysisError> {
    let diff = g1.difference(g2).ok_or(AnalysisError::ArityMismatch)?;
    c1_norm(&diff, r_i, seed)
}

/// `Q = (Σ_m ‖T_m‖² ‖K_m‖²_{W̃^{2,1}})^{1/2}`.
pub fn compute_q(operator_norms: &[f64], kernel_w21_norms: &[f64]) -> f64 {
    operator_norms
        .iter()
        .zip(kernel_w21_norms)
        .map(|(t, k)| (t * k).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `σ = 2 c_a Q M (‖u0‖ + 1)`.
pub fn compute_sigma(c_a: f64, q: f64, m: f64, u0_norm: f64) -> Result<f64, AnalysisError> {
    if !(q > 0.0) {
        return Err(AnalysisError::QNotPositive(q));
    }
    Ok(2.0 * c_a * q * m * (u0_norm + 1.0))
}

/// Outcome of checking `c_a M (‖u0‖+1)² Q <= ρ/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionVerdict {
    /// `c_a M (‖u0‖+1)² Q`.
    pub lhs: f64,
    pub rho: f64,
    pub pass: bool,
    /// `lhs` equals `ρ/2` up to rounding; passes, with a warning.
    pub boundary_equality: bool,
    pub sigma: f64,
    pub sigma_below_one: bool,
    /// `[2 lhs, 1]` when nonempty.
    pub rho_feasible_interval: Option<[f64; 2]>,
}

impl ContractionVerdict {
    /// Pass and a contraction factor strictly below one.
    pub fn contraction(&self) -> bool {
        self.pass && self.sigma_below_one
    }
}

pub fn check_contraction_condition(
    c_a: f64,
    m: f64,
    u0_norm: f64,
    q: f64,
    rho: f64,
) -> ContractionVerdict {
    let lhs = c_a * m * (u0_norm + 1.0).powi(2) * q;
    let half = rho / 2.0;
    let boundary_equality = (lhs - half).abs() <= 1e-12 * half;
    let pass = lhs <= half || boundary_equality;
    let sigma = 2.0 * c_a * q * m * (u0_norm + 1.0);
    let low = 2.0 * lhs;
    ContractionVerdict {
        lhs,
        rho,
        pass,
        boundary_equality,
        sigma,
        sigma_below_one: sigma < 1.0,
        rho_feasible_interval: (low <= 1.0).then_some([low, 1.0]),
    }
}

/// Right-hand side of the continuity estimate,
/// `σ/(2M(1-σ)) (‖u0‖+1) ‖g1 - g2‖_{C¹}`.
pub fn continuity_bound(
    sigma: f64,
    m_joint: f64,
    u0_norm: f64,
    distance: f64,
) -> Result<f64, AnalysisError> {
    if !(sigma < 1.0) {
        return Err(AnalysisError::SigmaNotBelowOne(sigma));
    }
    if !(m_joint > 0.0) {
        return Err(AnalysisError::MNotPositive(m_joint));
    }
    Ok(sigma / (2.0 * m_joint * (1.0 - sigma)) * (u0_norm + 1.0) * distance)
}

/// Expert replacements for `c_e` and `c_a`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ConstantOverrides {
    pub c_e: Option<f64>,
    pub c_a: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AnalysisOptions {
    pub seed: u64,
    /// `None` picks ρ = 1.
    pub rho: Option<f64>,
    pub overrides: ConstantOverrides,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelNormReport {
    pub l1: f64,
    pub laplacian_l1: f64,
    pub w21: f64,
    pub laplacian_source: LaplacianSource,
    pub tail_mass: f64,
}

/// Every constant of the certificate, with provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsReport {
    pub c_e: f64,
    pub c_e_provenance: Provenance,
    pub c_e_continuum: f64,
    pub c_e_lattice: f64,
    pub c_a: f64,
    pub c_a_provenance: Provenance,
    pub algebra_derivation: String,
    pub constants_overridden: bool,
    pub u0_norm: f64,
    pub r_i: f64,
    pub m: f64,
    pub m_raw: f64,
    pub m_provenance: Provenance,
    pub kernels: Vec<KernelNormReport>,
    pub operator_norms: Vec<f64>,
    pub q: f64,
    pub sigma: f64,
    pub rho: f64,
    pub rho_feasible_interval: Option<[f64; 2]>,
    pub verdict: ContractionVerdict,
}

impl ConstantsReport {
    /// Certified iff the hypothesis holds, `σ < 1`, and the constants are the
    /// derived ones.
    pub fn certified(&self) -> bool {
        self.verdict.contraction() && !self.constants_overridden
    }

    /// The same report with a different `M` (e.g. the joint `max(M1, M2)`).
    pub fn with_m(&self, m: C1Estimate) -> Result<Self, AnalysisError> {
        let mut out = self.clone();
        out.m = m.value;
        out.m_raw = m.raw;
        out.m_provenance = m.provenance;
        out.sigma = compute_sigma(out.c_a, out.q, out.m, out.u0_norm)?;
        out.verdict = check_contraction_condition(out.c_a, out.m, out.u0_norm, out.q, out.rho);
        out.rho_feasible_interval = out.verdict.rho_feasible_interval;
        Ok(out)
    }
}

/// Computes every constant for `problem` and checks the contraction
/// hypothesis.
pub fn analyze(
    problem: &Problem,
    options: &AnalysisOptions,
) -> Result<ConstantsReport, AnalysisError> {
    let grid = problem.grid();
    let d = grid.dim();
    let c_e_continuum = embedding_constant(d)?;
    let c_e_lattice = grid_embedding_constant(grid);
    let (c_e, c_e_provenance) = match options.overrides.c_e {
        Some(v) => (v, Provenance::Override),
        None => (c_e_continuum.max(c_e_lattice), Provenance::RigorousBound),
    };
    let (c_a, c_a_provenance) = match options.overrides.c_a {
        Some(v) => (v, Provenance::Override),
        None => (
            ALGEBRA_FACTOR * c_e_continuum.max(c_e_lattice),
            Provenance::RigorousBound,
        ),
    };
    let u0_norm = problem.u0_norm();
    let r_i = ball_radius_i(c_e, u0_norm);
    let m = estimate_m(problem.g(), r_i, options.seed)?;
    let kernels: Vec<KernelNormReport> = problem
        .kernels()
        .iter()
        .map(|k| KernelNormReport {
            l1: k.l1_norm(),
            laplacian_l1: k.laplacian_l1_norm(),
            w21: k.w21_norm(),
            laplacian_source: k.laplacian_source,
            tail_mass: k.tail_mass,
        })
        .collect();
    let w21: Vec<f64> = kernels.iter().map(|k| k.w21).collect();
    let q = compute_q(problem.operator_norms(), &w21);
    let sigma = compute_sigma(c_a, q, m.value, u0_norm)?;
    let rho = options.rho.or(problem.spec().rho).unwrap_or(1.0);
    let verdict = check_contraction_condition(c_a, m.value, u0_norm, q, rho);
    Ok(ConstantsReport {
        c_e,
        c_e_provenance,
        c_e_continuum,
        c_e_lattice,
        c_a,
        c_a_provenance,
        algebra_derivation: ALGEBRA_DERIVATION.to_string(),
        constants_overridden: options.overrides.c_e.is_some() || options.overrides.c_a.is_some(),
        u0_norm,
        r_i,
        m: m.value,
        m_raw: m.raw,
        m_provenance: m.provenance,
        kernels,
        operator_norms: problem.operator_norms().to_vec(),
        q,
        sigma,
        rho,
        rho_feasible_interval: verdict.rho_feasible_interval,
        verdict,
    })
}
