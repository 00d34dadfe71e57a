//! Problem assembly: kernels, multiplier operators, initial data, and the
//! checks behind the standing assumptions (nontrivial kernels and data,
//! bounded nonzero operators, `g(0) = 0`, `g` not identically zero on `I`).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis;
use crate::exprdsl::{self, laplacian_symbolic, EvalError, Expr, Family, Func, NonlinearitySpec};
use crate::sampling;
use crate::spectral::{
    self, forward_transform, h2_norm_vector, l1_norm, tail_mass_fraction, Grid, MassKind,
    ScalarField, SpectralError, SpectralField, TAIL_MASS_WARNING,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("kernel {component} vanishes identically")]
    TrivialKernel { component: usize },
    #[error("initial data vanish identically in every component")]
    TrivialInitialData,
    #[error("operator {component} has zero norm")]
    ZeroOperator { component: usize },
    #[error("operator {component}: {reason}")]
    InvalidOperator { component: usize, reason: String },
    #[error("kernel {component}: {reason}")]
    InvalidKernel { component: usize, reason: String },
    #[error("{what}: expected {expected} entries, found {found}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("ball radius rho must lie in (0, 1], got {0}")]
    InvalidRho(f64),
    #[error("evaluating {what} at x = {point:?}: {source}")]
    Eval {
        what: String,
        point: Vec<f64>,
        #[source]
        source: EvalError,
    },
    #[error(transparent)]
    Field(#[from] SpectralError),
    #[error("vector field needs at least one component")]
    EmptyVectorField,
}

/// Convolution kernel `K_m`.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// `amplitude · e^{-alpha |x|²}`.
    Gaussian { alpha: f64, amplitude: f64 },
    /// Spatial expression in `x1..xd`.
    Expression(Expr),
    /// Samples on the problem grid.
    Tabulated(Vec<f64>),
}

impl KernelSpec {
    pub fn gaussian(alpha: f64) -> Self {
        KernelSpec::Gaussian {
            alpha,
            amplitude: 1.0,
        }
    }

    /// The builtin Gaussian as an expression, so that it shares the symbolic
    /// Laplacian path with user expressions.
    fn gaussian_expr(alpha: f64, amplitude: f64, d: usize) -> Expr {
        let r2 = (0..d)
            .map(|i| Expr::Pow(Box::new(Expr::Var(Family::X, i)), 2))
            .reduce(|a, b| Expr::Add(Box::new(a), Box::new(b)))
            .expect("d >= 2");
        let arg = Expr::Neg(Box::new(Expr::Mul(
            Box::new(Expr::Num(alpha)),
            Box::new(r2),
        )));
        let g = Expr::Call(Func::Exp, Box::new(arg));
        if amplitude == 1.0 {
            g
        } else {
            Expr::Mul(Box::new(Expr::Num(amplitude)), Box::new(g))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianSource {
    Symbolic,
    Spectral,
}

/// A kernel sampled on the grid together with `ΔK` and the kernel spectrum.
#[derive(Debug, Clone)]
pub struct MaterializedKernel {
    pub values: ScalarField,
    pub laplacian: ScalarField,
    pub laplacian_source: LaplacianSource,
    pub spectrum: SpectralField,
    /// `L¹` mass fraction in the outer shell of the box.
    pub tail_mass: f64,
}

impl MaterializedKernel {
    pub fn l1_norm(&self) -> f64 {
        l1_norm(&self.values)
    }

    pub fn laplacian_l1_norm(&self) -> f64 {
        l1_norm(&self.laplacian)
    }

    /// `‖K‖_{W̃^{2,1}}`.
    pub fn w21_norm(&self) -> f64 {
        spectral::tilde_w21_norm(&self.values, &self.laplacian)
    }
}

fn sample_expr(e: &Expr, grid: Grid, what: &str) -> Result<ScalarField, ModelError> {
    ScalarField::try_from_fn(grid, |x| {
        e.eval(x).map_err(|source| ModelError::Eval {
            what: what.to_string(),
            point: x.to_vec(),
            source,
        })
    })
}

fn materialize_kernel_unchecked(
    spec: &KernelSpec,
    grid: Grid,
    component: usize,
) -> Result<MaterializedKernel, ModelError> {
    let what = format!("kernel {component}");
    let (values, laplacian, source) = match spec {
        KernelSpec::Gaussian { alpha, amplitude } => {
            if !(alpha.is_finite() && *alpha > 0.0 && amplitude.is_finite()) {
                return Err(ModelError::InvalidKernel {
                    component,
                    reason: format!("gaussian needs alpha > 0, got alpha = {alpha}"),
                });
            }
            let e = KernelSpec::gaussian_expr(*alpha, *amplitude, grid.dim());
            let lap = laplacian_symbolic(&e, grid.dim());
            (
                sample_expr(&e, grid, &what)?,
                sample_expr(&lap, grid, &what)?,
                LaplacianSource::Symbolic,
            )
        }
        KernelSpec::Expression(e) => {
            let lap = laplacian_symbolic(e, grid.dim());
            (
                sample_expr(e, grid, &what)?,
                sample_expr(&lap, grid, &what)?,
                LaplacianSource::Symbolic,
            )
        }
        KernelSpec::Tabulated(v) => {
            let f = ScalarField::new(grid, v.clone())?;
            let lap = spectral::laplacian(&f);
            (f, lap, LaplacianSource::Spectral)
        }
    };
    let tail_mass = tail_mass_fraction(&values, MassKind::L1);
    Ok(MaterializedKernel {
        spectrum: forward_transform(&values),
        values,
        laplacian,
        laplacian_source: source,
        tail_mass,
    })
}

/// Samples `K` and `ΔK` (symbolic for builtin and expression kernels,
/// spectral for tabulated ones). Identically zero kernels are rejected.
pub fn materialize_kernel(spec: &KernelSpec, grid: Grid) -> Result<MaterializedKernel, ModelError> {
    let k = materialize_kernel_unchecked(spec, grid, 1)?;
    if k.values.is_zero() {
        return Err(ModelError::TrivialKernel { component: 1 });
    }
    Ok(k)
}

/// Linear operator `T_m`, a real radial Fourier multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum OperatorSpec {
    /// `(1 - Δ)^{-1}`, multiplier `1/(1 + |ξ|²)`.
    InverseHelmholtz,
    /// `alpha · I`.
    ScaledIdentity { alpha: f64 },
    /// `p(|ξ|²)/q(|ξ|²)`, coefficients in ascending powers of `s = |ξ|²`.
    RationalMultiplier { p: Vec<f64>, q: Vec<f64> },
}

fn horner(coeffs: &[f64], s: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
}

impl OperatorSpec {
    /// Multiplier value at `s = |ξ|²`.
    pub fn multiplier(&self, s: f64) -> f64 {
        match self {
            OperatorSpec::InverseHelmholtz => 1.0 / (1.0 + s),
            OperatorSpec::ScaledIdentity { alpha } => *alpha,
            OperatorSpec::RationalMultiplier { p, q } => horner(p, s) / horner(q, s),
        }
    }

    /// Checks the multiplier is well defined on the lattice of `grid`. For
    /// rational multipliers the denominator must be positive at `s = 0` and at
    /// every lattice frequency.
    pub fn validate(&self, grid: &Grid) -> Result<(), String> {
        match self {
            OperatorSpec::InverseHelmholtz => Ok(()),
            OperatorSpec::ScaledIdentity { alpha } => {
                if alpha.is_finite() {
                    Ok(())
                } else {
                    Err(format!("scale {alpha} is not finite"))
                }
            }
            OperatorSpec::RationalMultiplier { p, q } => {
                if p.iter().chain(q).any(|c| !c.is_finite()) {
                    return Err("non-finite coefficient".into());
                }
                if q.is_empty() {
                    return Err("empty denominator".into());
                }
                let table = grid.frequency_sq_table();
                let q_min = std::iter::once(0.0)
                    .chain(table)
                    .map(|s| horner(q, s))
                    .fold(f64::INFINITY, f64::min);
                if q_min > 0.0 {
                    Ok(())
                } else {
                    Err(format!(
                        "denominator is not positive on the lattice (min {q_min})"
                    ))
                }
            }
        }
    }
}

pub fn apply_operator(spec: &OperatorSpec, f: &ScalarField) -> ScalarField {
    match spec {
        OperatorSpec::ScaledIdentity { alpha } => f.scaled(*alpha),
        _ => spectral::apply_multiplier(f, |s| spec.multiplier(s)),
    }
}

/// `sup |m(ξ)|` over the frequency lattice. Since the multiplier commutes with
/// the `H²` weight `1 + |ξ|⁴`, this is the exact `H² → H²` norm.
pub fn operator_norm(spec: &OperatorSpec, grid: &Grid) -> Result<f64, ModelError> {
    spec.validate(grid)
        .map_err(|reason| ModelError::InvalidOperator {
            component: 1,
            reason,
        })?;
    let norm = operator_norm_unchecked(spec, grid);
    if norm > 0.0 {
        Ok(norm)
    } else {
        Err(ModelError::ZeroOperator { component: 1 })
    }
}

fn operator_norm_unchecked(spec: &OperatorSpec, grid: &Grid) -> f64 {
    grid.frequency_sq_table()
        .into_iter()
        .map(|s| spec.multiplier(s).abs())
        .fold(0.0, f64::max)
}

/// N sampled component functions on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self, ModelError> {
        let first = components.first().ok_or(ModelError::EmptyVectorField)?;
        if components.iter().any(|c| c.grid() != first.grid()) {
            return Err(SpectralError::GridMismatch.into());
        }
        Ok(Self { components })
    }

    pub fn zeros(grid: Grid, n: usize) -> Self {
        Self {
            components: vec![ScalarField::zeros(grid); n.max(1)],
        }
    }

    pub fn grid(&self) -> &Grid {
        self.components[0].grid()
    }

    /// Number of components `N`.
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn component(&self, m: usize) -> &ScalarField {
        &self.components[m]
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(ScalarField::is_zero)
    }

    fn zip(
        &self,
        other: &Self,
        f: impl Fn(&ScalarField, &ScalarField) -> Result<ScalarField, SpectralError>,
    ) -> Result<Self, ModelError> {
        if self.len() != other.len() {
            return Err(ModelError::CountMismatch {
                what: "vector field components",
                expected: self.len(),
                found: other.len(),
            });
        }
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| f(a, b))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { components })
    }

    pub fn add(&self, other: &Self) -> Result<Self, ModelError> {
        self.zip(other, ScalarField::add)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, ModelError> {
        self.zip(other, ScalarField::sub)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            components: self.components.iter().map(|c| c.scaled(a)).collect(),
        }
    }

    /// Samples of the vector `u(x)` at flat grid index `i`.
    pub fn point_values(&self, i: usize) -> Vec<f64> {
        self.components.iter().map(|c| c.values()[i]).collect()
    }

    /// `‖u‖_{H²(R^d, R^N)}`.
    pub fn h2_norm(&self) -> f64 {
        h2_norm_vector(self)
    }
}

/// One component of the initial data `u0`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Expression(Expr),
    Tabulated(Vec<f64>),
}

/// Full problem description before sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub grid: Grid,
    pub kernels: Vec<KernelSpec>,
    pub operators: Vec<OperatorSpec>,
    pub g: NonlinearitySpec,
    pub u0: Vec<InitialData>,
    /// Ball radius; `None` selects the largest admissible radius, 1.
    pub rho: Option<f64>,
}

impl ProblemSpec {
    /// Checks the structural invariants: one kernel, operator and initial
    /// datum per component of `g`, spatial expressions within `d` variables,
    /// tabulated data of grid length, `rho ∈ (0, 1]`.
    pub fn new(
        grid: Grid,
        kernels: Vec<KernelSpec>,
        operators: Vec<OperatorSpec>,
        g: NonlinearitySpec,
        u0: Vec<InitialData>,
        rho: Option<f64>,
    ) -> Result<Self, ModelError> {
        let n = g.arity();
        for (what, found) in [
            ("kernels", kernels.len()),
            ("operators", operators.len()),
            ("u0", u0.len()),
        ] {
            if found != n {
                return Err(ModelError::CountMismatch {
                    what,
                    expected: n,
                    found,
                });
            }
        }
        if let Some(r) = rho {
            if !(r > 0.0 && r <= 1.0) {
                return Err(ModelError::InvalidRho(r));
            }
        }
        for (m, k) in kernels.iter().enumerate() {
            let bad = match k {
                KernelSpec::Expression(e) if e.min_arity() > grid.dim() => {
                    Some("expression uses more coordinates than the grid has".to_string())
                }
                KernelSpec::Tabulated(v) if v.len() != grid.len() => {
                    Some(format!("{} samples for a grid of {}", v.len(), grid.len()))
                }
                KernelSpec::Gaussian { alpha, amplitude }
                    if !(alpha.is_finite() && *alpha > 0.0 && amplitude.is_finite()) =>
                {
                    Some(format!("gaussian needs alpha > 0, got {alpha}"))
                }
                _ => None,
            };
            if let Some(reason) = bad {
                return Err(ModelError::InvalidKernel {
                    component: m + 1,
                    reason,
                });
            }
        }
        for (m, op) in operators.iter().enumerate() {
            op.validate(&grid)
                .map_err(|reason| ModelError::InvalidOperator {
                    component: m + 1,
                    reason,
                })?;
        }
        for u in &u0 {
            if let InitialData::Tabulated(v) = u {
                if v.len() != grid.len() {
                    return Err(ModelError::CountMismatch {
                        what: "tabulated u0 samples",
                        expected: grid.len(),
                        found: v.len(),
                    });
                }
            }
        }
        Ok(Self {
            grid,
            kernels,
            operators,
            g,
            u0,
            rho,
        })
    }

    pub fn components(&self) -> usize {
        self.g.arity()
    }

    /// The same problem on a different grid.
    pub fn with_grid(&self, grid: Grid) -> Result<Self, ModelError> {
        Self::new(
            grid,
            self.kernels.clone(),
            self.operators.clone(),
            self.g.clone(),
            self.u0.clone(),
            self.rho,
        )
    }

    /// The same problem with a different nonlinearity of equal arity.
    pub fn with_nonlinearity(&self, g: NonlinearitySpec) -> Result<Self, ModelError> {
        Self::new(
            self.grid,
            self.kernels.clone(),
            self.operators.clone(),
            g,
            self.u0.clone(),
            self.rho,
        )
    }
}

fn materialize_u0_unchecked(spec: &ProblemSpec) -> Result<VectorField, ModelError> {
    let comps = spec
        .u0
        .iter()
        .enumerate()
        .map(|(m, u)| match u {
            InitialData::Expression(e) => {
                sample_expr(e, spec.grid, &format!("u0 component {}", m + 1))
            }
            InitialData::Tabulated(v) => Ok(ScalarField::new(spec.grid, v.clone())?),
        })
        .collect::<Result<Vec<_>, _>>()?;
    VectorField::new(comps)
}

/// Samples `u0`; rejects data vanishing in every component.
pub fn materialize_u0(spec: &ProblemSpec) -> Result<VectorField, ModelError> {
    let u0 = materialize_u0_unchecked(spec)?;
    if u0.is_zero() {
        return Err(ModelError::TrivialInitialData);
    }
    Ok(u0)
}

/// A problem with every ingredient sampled on its grid.
///
/// Assembly does not enforce nontriviality; that is the job of
/// [`validate_assumptions`], so that degenerate problems can still be
/// inspected.
#[derive(Debug, Clone)]
pub struct Problem {
    spec: ProblemSpec,
    kernels: Vec<MaterializedKernel>,
    operator_norms: Vec<f64>,
    u0: VectorField,
    u0_norm: f64,
}

impl Problem {
    pub fn assemble(spec: &ProblemSpec) -> Result<Self, ModelError> {
        let kernels = spec
            .kernels
            .iter()
            .enumerate()
            .map(|(m, k)| materialize_kernel_unchecked(k, spec.grid, m + 1))
            .collect::<Result<Vec<_>, _>>()?;
        let operator_norms = spec
            .operators
            .iter()
            .map(|op| operator_norm_unchecked(op, &spec.grid))
            .collect();
        let u0 = materialize_u0_unchecked(spec)?;
        let u0_norm = u0.h2_norm();
        Ok(Self {
            spec: spec.clone(),
            kernels,
            operator_norms,
            u0,
            u0_norm,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Grid {
        &self.spec.grid
    }

    pub fn components(&self) -> usize {
        self.spec.components()
    }

    pub fn g(&self) -> &NonlinearitySpec {
        &self.spec.g
    }

    pub fn kernels(&self) -> &[MaterializedKernel] {
        &self.kernels
    }

    pub fn operators(&self) -> &[OperatorSpec] {
        &self.spec.operators
    }

    pub fn operator_norms(&self) -> &[f64] {
        &self.operator_norms
    }

    pub fn u0(&self) -> &VectorField {
        &self.u0
    }

    /// `‖u0‖_{H²(R^d, R^N)}`.
    pub fn u0_norm(&self) -> f64 {
        self.u0_norm
    }

    /// Same sampled kernels and data, different nonlinearity.
    pub fn with_nonlinearity(&self, g: NonlinearitySpec) -> Result<Self, ModelError> {
        let spec = self.spec.with_nonlinearity(g)?;
        Ok(Self {
            spec,
            ..self.clone()
        })
    }

    /// Diagnostics that do not invalidate the problem: tail mass above the
    /// threshold and kernels whose `ΔK` is only spectrally accurate.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (m, k) in self.kernels.iter().enumerate() {
            if k.tail_mass > TAIL_MASS_WARNING {
                out.push(format!(
                    "tail mass: kernel {} carries {:.3e} of its L1 mass in the outer 10% shell",
                    m + 1,
                    k.tail_mass
                ));
            }
            if k.laplacian_source == LaplacianSource::Spectral {
                out.push(format!(
                    "tabulated kernel {}: Laplacian computed spectrally, accurate only for kernels resolved by the grid",
                    m + 1
                ));
            }
        }
        for (m, c) in self.u0.components().iter().enumerate() {
            let t = tail_mass_fraction(c, MassKind::L2);
            if t > TAIL_MASS_WARNING {
                out.push(format!(
                    "tail mass: u0 component {} carries {:.3e} of its L2 mass in the outer 10% shell",
                    m + 1,
                    t
                ));
            }
        }
        out
    }
}

/// One failed assumption.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    KernelTrivial { component: usize },
    InitialDataTrivial,
    GNonzeroAtOrigin { component: usize, value: f64 },
    GVanishesIdentically,
    OperatorNormZero { component: usize },
    GEvaluationError { message: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::KernelTrivial { component } => write!(f, "kernel {component} trivial"),
            Violation::InitialDataTrivial => write!(f, "u0 vanishes identically"),
            Violation::GNonzeroAtOrigin { component, value } => {
                write!(f, "g(0) ≠ 0: g{component}(0) = {value}")
            }
            Violation::GVanishesIdentically => write!(f, "g vanishes identically"),
            Violation::OperatorNormZero { component } => {
                write!(f, "operator {component} has zero norm")
            }
            Violation::GEvaluationError { message } => {
                write!(f, "g cannot be evaluated on I: {message}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn messages(&self) -> Vec<String> {
        self.violations.iter().map(|v| v.to_string()).collect()
    }
}

/// Lists every violated assumption. `g` is probed for nontriviality on
/// quasi-random points of the ball `I` of radius `c_e(‖u0‖ + 1)`.
pub fn validate_assumptions(problem: &Problem) -> ValidationReport {
    let mut violations = Vec::new();
    for (m, k) in problem.kernels().iter().enumerate() {
        if k.values.is_zero() {
            violations.push(Violation::KernelTrivial { component: m + 1 });
        }
    }
    if problem.u0().is_zero() {
        violations.push(Violation::InitialDataTrivial);
    }
    for (m, value) in exprdsl::nonzero_at_origin(problem.g()) {
        violations.push(Violation::GNonzeroAtOrigin {
            component: m + 1,
            value,
        });
    }
    for (m, &norm) in problem.operator_norms().iter().enumerate() {
        if norm <= 0.0 {
            violations.push(Violation::OperatorNormZero { component: m + 1 });
        }
    }
    let r_i = analysis::ball_radius_i(
        analysis::effective_embedding_constant(problem.grid()),
        problem.u0_norm(),
    );
    match g_vanishes_on_ball(problem.g(), r_i) {
        Ok(true) => violations.push(Violation::GVanishesIdentically),
        Ok(false) => {}
        Err(e) => violations.push(Violation::GEvaluationError {
            message: e.to_string(),
        }),
    }
    ValidationReport { violations }
}

fn g_vanishes_on_ball(g: &NonlinearitySpec, radius: f64) -> Result<bool, EvalError> {
    let n = g.arity();
    if g.is_polynomial() {
        return Ok(g.components().iter().all(|c| {
            c.to_polynomial(n)
                .is_some_and(|p| p.terms().next().is_none())
        }));
    }
    for z in sampling::ball_points(n, radius, 256 * n, 64 * n, 0) {
        if g.eval(&z)?.iter().any(|&v| v != 0.0) {
            return Ok(false);
        }
    }
    Ok(true)
}
