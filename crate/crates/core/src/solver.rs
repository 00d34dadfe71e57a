//! The perturbative map `t_g`, Picard iteration and the continuity experiment.
//!
//! Writing `u = u0 + v`, the system becomes the fixed-point problem
//!
//! ```text
//! v_m = t_g(v)_m = [T_m (u0_m + v_m)] · (K_m * g_m(u0 + v))
//! ```
//!
//! on the ball `B_ρ = { v : ‖v‖_{H²} <= ρ }`.

use std::fmt::Write as _;
use std::io;

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{self, AnalysisError, AnalysisOptions, ConstantsReport};
use crate::exprdsl::{EvalError, NonlinearitySpec};
use crate::model::{apply_operator, ModelError, Problem, VectorField};
use crate::spectral::{convolve_spectrum, ScalarField, SpectralError};

/// Default iteration cap.
pub const DEFAULT_MAX_ITER: usize = 200;

/// Relative slack allowed on `‖u^k‖ <= ρ` before declaring an escape.
const BALL_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("no convergence after {iterations} iterations: last step {last_delta:e}, residual {residual:e}")]
    NonConvergence {
        iterations: usize,
        last_delta: f64,
        residual: f64,
        trace: IterationTrace,
    },
    #[error("iterate {iteration} left the ball: norm {norm} > rho = {rho} on a certified problem")]
    EscapedBall {
        iteration: usize,
        norm: f64,
        rho: f64,
    },
    #[error("the problem is not certified; pass best-effort to iterate anyway")]
    Uncertified,
    #[error("evaluating g at grid point {index} (u = {point:?}): {source}")]
    Eval {
        index: usize,
        point: Vec<f64>,
        #[source]
        source: EvalError,
    },
    #[error("{0}")]
    Precondition(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

impl From<SpectralError> for SolveError {
    fn from(e: SpectralError) -> Self {
        SolveError::Model(e.into())
    }
}

fn check_shape(problem: &Problem, v: &VectorField) -> Result<(), SolveError> {
    if v.grid() != problem.grid() {
        return Err(SpectralError::GridMismatch.into());
    }
    if v.len() != problem.components() {
        return Err(ModelError::CountMismatch {
            what: "vector field components",
            expected: problem.components(),
            found: v.len(),
        }
        .into());
    }
    Ok(())
}

/// `g(w)` sampled pointwise, one field per component.
fn eval_g_pointwise(g: &NonlinearitySpec, w: &VectorField) -> Result<Vec<ScalarField>, SolveError> {
    let grid = *w.grid();
    let n = w.len();
    let mut out = vec![vec![0.0; grid.len()]; n];
    for i in 0..grid.len() {
        let z = w.point_values(i);
        let values = g.eval(&z).map_err(|source| SolveError::Eval {
            index: i,
            point: z.clone(),
            source,
        })?;
        for (m, v) in values.into_iter().enumerate() {
            out[m][i] = v;
        }
    }
    out.into_iter()
        .map(|values| ScalarField::new(grid, values).map_err(SolveError::from))
        .collect()
}

/// `[T_m w_m] · (K_m * g_m(w))` for every `m`.
fn integral_term(problem: &Problem, w: &VectorField) -> Result<VectorField, SolveError> {
    let gw = eval_g_pointwise(problem.g(), w)?;
    let comps = gw
        .iter()
        .enumerate()
        .map(|(m, gm)| {
            let conv = convolve_spectrum(&problem.kernels()[m].spectrum, gm)?;
            let tw = apply_operator(&problem.operators()[m], w.component(m));
            Ok(tw.mul(&conv)?)
        })
        .collect::<Result<Vec<_>, SolveError>>()?;
    Ok(VectorField::new(comps)?)
}

/// `t_g(v)`.
pub fn apply_map_tg(problem: &Problem, v: &VectorField) -> Result<VectorField, SolveError> {
    check_shape(problem, v)?;
    let w = problem.u0().add(v)?;
    integral_term(problem, &w)
}

/// `u = u0 + u_p`.
pub fn assemble_solution(u0: &VectorField, u_p: &VectorField) -> Result<VectorField, ModelError> {
    u0.add(u_p)
}

/// `(Σ_m ‖u_m - u0_m - [T_m u_m] · (K_m * g_m(u))‖²_{H²})^{1/2}`, computed on
/// the original system rather than the perturbative one.
pub fn residual_original_system(problem: &Problem, u: &VectorField) -> Result<f64, SolveError> {
    check_shape(problem, u)?;
    let rhs = integral_term(problem, u)?;
    let r = u.sub(problem.u0())?.sub(&rhs)?;
    Ok(r.h2_norm())
}

/// One Picard step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub k: usize,
    /// `‖u^k‖`.
    pub norm: f64,
    /// `δ_k = ‖u^k - u^{k-1}‖`.
    pub delta: f64,
    /// `δ_k / δ_{k-1}`, from the second step on.
    pub ratio: Option<f64>,
    /// `σ^k/(1-σ) δ_1`, when `σ < 1`.
    pub apost_bound: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IterationTrace {
    pub rows: Vec<TraceRow>,
}

pub const TRACE_HEADER: &str = "k,norm,delta,ratio,apost_bound";

fn fmt17(x: f64) -> String {
    format!("{:.16e}", x)
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.delta).collect()
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.ratio).collect()
    }

    pub fn max_ratio(&self) -> Option<f64> {
        self.ratios().into_iter().reduce(f64::max)
    }

    /// CSV text with 17 significant digits; missing values are empty fields.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(TRACE_HEADER);
        s.push('\n');
        for r in &self.rows {
            let opt = |v: Option<f64>| v.map(fmt17).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.k,
                fmt17(r.norm),
                fmt17(r.delta),
                opt(r.ratio),
                opt(r.apost_bound)
            );
        }
        s
    }

    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }
}

/// `σ^k/(1-σ) δ_1` for `k = 1..=steps`.
pub fn a_posteriori_series(delta1: f64, sigma: f64, steps: usize) -> Result<Vec<f64>, SolveError> {
    if !(sigma < 1.0) || sigma < 0.0 {
        return Err(SolveError::Precondition(format!(
            "a-posteriori bound needs 0 <= sigma < 1, got {sigma}"
        )));
    }
    Ok((1..=steps)
        .map(|k| sigma.powi(k as i32) / (1.0 - sigma) * delta1)
        .collect())
}

/// The bound series for every row of `trace`.
pub fn a_posteriori_bound(trace: &IterationTrace, sigma: f64) -> Result<Vec<f64>, SolveError> {
    let delta1 = trace.rows.first().map(|r| r.delta).unwrap_or(0.0);
    a_posteriori_series(delta1, sigma, trace.len())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// `None` selects `1e-10 · max(1, ‖u0‖)`.
    pub tol: Option<f64>,
    pub max_iter: usize,
    /// Iterate even when the certificate fails.
    pub best_effort: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: None,
            max_iter: DEFAULT_MAX_ITER,
            best_effort: false,
        }
    }
}

pub fn default_tolerance(u0_norm: f64) -> f64 {
    1e-10 * u0_norm.max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub u_p: VectorField,
    pub u: VectorField,
    /// `‖u_p - t_g(u_p)‖`.
    pub residual: f64,
    pub iterations: usize,
    pub certified: bool,
    pub tol: f64,
}

/// Picard iteration from `u⁰ = 0`.
pub fn picard_solve(
    problem: &Problem,
    report: &ConstantsReport,
    options: &SolveOptions,
) -> Result<(Solution, IterationTrace), SolveError> {
    let start = VectorField::zeros(*problem.grid(), problem.components());
    picard_solve_from(problem, report, options, start)
}

/// Picard iteration from an arbitrary starting point.
pub fn picard_solve_from(
    problem: &Problem,
    report: &ConstantsReport,
    options: &SolveOptions,
    start: VectorField,
) -> Result<(Solution, IterationTrace), SolveError> {
    check_shape(problem, &start)?;
    let certified = report.certified();
    if !certified && !options.best_effort {
        return Err(SolveError::Uncertified);
    }
    let tol = options
        .tol
        .unwrap_or_else(|| default_tolerance(problem.u0_norm()));
    if !(tol > 0.0) {
        return Err(SolveError::Precondition(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if options.max_iter == 0 {
        return Err(SolveError::Precondition(
            "max_iter must be at least 1".into(),
        ));
    }
    let sigma = report.sigma;
    let rho = report.rho;
    let mut trace = IterationTrace::default();
    let mut u = start;
    let mut k = 0usize;
    loop {
        let w = apply_map_tg(problem, &u)?;
        let delta = w.sub(&u)?.h2_norm();
        if delta <= tol {
            let u_full = assemble_solution(problem.u0(), &u)?;
            let solution = Solution {
                u_p: u,
                u: u_full,
                residual: delta,
                iterations: k,
                certified,
                tol,
            };
            return Ok((solution, trace));
        }
        if k == options.max_iter || !delta.is_finite() {
            let last_delta = trace.rows.last().map(|r| r.delta).unwrap_or(delta);
            return Err(SolveError::NonConvergence {
                iterations: k,
                last_delta,
                residual: delta,
                trace,
            });
        }
        k += 1;
        let norm = w.h2_norm();
        if certified && norm > rho * (1.0 + BALL_SLACK) {
            return Err(SolveError::EscapedBall {
                iteration: k,
                norm,
                rho,
            });
        }
        let ratio = trace.rows.last().map(|r| delta / r.delta);
        let delta1 = trace.rows.first().map(|r| r.delta).unwrap_or(delta);
        let apost_bound = (sigma < 1.0).then(|| sigma.powi(k as i32) / (1.0 - sigma) * delta1);
        trace.rows.push(TraceRow {
            k,
            norm,
            delta,
            ratio,
            apost_bound,
        });
        u = w;
    }
}

/// Outcome of solving with two nonlinearities on the same data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityReport {
    /// `‖u_1 - u_2‖_{H²}`.
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
    /// `max(M_1, M_2)`.
    pub m_joint: f64,
    pub sigma_joint: f64,
    /// `‖g_1 - g_2‖_{C¹(I)}`.
    pub g_distance: f64,
    pub g_distance_provenance: analysis::Provenance,
    pub iterations: [usize; 2],
    pub residuals: [f64; 2],
    pub tol: f64,
}

/// Solves with `g1` and `g2` and compares the solution distance with the
/// continuity bound, using the joint `M = max(M_1, M_2)` for both sides.
pub fn continuity_experiment(
    problem: &Problem,
    g1: &NonlinearitySpec,
    g2: &NonlinearitySpec,
    tol: Option<f64>,
    options: &AnalysisOptions,
) -> Result<ContinuityReport, SolveError> {
    let p1 = problem.with_nonlinearity(g1.clone())?;
    let p2 = problem.with_nonlinearity(g2.clone())?;
    let r1 = analysis::analyze(&p1, options)?;
    let r2 = analysis::analyze(&p2, options)?;
    let joint = if r1.m >= r2.m {
        analysis::C1Estimate {
            value: r1.m,
            raw: r1.m_raw,
            provenance: r1.m_provenance,
        }
    } else {
        analysis::C1Estimate {
            value: r2.m,
            raw: r2.m_raw,
            provenance: r2.m_provenance,
        }
    };
    let r1 = r1.with_m(joint)?;
    let r2 = r2.with_m(joint)?;
    if !r1.certified() || !r2.certified() {
        return Err(SolveError::Uncertified);
    }
    let solve_options = SolveOptions {
        tol,
        ..SolveOptions::default()
    };
    let (s1, s2) = std::thread::scope(|scope| {
        let h = scope.spawn(|| picard_solve(&p2, &r2, &solve_options));
        let s1 = picard_solve(&p1, &r1, &solve_options);
        (s1, h.join().expect("solver thread panicked"))
    });
    let (s1, _) = s1?;
    let (s2, _) = s2?;
    let measured = s1.u.sub(&s2.u)?.h2_norm();
    let distance = analysis::c1_distance(g1, g2, r1.r_i, options.seed)?;
    let bound =
        analysis::continuity_bound(r1.sigma, joint.value, problem.u0_norm(), distance.value)?;
    let tol = s1.tol.max(s2.tol);
    Ok(ContinuityReport {
        measured,
        bound,
        pass: measured <= bound + 2.0 * tol,
        m_joint: joint.value,
        sigma_joint: r1.sigma,
        g_distance: distance.value,
        g_distance_provenance: distance.provenance,
        iterations: [s1.iterations, s2.iterations],
        residuals: [s1.residual, s2.residual],
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprdsl::{parse, Family};
    use crate::model::{InitialData, KernelSpec, OperatorSpec, ProblemSpec};
    use crate::spectral::Grid;

    fn problem(g: &[&str], amplitude: f64, n: usize) -> Problem {
        let grid = Grid::new(2, n, 6.0).unwrap();
        let comps = g.len();
        let u0 = (0..comps)
            .map(|_| InitialData::Expression(parse("exp(-x1^2-x2^2)", 2, Family::X).unwrap()))
            .collect();
        let spec = ProblemSpec::new(
            grid,
            vec![
                KernelSpec::Gaussian {
                    alpha: 1.0,
                    amplitude
                };
                comps
            ],
            vec![OperatorSpec::InverseHelmholtz; comps],
            NonlinearitySpec::parse(g).unwrap(),
            u0,
            None,
        )
        .unwrap();
        Problem::assemble(&spec).unwrap()
    }

    fn report(p: &Problem) -> ConstantsReport {
        analysis::analyze(p, &AnalysisOptions::default()).unwrap()
    }

    #[test]
    fn zero_integrand_gives_zero_map() {
        let p = problem(&["0*z1"], 1.0, 16);
        let v = VectorField::zeros(*p.grid(), 1);
        assert!(apply_map_tg(&p, &v).unwrap().is_zero());
        let u = p.u0().clone();
        assert_eq!(residual_original_system(&p, &u).unwrap(), 0.0);
    }

    #[test]
    fn zero_kernel_gives_zero_map() {
        let p = problem(&["z1^2"], 0.0, 16);
        let v = VectorField::zeros(*p.grid(), 1);
        assert!(apply_map_tg(&p, &v).unwrap().is_zero());
    }

    #[test]
    fn non_solution_has_positive_residual() {
        let p = problem(&["z1^2"], 1.0, 16);
        assert!(residual_original_system(&p, p.u0()).unwrap() > 0.0);
    }

    #[test]
    fn map_rejects_wrong_shapes() {
        let p = problem(&["z1^2"], 1.0, 16);
        let v = VectorField::zeros(Grid::new(2, 8, 6.0).unwrap(), 1);
        assert!(apply_map_tg(&p, &v).is_err());
        let v = VectorField::zeros(*p.grid(), 2);
        assert!(apply_map_tg(&p, &v).is_err());
    }

    #[test]
    fn map_reports_domain_errors() {
        let p = problem(&["sqrt(z1) - sqrt(z1)"], 1.0, 16);
        let v = VectorField::zeros(*p.grid(), 1).scaled(1.0);
        // u0 > 0 everywhere, so shift it negative
        let shift = VectorField::new(vec![ScalarField::constant(*p.grid(), -2.0)]).unwrap();
        assert!(apply_map_tg(&p, &v).is_ok());
        assert!(matches!(
            apply_map_tg(&p, &shift),
            Err(SolveError::Eval { .. })
        ));
    }

    #[test]
    fn assemble_solution_trivial_cases() {
        let p = problem(&["z1^2"], 1.0, 16);
        let zero = VectorField::zeros(*p.grid(), 1);
        assert_eq!(assemble_solution(p.u0(), &zero).unwrap(), *p.u0());
        let v = p.u0().scaled(0.5);
        assert_eq!(assemble_solution(&zero, &v).unwrap(), v);
    }

    #[test]
    fn geometric_series() {
        let b = a_posteriori_series(1.0, 0.5, 4).unwrap();
        assert_eq!(b, vec![1.0, 0.5, 0.25, 0.125]);
        assert!(a_posteriori_series(1.0, 1.0, 4).is_err());
    }

    #[test]
    fn certified_small_problem_converges() {
        let p = problem(&["z1^2"], 1e-4, 32);
        let r = report(&p);
        assert!(r.certified(), "sigma = {}", r.sigma);
        let (sol, trace) = picard_solve(&p, &r, &SolveOptions::default()).unwrap();
        assert!(sol.residual <= sol.tol);
        assert!(sol.certified);
        assert!(sol.u_p.h2_norm() <= r.rho);
        for ratio in trace.ratios() {
            assert!(ratio <= r.sigma + 1e-9);
        }
        let res = residual_original_system(&p, &sol.u).unwrap();
        assert!(res <= 10.0 * sol.tol, "{res}");
    }

    #[test]
    fn two_component_system_converges() {
        let p = problem(&["z1*z2", "z1^2"], 2e-5, 16);
        let r = report(&p);
        assert!(r.certified());
        let (sol, _) = picard_solve(&p, &r, &SolveOptions::default()).unwrap();
        assert!(residual_original_system(&p, &sol.u).unwrap() <= 10.0 * sol.tol);
    }

    #[test]
    fn uncertified_requires_best_effort() {
        let p = problem(&["z1^2"], 50.0, 16);
        let r = report(&p);
        assert!(!r.certified());
        assert_eq!(
            picard_solve(&p, &r, &SolveOptions::default()).unwrap_err(),
            SolveError::Uncertified
        );
        let opts = SolveOptions {
            best_effort: true,
            max_iter: 30,
            ..SolveOptions::default()
        };
        assert!(matches!(
            picard_solve(&p, &r, &opts),
            Err(SolveError::NonConvergence { .. })
        ));
    }

    #[test]
    fn max_iter_guard_carries_first_step() {
        let p = problem(&["z1^2"], 1e-4, 16);
        let r = report(&p);
        let opts = SolveOptions {
            tol: Some(1e-300),
            max_iter: 1,
            best_effort: false,
        };
        match picard_solve(&p, &r, &opts).unwrap_err() {
            SolveError::NonConvergence {
                iterations,
                last_delta,
                trace,
                ..
            } => {
                assert_eq!(iterations, 1);
                assert_eq!(last_delta, trace.rows[0].delta);
                assert!(last_delta > 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn trace_csv_format() {
        let trace = IterationTrace {
            rows: vec![
                TraceRow {
                    k: 1,
                    norm: 0.5,
                    delta: 0.5,
                    ratio: None,
                    apost_bound: Some(1.0),
                },
                TraceRow {
                    k: 2,
                    norm: 0.6,
                    delta: 0.1,
                    ratio: Some(0.2),
                    apost_bound: None,
                },
            ],
        };
        let csv = trace.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], TRACE_HEADER);
        assert_eq!(
            lines[1],
            "1,5.0000000000000000e-1,5.0000000000000000e-1,,1.0000000000000000e0"
        );
        let fields: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(fields[4], "");
        assert_eq!(fields[3].parse::<f64>().unwrap(), 0.2);
        assert_eq!(fields[1].parse::<f64>().unwrap(), 0.6);
    }

    #[test]
    fn continuity_identical_nonlinearities() {
        let p = problem(&["z1^2"], 1e-4, 16);
        let g = p.g().clone();
        let c = continuity_experiment(&p, &g, &g, None, &AnalysisOptions::default()).unwrap();
        assert!(c.measured <= 2.0 * c.tol);
        assert_eq!(c.g_distance, 0.0);
        assert!(c.pass);
    }
}
