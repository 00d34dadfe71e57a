use std::path::{Path, PathBuf};

use qie_core::analysis::{self, AnalysisOptions};
use qie_core::model::{validate_assumptions, Problem};
use qie_core::oracle::{self, OracleBudget};
use qie_core::solver::{self, SolveError, SolveOptions};
use qie_core::spectral::{convolve, sup_norm, ScalarField};
use qie_core::VectorField;

use crate::file::{load_nonlinearity, load_problem, InputError};
use crate::report::{
    OracleCheck, OracleSummary, RunReport, SolveSummary, Status, ValidationSummary,
};

/// Samples for the dense sup-norm oracle.
pub const DENSE_SAMPLES: usize = 1_000_000;
/// Random points for the gradient oracle.
pub const GRADIENT_POINTS: usize = 100;

pub const TOL_CONVOLUTION: f64 = 1e-10;
pub const TOL_MAP: f64 = 1e-9;
pub const TOL_GRADIENT: f64 = 1e-6;
pub const TOL_SAMPLED_M: f64 = 0.02;

/// Outcome of a command: the report (absent on input errors) and the exit
/// code.
pub struct Outcome {
    pub report: Option<RunReport>,
    pub status: Status,
    pub message: Option<String>,
}

impl Outcome {
    fn input_error(e: impl std::fmt::Display) -> Self {
        Self {
            report: None,
            status: Status::InputError,
            message: Some(e.to_string()),
        }
    }

    fn done(report: RunReport) -> Self {
        Self {
            status: report.status,
            report: Some(report),
            message: None,
        }
    }
}

struct Checked {
    problem: Problem,
    report: RunReport,
    options: AnalysisOptions,
}

/// Loads, validates and analyzes. `Err` carries an input error.
fn check_stage(command: &'static str, file: &Path, seed: u64) -> Result<Checked, InputError> {
    let loaded = load_problem(file)?;
    let problem = Problem::assemble(&loaded.spec)?;
    let mut report = RunReport::new(command, loaded.digest.clone(), seed);
    report.warnings.extend(problem.warnings());
    let validation = validate_assumptions(&problem);
    let valid = validation.is_valid();
    report.validation = Some(ValidationSummary::from(validation));
    let options = AnalysisOptions {
        seed,
        rho: None,
        overrides: loaded.overrides,
    };
    match analysis::analyze(&problem, &options) {
        Ok(c) => {
            let pass = c.verdict.contraction();
            report.set_constants(c);
            if !valid || !pass {
                report.set_status(Status::HypothesisFailure);
            }
        }
        Err(e) => {
            report.error = Some(format!("constants unavailable: {e}"));
            report.set_status(Status::HypothesisFailure);
        }
    }
    Ok(Checked {
        problem,
        report,
        options,
    })
}

pub fn cmd_check(file: &Path, seed: u64) -> Outcome {
    match check_stage("check", file, seed) {
        Ok(c) => Outcome::done(c.report),
        Err(e) => Outcome::input_error(e),
    }
}

pub struct SolveArgs {
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub trace: Option<PathBuf>,
    pub best_effort: bool,
    pub seed: u64,
}

pub fn cmd_solve(file: &Path, args: &SolveArgs) -> Outcome {
    let Checked {
        problem,
        mut report,
        ..
    } = match check_stage("solve", file, args.seed) {
        Ok(c) => c,
        Err(e) => return Outcome::input_error(e),
    };
    if let Some(t) = args.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Outcome::input_error(format!("--tol must be positive, got {t}"));
        }
    }
    if args.max_iter == 0 {
        return Outcome::input_error("--max-iter must be at least 1");
    }
    let valid = report.validation.as_ref().is_some_and(|v| v.valid);
    let Some(constants) = report.constants.clone() else {
        return Outcome::done(report);
    };
    if !valid || (!report.certified && !args.best_effort) {
        report.set_status(Status::HypothesisFailure);
        if report.error.is_none() {
            report.error = Some(if valid {
                "problem is not certified; rerun with --best-effort to iterate anyway".into()
            } else {
                "standing assumptions violated".into()
            });
        }
        return Outcome::done(report);
    }
    let options = SolveOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        best_effort: args.best_effort,
    };
    let tol = args
        .tol
        .unwrap_or_else(|| solver::default_tolerance(problem.u0_norm()));
    let mut summary = SolveSummary {
        converged: false,
        iterations: 0,
        residual: f64::NAN,
        tol,
        max_iter: args.max_iter,
        certified: report.certified,
        best_effort: args.best_effort,
        u_p_norm: None,
        u_norm: None,
        original_residual: None,
        last_delta: None,
        max_ratio: None,
        diagnostic: None,
    };
    let mut status = Status::Pass;
    let trace = match solver::picard_solve(&problem, &constants, &options) {
        Ok((sol, trace)) => {
            summary.converged = true;
            summary.iterations = sol.iterations;
            summary.residual = sol.residual;
            summary.u_p_norm = Some(sol.u_p.h2_norm());
            summary.u_norm = Some(sol.u.h2_norm());
            summary.original_residual = solver::residual_original_system(&problem, &sol.u).ok();
            summary.last_delta = trace.rows.last().map(|r| r.delta);
            summary.max_ratio = trace.max_ratio();
            Some(trace)
        }
        Err(SolveError::NonConvergence {
            iterations,
            last_delta,
            residual,
            trace,
        }) => {
            summary.iterations = iterations;
            summary.residual = residual;
            summary.last_delta = Some(last_delta);
            summary.max_ratio = trace.max_ratio();
            summary.diagnostic = Some(if !residual.is_finite() {
                format!("diverging: iterates overflowed after step size {last_delta:e}")
            } else if residual > last_delta {
                format!("diverging: step grew from {last_delta:e} to {residual:e}")
            } else {
                format!("no convergence within {iterations} iterations")
            });
            status = Status::NonConvergence;
            Some(trace)
        }
        Err(e @ SolveError::EscapedBall { .. }) => {
            summary.diagnostic = Some(e.to_string());
            status = Status::HypothesisFailure;
            None
        }
        Err(e) => {
            summary.diagnostic = Some(e.to_string());
            status = Status::NonConvergence;
            None
        }
    };
    if let (Some(path), Some(trace)) = (&args.trace, &trace) {
        if let Err(e) = std::fs::write(path, trace.to_csv()) {
            return Outcome::input_error(format!("writing trace {}: {e}", path.display()));
        }
    }
    report.solve = Some(summary);
    report.set_status(status);
    Outcome::done(report)
}

pub fn cmd_continuity(file: &Path, g2_file: &Path, tol: Option<f64>, seed: u64) -> Outcome {
    let Checked {
        problem,
        mut report,
        options,
        ..
    } = match check_stage("continuity", file, seed) {
        Ok(c) => c,
        Err(e) => return Outcome::input_error(e),
    };
    let (g2, g2_digest) = match load_nonlinearity(g2_file) {
        Ok(v) => v,
        Err(e) => return Outcome::input_error(e),
    };
    if g2.arity() != problem.components() {
        return Outcome::input_error(format!(
            "g2 has {} components, the problem has {}",
            g2.arity(),
            problem.components()
        ));
    }
    report.g2_digest = Some(g2_digest);
    let g1 = problem.g().clone();
    match solver::continuity_experiment(&problem, &g1, &g2, tol, &options) {
        Ok(c) => {
            let pass = c.pass;
            report.continuity = Some(c);
            report.set_status(if pass {
                Status::Pass
            } else {
                Status::HypothesisFailure
            });
            if !pass {
                report.error = Some("measured distance exceeds the continuity bound".into());
            }
        }
        Err(e) => {
            report.set_status(match e {
                SolveError::NonConvergence { .. } => Status::NonConvergence,
                _ => Status::HypothesisFailure,
            });
            report.error = Some(e.to_string());
        }
    }
    Outcome::done(report)
}

fn rel_sup(fast: &ScalarField, slow: &ScalarField) -> f64 {
    let scale = sup_norm(slow);
    let diff = sup_norm(&fast.sub(slow).expect("same grid"));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn check(name: impl Into<String>, error: f64, tolerance: f64) -> OracleCheck {
    OracleCheck {
        name: name.into(),
        error,
        tolerance,
        pass: error <= tolerance,
    }
}

pub fn cmd_oracle(file: &Path, size: Option<usize>, seed: u64, inject_fault: bool) -> Outcome {
    let loaded = match load_problem(file) {
        Ok(l) => l,
        Err(e) => return Outcome::input_error(e),
    };
    let budget = OracleBudget::default();
    let d = loaded.spec.grid.dim();
    let size = size.unwrap_or(budget.max_points(d));
    let grid = match loaded.spec.grid.with_points(size) {
        Ok(g) => g,
        Err(e) => return Outcome::input_error(e),
    };
    if let Err(e) = budget.check(&grid) {
        return Outcome::input_error(e);
    }
    let problem = match loaded
        .spec
        .with_grid(grid)
        .map_err(InputError::from)
        .and_then(|s| Problem::assemble(&s).map_err(InputError::from))
    {
        Ok(p) => p,
        Err(e) => return Outcome::input_error(e),
    };
    let mut report = RunReport::new("oracle", loaded.digest, seed);
    let mut checks = Vec::new();
    let corrupt = |f: ScalarField| {
        if inject_fault {
            f.scaled(1.0 + 1e-6)
        } else {
            f
        }
    };
    for (m, k) in problem.kernels().iter().enumerate() {
        let f = problem.u0().component(m);
        let fast = corrupt(convolve(&k.values, f).expect("same grid"));
        match oracle::direct_convolution(&k.values, f, &budget) {
            Ok(slow) => checks.push(check(
                format!("convolution, kernel {}", m + 1),
                rel_sup(&fast, &slow),
                TOL_CONVOLUTION,
            )),
            Err(e) => return Outcome::input_error(e),
        }
    }
    let zero = VectorField::zeros(grid, problem.components());
    match (
        solver::apply_map_tg(&problem, &zero),
        oracle::direct_map_tg(&problem, &zero, &budget),
    ) {
        (Ok(fast), Ok(slow)) => {
            for (m, slow_m) in slow.iter().enumerate() {
                let fast_m = corrupt(fast.component(m).clone());
                checks.push(check(
                    format!("map t_g at v = 0, component {}", m + 1),
                    rel_sup(&fast_m, slow_m),
                    TOL_MAP,
                ));
            }
        }
        (Err(e), _) => report.error = Some(format!("map evaluation: {e}")),
        (_, Err(e)) => report.error = Some(format!("direct map evaluation: {e}")),
    }
    let c_e = loaded
        .overrides
        .c_e
        .unwrap_or_else(|| analysis::effective_embedding_constant(&grid));
    let r_i = analysis::ball_radius_i(c_e, problem.u0_norm());
    let g = problem.g();
    let n = g.arity();
    let mut grad_err = 0.0f64;
    let mut grad_failed = None;
    for z in oracle::dense_ball_points(n, r_i, GRADIENT_POINTS) {
        match (g.eval_gradient(&z), oracle::finite_diff_gradient(g, &z)) {
            (Ok(sym), Ok(fd)) => {
                for (a, b) in sym.iter().flatten().zip(fd.iter().flatten()) {
                    grad_err = grad_err.max((a - b).abs() / a.abs().max(1.0));
                }
            }
            (Err(e), _) | (_, Err(e)) => {
                grad_failed = Some(e);
                break;
            }
        }
    }
    match grad_failed {
        None => checks.push(check(
            "gradient vs central differences",
            grad_err,
            TOL_GRADIENT,
        )),
        Some(e) => report.error = Some(format!("gradient oracle: {e}")),
    }
    match (
        analysis::estimate_m(g, r_i, seed),
        oracle::dense_c1_norm(g, r_i, DENSE_SAMPLES),
    ) {
        (Ok(est), Ok(dense)) => {
            if est.provenance == analysis::Provenance::RigorousBound {
                let shortfall = ((dense - est.value) / dense.max(f64::MIN_POSITIVE)).max(0.0);
                checks.push(check("M bound dominates dense sup", shortfall, 1e-12));
            } else {
                let rel = (est.raw - dense).abs() / dense.max(f64::MIN_POSITIVE);
                checks.push(check("sampled M vs dense sup", rel, TOL_SAMPLED_M));
            }
        }
        (Err(e), _) => report.error = Some(format!("M estimate: {e}")),
        (_, Err(e)) => report.error = Some(format!("dense sup oracle: {e}")),
    }
    let all_pass = report.error.is_none() && checks.iter().all(|c| c.pass);
    report.oracle = Some(OracleSummary { size, checks });
    report.set_status(if all_pass {
        Status::Pass
    } else {
        Status::HypothesisFailure
    });
    Outcome::done(report)
}
