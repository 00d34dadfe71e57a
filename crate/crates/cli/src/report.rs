use qie_core::analysis::{ConstantsReport, ContractionVerdict, Provenance};
use qie_core::model::ValidationReport;
use qie_core::solver::ContinuityReport;
use serde::Serialize;

pub const TOOL: &str = "qie";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    HypothesisFailure,
    InputError,
    NonConvergence,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::HypothesisFailure => 1,
            Status::InputError => 2,
            Status::NonConvergence => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationSummary {
    pub valid: bool,
    pub violations: Vec<String>,
    pub details: ValidationReport,
}

impl From<ValidationReport> for ValidationSummary {
    fn from(details: ValidationReport) -> Self {
        Self {
            valid: details.is_valid(),
            violations: details.messages(),
            details,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary {
    pub converged: bool,
    pub iterations: usize,
    /// `‖u_p - t_g(u_p)‖` at exit.
    pub residual: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub certified: bool,
    pub best_effort: bool,
    pub u_p_norm: Option<f64>,
    pub u_norm: Option<f64>,
    /// Residual of the original (non-perturbative) system at `u0 + u_p`.
    pub original_residual: Option<f64>,
    pub last_delta: Option<f64>,
    pub max_ratio: Option<f64>,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub name: String,
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSummary {
    pub size: usize,
    pub checks: Vec<OracleCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub input_digest: String,
    pub g2_digest: Option<String>,
    pub seed: u64,
    pub status: Status,
    pub exit_code: i32,
    pub validation: Option<ValidationSummary>,
    pub constants: Option<ConstantsReport>,
    pub verdict: Option<ContractionVerdict>,
    pub certified: bool,
    pub constants_note: Option<String>,
    pub solve: Option<SolveSummary>,
    pub continuity: Option<ContinuityReport>,
    pub oracle: Option<OracleSummary>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

impl RunReport {
    pub fn new(command: &'static str, input_digest: String, seed: u64) -> Self {
        Self {
            tool: TOOL,
            version: VERSION,
            command,
            input_digest,
            g2_digest: None,
            seed,
            status: Status::Pass,
            exit_code: 0,
            validation: None,
            constants: None,
            verdict: None,
            certified: false,
            constants_note: None,
            solve: None,
            continuity: None,
            oracle: None,
            warnings: Vec::new(),
            error: None,
        }
    }

    pub fn set_status(&mut self, status: Status) {
        self.status = status;
        self.exit_code = status.code();
    }

    /// Records the constants and the warnings they imply.
    pub fn set_constants(&mut self, c: ConstantsReport) {
        if c.m_provenance == Provenance::SampledEstimate {
            self.warnings.push(format!(
                "M = {} is a sampled estimate (raw maximum {} inflated by 10%), not a rigorous bound",
                c.m, c.m_raw
            ));
        }
        if c.verdict.boundary_equality {
            self.warnings.push(
                "boundary equality: the contraction condition holds with equality; accepted with warning".into(),
            );
        }
        if c.constants_overridden {
            self.constants_note = Some("non-certified constants".into());
            self.warnings
                .push("c_e/c_a overridden by the input file: non-certified constants".into());
        }
        self.verdict = Some(c.verdict);
        self.certified = c.certified();
        self.constants = Some(c);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(Status::Pass.code(), 0);
        assert_eq!(Status::HypothesisFailure.code(), 1);
        assert_eq!(Status::InputError.code(), 2);
        assert_eq!(Status::NonConvergence.code(), 3);
    }

    #[test]
    fn empty_report_is_stable_json() {
        let mut r = RunReport::new("check", "00".into(), 7);
        r.set_status(Status::NonConvergence);
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["status"], "non_convergence");
        assert_eq!(v["exit_code"], 3);
        assert_eq!(v["seed"], 7);
        assert!(v["constants"].is_null());
        assert_eq!(r.to_json(), r.clone().to_json());
    }
}
