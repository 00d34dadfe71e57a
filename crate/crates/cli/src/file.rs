//! JSON problem files.
//!
//! ```json
//! {
//!   "grid": { "d": 2, "n": 64, "L": 8.0 },
//!   "components": 1,
//!   "kernels": [{ "name": "gaussian", "alpha": 1.0, "amplitude": 1e-4 }],
//!   "operators": [{ "name": "inverse_helmholtz" }],
//!   "u0": ["exp(-x1^2-x2^2)"],
//!   "g": ["z1^2"],
//!   "rho": 1.0
//! }
//! ```
//!
//! Kernels may also be given as a bare expression string in `x1..xd`, as
//! `{"name": "expression", "expr": "..."}` or as
//! `{"name": "tabulated", "values": [...]}` in grid order. Initial data are
//! expression strings or `{"name": "tabulated", "values": [...]}`. An optional
//! `constants` object overrides `c_e` and/or `c_a`.

use std::path::Path;

use qie_core::analysis::ConstantOverrides;
use qie_core::exprdsl::{parse, Family, NonlinearitySpec, ParseError};
use qie_core::model::{InitialData, KernelSpec, ModelError, OperatorSpec, ProblemSpec};
use qie_core::spectral::{Grid, GridError};
use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed problem file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("grid: {0}")]
    Grid(#[from] GridError),
    #[error("{what}: {source}")]
    Parse {
        what: String,
        #[source]
        source: ParseError,
    },
    #[error("g: {0}")]
    Nonlinearity(#[from] qie_core::exprdsl::NonlinearityError),
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error("`components` is {declared} but {what} has {found} entries")]
    Components {
        declared: usize,
        what: &'static str,
        found: usize,
    },
    #[error("constants: {0} must be a positive finite number")]
    BadOverride(&'static str),
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub d: usize,
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelObject {
    Gaussian {
        alpha: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Expression {
        expr: String,
    },
    Tabulated {
        values: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum KernelEntry {
    Expression(String),
    Object(KernelObject),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataObject {
    Tabulated { values: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum DataEntry {
    Expression(String),
    Object(DataObject),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSection {
    pub c_e: Option<f64>,
    pub c_a: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub grid: GridSection,
    pub components: usize,
    pub kernels: Vec<KernelEntry>,
    pub operators: Vec<OperatorSpec>,
    pub u0: Vec<DataEntry>,
    pub g: Vec<String>,
    pub rho: Option<f64>,
    pub constants: Option<ConstantsSection>,
}

/// A parsed file together with the digest of its bytes.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub spec: ProblemSpec,
    pub overrides: ConstantOverrides,
    /// Lowercase hex SHA-256 of the file contents.
    pub digest: String,
}

pub fn digest_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn read(path: &Path) -> Result<Vec<u8>, InputError> {
    std::fs::read(path).map_err(|source| InputError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_problem(path: &Path) -> Result<LoadedProblem, InputError> {
    let bytes = read(path)?;
    let file: ProblemFile = serde_json::from_slice(&bytes)?;
    let (spec, overrides) = file.into_spec()?;
    Ok(LoadedProblem {
        spec,
        overrides,
        digest: digest_hex(&bytes),
    })
}

/// Reads only the `g` list of a file, which may be a full problem file.
pub fn load_nonlinearity(path: &Path) -> Result<(NonlinearitySpec, String), InputError> {
    #[derive(Deserialize)]
    struct GOnly {
        g: Vec<String>,
    }
    let bytes = read(path)?;
    let file: GOnly = serde_json::from_slice(&bytes)?;
    Ok((NonlinearitySpec::parse(&file.g)?, digest_hex(&bytes)))
}

fn spatial(text: &str, d: usize, what: String) -> Result<qie_core::Expr, InputError> {
    parse(text, d, Family::X).map_err(|source| InputError::Parse { what, source })
}

impl ProblemFile {
    pub fn into_spec(self) -> Result<(ProblemSpec, ConstantOverrides), InputError> {
        let grid = Grid::new(self.grid.d, self.grid.n, self.grid.l)?;
        let d = grid.dim();
        let declared = self.components;
        for (what, found) in [
            ("kernels", self.kernels.len()),
            ("operators", self.operators.len()),
            ("u0", self.u0.len()),
            ("g", self.g.len()),
        ] {
            if found != declared {
                return Err(InputError::Components {
                    declared,
                    what,
                    found,
                });
            }
        }
        let kernels = self
            .kernels
            .into_iter()
            .enumerate()
            .map(|(m, k)| {
                let what = format!("kernel {}", m + 1);
                Ok(match k {
                    KernelEntry::Expression(s) => KernelSpec::Expression(spatial(&s, d, what)?),
                    KernelEntry::Object(KernelObject::Expression { expr }) => {
                        KernelSpec::Expression(spatial(&expr, d, what)?)
                    }
                    KernelEntry::Object(KernelObject::Gaussian { alpha, amplitude }) => {
                        KernelSpec::Gaussian { alpha, amplitude }
                    }
                    KernelEntry::Object(KernelObject::Tabulated { values }) => {
                        KernelSpec::Tabulated(values)
                    }
                })
            })
            .collect::<Result<Vec<_>, InputError>>()?;
        let u0 = self
            .u0
            .into_iter()
            .enumerate()
            .map(|(m, u)| {
                Ok(match u {
                    DataEntry::Expression(s) => {
                        InitialData::Expression(spatial(&s, d, format!("u0 component {}", m + 1))?)
                    }
                    DataEntry::Object(DataObject::Tabulated { values }) => {
                        InitialData::Tabulated(values)
                    }
                })
            })
            .collect::<Result<Vec<_>, InputError>>()?;
        let g = NonlinearitySpec::parse(&self.g)?;
        let spec = ProblemSpec::new(grid, kernels, self.operators, g, u0, self.rho)?;
        let constants = self.constants.unwrap_or_default();
        for (name, v) in [("c_e", constants.c_e), ("c_a", constants.c_a)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(InputError::BadOverride(name));
                }
            }
        }
        Ok((
            spec,
            ConstantOverrides {
                c_e: constants.c_e,
                c_a: constants.c_a,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_str(s: &str) -> Result<(ProblemSpec, ConstantOverrides), InputError> {
        serde_json::from_str::<ProblemFile>(s)?.into_spec()
    }

    const BASE: &str = r#"{
        "grid": {"d": 2, "n": 16, "L": 4.0},
        "components": 1,
        "kernels": [{"name": "gaussian", "alpha": 1.0, "amplitude": 0.01}],
        "operators": [{"name": "inverse_helmholtz"}],
        "u0": ["exp(-x1^2-x2^2)"],
        "g": ["z1^2"]
    }"#;

    #[test]
    fn parses_the_basic_layout() {
        let (spec, ov) = from_str(BASE).unwrap();
        assert_eq!(spec.grid.n(), 16);
        assert_eq!(
            spec.kernels[0],
            KernelSpec::Gaussian {
                alpha: 1.0,
                amplitude: 0.01
            }
        );
        assert_eq!(ov, ConstantOverrides::default());
    }

    #[test]
    fn kernel_forms() {
        let s = BASE.replace(
            r#"[{"name": "gaussian", "alpha": 1.0, "amplitude": 0.01}]"#,
            r#"["0.01*exp(-x1^2-x2^2)"]"#,
        );
        let (spec, _) = from_str(&s).unwrap();
        assert!(matches!(spec.kernels[0], KernelSpec::Expression(_)));
        let s = BASE.replace(
            r#"[{"name": "gaussian", "alpha": 1.0, "amplitude": 0.01}]"#,
            r#"[{"name": "gaussian", "alpha": 2.0}]"#,
        );
        let (spec, _) = from_str(&s).unwrap();
        assert_eq!(spec.kernels[0], KernelSpec::gaussian(2.0));
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(
            from_str(&BASE.replace("\"n\": 16", "\"n\": 15")),
            Err(InputError::Grid(_))
        ));
        assert!(matches!(
            from_str(&BASE.replace("\"components\": 1", "\"components\": 2")),
            Err(InputError::Components { .. })
        ));
        assert!(matches!(
            from_str(&BASE.replace("z1^2", "z1^")),
            Err(InputError::Nonlinearity(_))
        ));
        assert!(matches!(
            from_str(&BASE.replace("exp(-x1^2-x2^2)", "x4")),
            Err(InputError::Parse { .. })
        ));
        assert!(matches!(
            from_str(&BASE.replace("\"g\"", "\"rho\": 1.5, \"g\"")),
            Err(InputError::Model(ModelError::InvalidRho(_)))
        ));
        assert!(matches!(from_str("{"), Err(InputError::Json(_))));
        assert!(matches!(
            from_str(&BASE.replace("\"g\"", "\"colour\": 1, \"g\"")),
            Err(InputError::Json(_))
        ));
    }

    #[test]
    fn overrides_must_be_positive() {
        let s = BASE.replace("\"g\"", "\"constants\": {\"c_a\": 0.5}, \"g\"");
        assert_eq!(from_str(&s).unwrap().1.c_a, Some(0.5));
        let s = BASE.replace("\"g\"", "\"constants\": {\"c_e\": -1}, \"g\"");
        assert!(matches!(from_str(&s), Err(InputError::BadOverride("c_e"))));
    }

    #[test]
    fn digest_is_sha256() {
        assert_eq!(
            digest_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
