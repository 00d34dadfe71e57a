//! Solver and hypothesis certifier for systems of quadratic integral equations
//!
//! ```text
//! u_m(x) = u0_m(x) + [T_m u_m](x) * ∫ K_m(x - y) g_m(u(y)) dy,   1 <= m <= N,  x in R^d (d = 2, 3)
//! ```
//!
//! The unbounded domain is replaced by a periodic box `[-L, L)^d` sampled on a
//! uniform grid. All integrals become cyclic convolutions evaluated spectrally,
//! all norms are the discrete counterparts of the `L^1`, `L^2`, `H^2` norms.
//!
//! Module map:
//!
//! * [`spectral`]: grid, Fourier transforms, convolution, Laplacian, norms.
//! * [`exprdsl`]: expression language for `g`, `u0` and analytic kernels, with
//!   exact symbolic differentiation.
//! * [`model`]: problem assembly (kernels, multiplier operators, initial data)
//!   and assumption checks.
//! * [`analysis`]: the constants `c_e`, `c_a`, `M`, `Q`, `sigma` and the
//!   contraction certificate.
//! * [`solver`]: the perturbative map, Picard iteration, continuity experiment.
//! * [`oracle`]: brute-force references for the fast paths.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod exprdsl;
pub mod model;
pub mod oracle;
pub mod sampling;
pub mod solver;
pub mod spectral;

pub use analysis::{ConstantsReport, ContractionVerdict, Provenance};
pub use exprdsl::{Expr, Family, NonlinearitySpec};
pub use model::{KernelSpec, OperatorSpec, Problem, ProblemSpec, VectorField};
pub use solver::{IterationTrace, Solution};
pub use spectral::{Grid, ScalarField, SpectralField};
