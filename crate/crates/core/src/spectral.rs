//! Periodic grids, Fourier transforms and the discrete norm functionals.
//!
//! Transform convention, with `x` ranging over grid points and `ξ = πk/L`
//! over the frequency lattice `k ∈ [-n/2, n/2)^d`:
//!
//! ```text
//! F(ξ) = h^d Σ_x f(x) e^{-iξ·x}          f(x) = (2L)^{-d} Σ_ξ F(ξ) e^{iξ·x}
//! ```
//!
//! With this scaling the discrete norms approximate their continuous
//! counterparts and the convolution theorem carries no extra weight:
//! `F(K * f) = F(K) F(f)` where `*` is the cyclic convolution with cell weight
//! `h^d`.
//!
//! Spectral coefficients are stored in FFT order along every axis (index `j`
//! maps to wavenumber `j` for `j < n/2`, `j - n` otherwise).

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::VectorField;

/// Largest supported dimension.
pub const MAX_DIM: usize = 3;

/// Fraction of the box (per axis, measured from the boundary) that the
/// tail-mass diagnostic inspects.
pub const TAIL_SHELL_FRACTION: f64 = 0.1;

/// Default warning threshold for [`tail_mass_fraction`].
pub const TAIL_MASS_WARNING: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("unsupported dimension {0}: only d = 2 and d = 3 are supported")]
    UnsupportedDimension(usize),
    #[error("points per axis must be even and at least 4, got {0}")]
    InvalidSize(usize),
    #[error("box half-width must be positive and finite, got {0}")]
    InvalidHalfWidth(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("field has {actual} samples but the grid has {expected} points")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("field sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("fields live on different grids")]
    GridMismatch,
}

/// Uniform periodic grid over `[-L, L)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    d: usize,
    n: usize,
    half_width: f64,
}

impl Grid {
    pub fn new(d: usize, n: usize, half_width: f64) -> Result<Self, GridError> {
        if d != 2 && d != 3 {
            return Err(GridError::UnsupportedDimension(d));
        }
        if n < 4 || !n.is_multiple_of(2) {
            return Err(GridError::InvalidSize(n));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(GridError::InvalidHalfWidth(half_width));
        }
        Ok(Self { d, n, half_width })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Half-width `L` of the box.
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Spacing `h = 2L/n`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Total number of grid points, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    /// Box volume `(2L)^d`.
    pub fn volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.d as i32)
    }

    /// Lattice spacing in frequency, `π/L`.
    pub fn frequency_step(&self) -> f64 {
        std::f64::consts::PI / self.half_width
    }

    /// Row-major multi-index of a flat index; entries past `d` are zero.
    pub fn multi_index(&self, flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        let mut rest = flat;
        for axis in (0..self.d).rev() {
            idx[axis] = rest % self.n;
            rest /= self.n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx[..self.d].iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Physical coordinate of an axis index.
    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Physical position of a grid point; entries past `d` are zero.
    pub fn point(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.multi_index(flat);
        let mut x = [0.0; MAX_DIM];
        for axis in 0..self.d {
            x[axis] = self.coordinate(idx[axis]);
        }
        x
    }

    /// Signed wavenumber of an FFT-ordered axis index.
    pub fn wavenumber(&self, j: usize) -> i64 {
        if j < self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    /// `|ξ|²` at an FFT-ordered flat index.
    pub fn frequency_sq(&self, flat: usize) -> f64 {
        let idx = self.multi_index(flat);
        let step = self.frequency_step();
        (0..self.d)
            .map(|axis| {
                let xi = step * self.wavenumber(idx[axis]) as f64;
                xi * xi
            })
            .sum()
    }

    /// `|ξ|²` for every lattice point, FFT order.
    pub fn frequency_sq_table(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.frequency_sq(j)).collect()
    }

    /// The same box and dimension with a different resolution.
    pub fn with_points(&self, n: usize) -> Result<Self, GridError> {
        Self::new(self.d, n, self.half_width)
    }
}

/// Real samples of one function on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, SpectralError> {
        if values.len() != grid.len() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(SpectralError::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f` at every grid point. `f` receives the first `d` coordinates.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let d = grid.dim();
        let values = (0..grid.len()).map(|i| f(&grid.point(i)[..d])).collect();
        Self { grid, values }
    }

    pub fn try_from_fn<E>(
        grid: Grid,
        mut f: impl FnMut(&[f64]) -> Result<f64, E>,
    ) -> Result<Self, E> {
        let d = grid.dim();
        let values = (0..grid.len())
            .map(|i| f(&grid.point(i)[..d]))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self, SpectralError> {
        if self.grid != other.grid {
            return Err(SpectralError::GridMismatch);
        }
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self, SpectralError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SpectralError> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Result<Self, SpectralError> {
        self.zip_with(other, |a, b| a * b)
    }
}

/// Fourier coefficients of a field, FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coefficients: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: Grid, coefficients: Vec<Complex64>) -> Result<Self, SpectralError> {
        if coefficients.len() != grid.len() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.len(),
                actual: coefficients.len(),
            });
        }
        Ok(Self { grid, coefficients })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// Coefficient at the given signed wavenumbers (`k[..d]` used).
    pub fn at_wavenumber(&self, k: &[i64]) -> Complex64 {
        let n = self.grid.n() as i64;
        let idx: Vec<usize> = k[..self.grid.dim()]
            .iter()
            .map(|&ki| ki.rem_euclid(n) as usize)
            .collect();
        self.coefficients[self.grid.flat_index(&idx)]
    }

    /// Pointwise product with a real multiplier `m(|ξ|²)`.
    pub fn apply_radial_multiplier(&mut self, m: impl Fn(f64) -> f64) {
        for (j, c) in self.coefficients.iter_mut().enumerate() {
            *c *= m(self.grid.frequency_sq(j));
        }
    }

    /// Largest violation of `F(-ξ) = conj F(ξ)`, relative to the largest
    /// coefficient magnitude.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let n = self.grid.n();
        let d = self.grid.dim();
        let scale = self
            .coefficients
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for (j, c) in self.coefficients.iter().enumerate() {
            let idx = self.grid.multi_index(j);
            let mut mirror = [0usize; MAX_DIM];
            for axis in 0..d {
                mirror[axis] = (n - idx[axis]) % n;
            }
            let m = self.coefficients[self.grid.flat_index(&mirror)];
            worst = worst.max((c - m.conj()).norm());
        }
        worst / scale
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(n, direction))
}

/// Unnormalized in-place d-dimensional FFT, one axis at a time.
fn fft_nd(grid: &Grid, data: &mut [Complex64], direction: FftDirection) {
    let n = grid.n();
    let d = grid.dim();
    let fft = plan(n, direction);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        let block = stride * n;
        for outer in (0..data.len()).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (t, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + t * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (t, value) in line.iter().enumerate() {
                    data[base + t * stride] = *value;
                }
            }
        }
    }
}

/// `(-1)^{Σ k_i}`: the phase from the grid starting at `-L` rather than 0.
fn origin_phase(grid: &Grid, flat: usize) -> f64 {
    let idx = grid.multi_index(flat);
    let parity: usize = idx[..grid.dim()].iter().sum();
    if parity.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

pub fn forward_transform(f: &ScalarField) -> SpectralField {
    let grid = *f.grid();
    let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(&grid, &mut data, FftDirection::Forward);
    let w = grid.cell_volume();
    for (j, c) in data.iter_mut().enumerate() {
        *c *= w * origin_phase(&grid, j);
    }
    SpectralField {
        grid,
        coefficients: data,
    }
}

/// Complex inverse transform.
pub fn inverse_transform_complex(s: &SpectralField) -> Vec<Complex64> {
    let grid = *s.grid();
    let w = 1.0 / grid.volume();
    let mut data: Vec<Complex64> = s
        .coefficients()
        .iter()
        .enumerate()
        .map(|(j, &c)| c * (w * origin_phase(&grid, j)))
        .collect();
    fft_nd(&grid, &mut data, FftDirection::Inverse);
    data
}

/// Inverse transform, keeping the real part.
pub fn inverse_transform(s: &SpectralField) -> ScalarField {
    let grid = *s.grid();
    let values = inverse_transform_complex(s)
        .into_iter()
        .map(|c| c.re)
        .collect();
    ScalarField { grid, values }
}

/// Cyclic convolution `∫ K(x - y) f(y) dy` realized as `F⁻¹(F(K)·F(f))`.
pub fn convolve(kernel: &ScalarField, f: &ScalarField) -> Result<ScalarField, SpectralError> {
    if kernel.grid() != f.grid() {
        return Err(SpectralError::GridMismatch);
    }
    convolve_spectrum(&forward_transform(kernel), f)
}

/// Convolution with a kernel whose transform is already known.
pub fn convolve_spectrum(
    kernel_hat: &SpectralField,
    f: &ScalarField,
) -> Result<ScalarField, SpectralError> {
    if kernel_hat.grid() != f.grid() {
        return Err(SpectralError::GridMismatch);
    }
    let mut fh = forward_transform(f);
    for (c, k) in fh.coefficients.iter_mut().zip(kernel_hat.coefficients()) {
        *c *= k;
    }
    Ok(inverse_transform(&fh))
}

/// Applies the real radial multiplier `m(|ξ|²)` in frequency space.
pub fn apply_multiplier(f: &ScalarField, m: impl Fn(f64) -> f64) -> ScalarField {
    let mut fh = forward_transform(f);
    fh.apply_radial_multiplier(m);
    inverse_transform(&fh)
}

/// Spectral Laplacian, multiplier `-|ξ|²`.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    apply_multiplier(f, |s| -s)
}

/// `h^d Σ |f|`.
pub fn l1_norm(f: &ScalarField) -> f64 {
    f.grid().cell_volume() * f.values().iter().map(|v| v.abs()).sum::<f64>()
}

/// `(h^d Σ |f|²)^{1/2}`.
pub fn l2_norm(f: &ScalarField) -> f64 {
    (f.grid().cell_volume() * f.values().iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// Maximum absolute sample.
pub fn sup_norm(f: &ScalarField) -> f64 {
    f.values().iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `‖f‖_{H²}` from the Fourier side: `((2L)^{-d} Σ |F(ξ)|² (1 + |ξ|⁴))^{1/2}`.
pub fn h2_norm(f: &ScalarField) -> f64 {
    h2_norm_spectral(&forward_transform(f))
}

pub fn h2_norm_spectral(s: &SpectralField) -> f64 {
    let grid = s.grid();
    let total: f64 = s
        .coefficients()
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let q = grid.frequency_sq(j);
            c.norm_sqr() * (1.0 + q * q)
        })
        .sum();
    (total / grid.volume()).sqrt()
}

/// `(‖f‖²_{L²} + ‖Δf‖²_{L²})^{1/2}` with the Laplacian evaluated spectrally
/// and the norms in physical space.
pub fn h2_norm_spatial(f: &ScalarField) -> f64 {
    let a = l2_norm(f);
    let b = l2_norm(&laplacian(f));
    (a * a + b * b).sqrt()
}

/// `(Σ_m ‖u_m‖²_{H²})^{1/2}`.
pub fn h2_norm_vector(u: &VectorField) -> f64 {
    u.components()
        .iter()
        .map(|c| h2_norm(c).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `(‖K‖²_{L¹} + ‖ΔK‖²_{L¹})^{1/2}`.
pub fn tilde_w21_norm(kernel: &ScalarField, laplacian_kernel: &ScalarField) -> f64 {
    l1_norm(kernel).hypot(l1_norm(laplacian_kernel))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassKind {
    L1,
    L2,
}

/// Fraction of the `L¹` or `L²` mass sitting in the outer shell
/// `max_i |x_i| >= (1 - TAIL_SHELL_FRACTION) L`. Zero for the zero field.
pub fn tail_mass_fraction(f: &ScalarField, kind: MassKind) -> f64 {
    let grid = f.grid();
    let cutoff = (1.0 - TAIL_SHELL_FRACTION) * grid.half_width();
    let d = grid.dim();
    let weight = |v: f64| match kind {
        MassKind::L1 => v.abs(),
        MassKind::L2 => v * v,
    };
    let mut total = 0.0;
    let mut shell = 0.0;
    for (i, &v) in f.values().iter().enumerate() {
        let w = weight(v);
        total += w;
        let x = grid.point(i);
        if x[..d].iter().any(|c| c.abs() >= cutoff) {
            shell += w;
        }
    }
    if total == 0.0 {
        return 0.0;
    }
    match kind {
        MassKind::L1 => shell / total,
        MassKind::L2 => (shell / total).sqrt(),
    }
}

/// Random real field whose spectrum is supported on `|k_i| <= max_wavenumber`.
///
/// Coefficients are uniform in the unit square of the complex plane before
/// taking the real part of the inverse transform, which keeps the support.
pub fn random_band_limited<R: Rng + ?Sized>(
    grid: Grid,
    max_wavenumber: usize,
    rng: &mut R,
) -> ScalarField {
    let kmax = max_wavenumber.min(grid.n() / 2 - 1) as i64;
    let d = grid.dim();
    let coefficients = (0..grid.len())
        .map(|j| {
            let idx = grid.multi_index(j);
            let inside = idx[..d].iter().all(|&i| grid.wavenumber(i).abs() <= kmax);
            if inside {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    inverse_transform(&SpectralField { grid, coefficients })
}
