//! Fourier calculus on the unit circle.
//!
//! Functions on S¹ are stored as complex coefficient arrays `a_k`, `k = -N..=N`,
//! so that `f(θ) = Σ a_k e^{ikθ}`. The half-Laplacian acts diagonally with
//! multiplier `|k|`; [`half_laplacian_quadrature`] evaluates the same operator
//! from samples through its chordal singular integral and serves as an
//! independent cross-check.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid `θ_j = 2πj/M` on the circle, with FFT plans for its size.
#[derive(Clone)]
pub struct CircleGrid {
    nodes: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for CircleGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CircleGrid").field("nodes", &self.nodes).finish()
    }
}

impl CircleGrid {
    pub fn new(nodes: usize) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::InvalidParameter(
                "circle grid needs at least one node".into(),
            ));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            nodes,
            forward: planner.plan_fft_forward(nodes),
            inverse: planner.plan_fft_inverse(nodes),
        })
    }

    /// Smallest grid that resolves band limit `band` without aliasing.
    pub fn for_band(band: usize) -> Self {
        Self::new(2 * band + 1).expect("2N+1 is positive")
    }

    pub fn len(&self) -> usize {
        self.nodes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.nodes as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.nodes as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.nodes).map(|j| self.node(j)).collect()
    }

    /// Samples `f(θ_j)` of a function of the angle.
    pub fn sample<F: Fn(f64) -> Complex64>(&self, f: F) -> Vec<Complex64> {
        (0..self.nodes).map(|j| f(self.node(j))).collect()
    }

    fn check_len(&self, samples: &[Complex64]) -> Result<()> {
        if samples.len() != self.nodes {
            return Err(Error::SampleLength {
                expected: self.nodes,
                found: samples.len(),
            });
        }
        Ok(())
    }

    fn dft(&self, samples: &[Complex64]) -> Vec<Complex64> {
        let mut buf = samples.to_vec();
        self.forward.process(&mut buf);
        let scale = 1.0 / self.nodes as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }
}

/// Complex Fourier coefficients `a_k`, `|k| ≤ N`, of a function on S¹.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    band: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(band: usize) -> Self {
        Self {
            band,
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * band + 1],
        }
    }

    /// Builds a field from coefficients ordered `a_{-N}, ..., a_N`.
    pub fn from_coeffs(band: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != 2 * band + 1 {
            return Err(Error::CoefficientLength {
                band,
                expected: 2 * band + 1,
                found: coeffs.len(),
            });
        }
        Ok(Self { band, coeffs })
    }

    /// Builds a field from sparse `(k, a_k)` pairs; the band limit is the
    /// largest `|k|` present (at least `min_band`). Repeated modes add up.
    pub fn from_modes(min_band: usize, modes: &[(i64, Complex64)]) -> Self {
        let band = modes
            .iter()
            .map(|(k, _)| k.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
            .max(min_band);
        let mut field = Self::zeros(band);
        for &(k, a) in modes {
            let slot = field.index(k).expect("band covers every mode");
            field.coeffs[slot] += a;
        }
        field
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    fn index(&self, k: i64) -> Option<usize> {
        if k.unsigned_abs() as usize > self.band {
            None
        } else {
            Some((k + self.band as i64) as usize)
        }
    }

    /// `a_k`, zero outside the band.
    pub fn coeff(&self, k: i64) -> Complex64 {
        self.index(k)
            .map(|i| self.coeffs[i])
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn set(&mut self, k: i64, value: Complex64) -> Result<()> {
        let i = self.index(k).ok_or_else(|| {
            Error::InvalidParameter(format!("mode {k} outside band {}", self.band))
        })?;
        self.coeffs[i] = value;
        Ok(())
    }

    /// Iterates `(k, a_k)` in increasing `k`.
    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let n = self.band as i64;
        self.coeffs.iter().enumerate().map(move |(i, &a)| (i as i64 - n, a))
    }

    /// Random coefficients `a_k = (p + iq)/(1 + |k|)` with `p, q` uniform in `[-1, 1]`.
    pub fn random<R: rand::Rng + ?Sized>(band: usize, rng: &mut R) -> Self {
        let n = band as i64;
        let coeffs = (-n..=n)
            .map(|k| Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)) / (1.0 + k.abs() as f64))
            .collect();
        Self { band, coeffs }
    }

    /// Pads with zeros or truncates to a new band limit.
    pub fn with_band(&self, band: usize) -> Self {
        let mut out = Self::zeros(band);
        for (k, a) in self.modes() {
            if let Some(i) = out.index(k) {
                out.coeffs[i] = a;
            }
        }
        out
    }

    /// Evaluates `Σ a_k e^{ikθ}` at an arbitrary angle.
    pub fn eval_at(&self, theta: f64) -> Complex64 {
        self.modes()
            .map(|(k, a)| a * Complex64::from_polar(1.0, k as f64 * theta))
            .sum()
    }

    /// Evaluates `Σ a_k z^k` at a point of the unit circle given as a complex number.
    pub fn eval_at_point(&self, z: Complex64) -> Complex64 {
        self.eval_at(z.arg())
    }

    /// ℓ² norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn sup_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// True when `a_k = conj(a_{-k})` for every `k`, i.e. the field is real-valued.
    pub fn is_self_conjugate(&self, tol: f64) -> bool {
        self.modes()
            .all(|(k, a)| (a - self.coeff(-k).conj()).norm() <= tol)
    }

    /// `self + other`, on the larger band.
    pub fn add(&self, other: &SpectralField) -> SpectralField {
        let band = self.band.max(other.band);
        let mut out = self.with_band(band);
        for (k, a) in other.modes() {
            let i = out.index(k).expect("band covers other");
            out.coeffs[i] += a;
        }
        out
    }

    pub fn scale(&self, factor: Complex64) -> SpectralField {
        SpectralField {
            band: self.band,
            coeffs: self.coeffs.iter().map(|&a| a * factor).collect(),
        }
    }

    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }
}

/// Discrete Fourier coefficients `a_k = (1/M) Σ_j f_j e^{-ikθ_j}`, `|k| ≤ band`.
///
/// Exact for band-limited samples. Requires `M ≥ 2·band + 1`.
pub fn analyze(grid: &CircleGrid, samples: &[Complex64], band: usize) -> Result<SpectralField> {
    grid.check_len(samples)?;
    let needed = 2 * band + 1;
    if grid.len() < needed {
        return Err(Error::GridTooSmall {
            band,
            nodes: grid.len(),
            needed,
        });
    }
    let spectrum = grid.dft(samples);
    let m = grid.len() as i64;
    let coeffs = (-(band as i64)..=band as i64)
        .map(|k| spectrum[k.rem_euclid(m) as usize])
        .collect();
    SpectralField::from_coeffs(band, coeffs)
}

/// Evaluates the field at every grid node. Modes beyond the grid's resolution
/// fold onto their aliases, so the result is exact for any band limit.
pub fn synthesize(field: &SpectralField, grid: &CircleGrid) -> Vec<Complex64> {
    let m = grid.len() as i64;
    let mut buf = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (k, a) in field.modes() {
        buf[k.rem_euclid(m) as usize] += a;
    }
    grid.inverse.process(&mut buf);
    buf
}

/// Trigonometric interpolant through arbitrary samples. For even `M` the
/// Nyquist coefficient is split evenly between `±M/2` so real samples give a
/// real interpolant.
pub fn trig_interpolant(grid: &CircleGrid, samples: &[Complex64]) -> Result<SpectralField> {
    grid.check_len(samples)?;
    let m = grid.len();
    let spectrum = grid.dft(samples);
    let band = m / 2;
    let mut field = SpectralField::zeros(band);
    for k in -(band as i64)..=band as i64 {
        let c = spectrum[k.rem_euclid(m as i64) as usize];
        let value = if m.is_multiple_of(2) && k.unsigned_abs() as usize == band {
            c * 0.5
        } else {
            c
        };
        field.set(k, value)?;
    }
    Ok(field)
}

/// The half-Laplacian as a Fourier multiplier: `a_k ↦ |k| a_k`.
pub fn half_laplacian_multiplier(field: &SpectralField) -> SpectralField {
    SpectralField {
        band: field.band,
        coeffs: field
            .modes()
            .map(|(k, a)| a * k.unsigned_abs() as f64)
            .collect(),
    }
}

/// `a_k ↦ conj(a_{-k})`: the coefficients of the pointwise conjugate.
pub fn conjugate(field: &SpectralField) -> SpectralField {
    let n = field.band as i64;
    SpectralField {
        band: field.band,
        coeffs: (-n..=n).map(|k| field.coeff(-k).conj()).collect(),
    }
}

/// Multiplication by `z^m`: shifts every index by `m` and widens the band by `|m|`.
pub fn modulate(field: &SpectralField, m: i64) -> SpectralField {
    let mut out = SpectralField::zeros(field.band + m.unsigned_abs() as usize);
    for (k, a) in field.modes() {
        let i = out.index(k + m).expect("widened band covers the shift");
        out.coeffs[i] = a;
    }
    out
}

// Eighth-order central stencil for the second derivative, written on the
// symmetric differences f(θ+mh) + f(θ-mh) - 2f(θ), m = 1..=4.
const SECOND_DIFF: [f64; 4] = [8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];

/// Half-Laplacian at node `j` from samples alone, via the chordal singular integral
/// `(1/π) ∫ (ψ(θ) - ψ(φ)) / |e^{iθ} - e^{iφ}|² dφ`.
///
/// Nodes equidistant from `θ_j` are paired so the integrand is bounded. The
/// paired integrand tends to `-ψ''(θ_j)` at the source node; that limit enters
/// the trapezoidal sum with a finite-difference second derivative. The rule is
/// exact on modes `|k| ≤ M` up to the stencil error.
pub fn half_laplacian_quadrature(
    grid: &CircleGrid,
    samples: &[Complex64],
    j: usize,
) -> Result<Complex64> {
    grid.check_len(samples)?;
    let m = grid.len();
    if j >= m {
        return Err(Error::InvalidParameter(format!(
            "node {j} outside grid of {m}"
        )));
    }
    let h = grid.spacing();
    let at = |offset: isize| samples[(j as isize + offset).rem_euclid(m as isize) as usize];
    let center = samples[j];

    let mut sum = Complex64::new(0.0, 0.0);
    for step in 1..m {
        let half = 0.5 * h * step as f64;
        let denom = 4.0 * half.sin().powi(2);
        sum += (center - at(step as isize)) / denom;
    }

    let mut second = Complex64::new(0.0, 0.0);
    for (i, c) in SECOND_DIFF.iter().enumerate() {
        let offset = i as isize + 1;
        second += (at(offset) + at(-offset) - center * 2.0) * *c;
    }
    second /= h * h;

    Ok(sum * (h / PI) - second * (h / (2.0 * PI)))
}

/// [`half_laplacian_quadrature`] at every node.
pub fn half_laplacian_quadrature_all(grid: &CircleGrid, samples: &[Complex64]) -> Result<Vec<Complex64>> {
    (0..grid.len())
        .map(|j| half_laplacian_quadrature(grid, samples, j))
        .collect()
}
