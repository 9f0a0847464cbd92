//! The Möbius bubble family, energies, the Euler–Lagrange residual, winding
//! degree, and the symmetry orbits of the standard bubble.
//!
//! A bubble is the boundary trace
//! `u(x) = e^{iϑ} Π_k (λ_k(x - a_k) - i) / (λ_k(x - a_k) + i)`, optionally
//! conjugated. In the Cayley chart each factor is a disk automorphism in `z`,
//! so a degree-`d` bubble lifts to a finite Blaschke product on the circle.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{lift_composition, Chart};
use crate::error::{Error, Result};
use crate::line::{LineField, LineFunction, LineGrid};
use crate::linearization::TangentField;
use crate::nonlocal::{half_laplacian_line, paired_integral, PvQuadratureConfig, TailModel};
use crate::spectral::{analyze, CircleGrid};

const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleComponent {
    pub scale: f64,
    pub center: f64,
}

/// Parameters `(ϑ, {(λ_k, a_k)}, conjugate)` of a bubble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleParams {
    pub theta: f64,
    pub components: Vec<BubbleComponent>,
    pub conjugate: bool,
}

impl BubbleParams {
    pub fn new(theta: f64, components: Vec<BubbleComponent>, conjugate: bool) -> Result<Self> {
        let params = Self {
            theta,
            components,
            conjugate,
        };
        params.validate()?;
        Ok(params)
    }

    /// `ϑ = 0`, `d = 1`, `λ = 1`, `a = 0`: the standard bubble `U`.
    pub fn standard() -> Self {
        Self {
            theta: 0.0,
            components: vec![BubbleComponent {
                scale: 1.0,
                center: 0.0,
            }],
            conjugate: false,
        }
    }

    /// Random degree-`d` bubble with `ϑ ∈ [0, 2π)`, `λ ∈ [0.5, 2]`, `a ∈ [-1, 1]`.
    pub fn random<R: Rng + ?Sized>(degree: usize, rng: &mut R) -> Result<Self> {
        let components = (0..degree)
            .map(|_| BubbleComponent {
                scale: rng.gen_range(0.5..=2.0),
                center: rng.gen_range(-1.0..=1.0),
            })
            .collect();
        Self::new(rng.gen_range(0.0..2.0 * PI), components, false)
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::InvalidParameter("a bubble needs at least one component".into()));
        }
        if let Some(c) = self
            .components
            .iter()
            .find(|c| !(c.scale > 0.0 && c.scale.is_finite() && c.center.is_finite()))
        {
            return Err(Error::InvalidParameter(format!(
                "bubble component needs scale > 0 and finite center, got {c:?}"
            )));
        }
        if !self.theta.is_finite() {
            return Err(Error::InvalidParameter("bubble phase must be finite".into()));
        }
        Ok(())
    }

    /// Signed winding degree: `d`, or `-d` when conjugated.
    pub fn degree(&self) -> i64 {
        let d = self.components.len() as i64;
        if self.conjugate {
            -d
        } else {
            d
        }
    }

    /// Value at `x → ±∞`.
    pub fn limit(&self) -> Complex64 {
        let v = Complex64::from_polar(1.0, self.theta);
        if self.conjugate {
            v.conj()
        } else {
            v
        }
    }
}

pub fn evaluate_bubble(p: &BubbleParams, x: f64) -> Complex64 {
    let mut v = Complex64::from_polar(1.0, p.theta);
    for c in &p.components {
        let y = c.scale * (x - c.center);
        v *= Complex64::new(y, -1.0) / Complex64::new(y, 1.0);
    }
    if p.conjugate {
        v.conj()
    } else {
        v
    }
}

impl LineFunction for BubbleParams {
    fn value(&self, x: f64) -> Complex64 {
        evaluate_bubble(self, x)
    }

    fn limit(&self) -> Option<Complex64> {
        Some(BubbleParams::limit(self))
    }
}

/// The map `x ↦ e^{iα} u((x - q)/λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryAction {
    pub angle: f64,
    pub shift: f64,
    pub dilation: f64,
}

impl SymmetryAction {
    pub fn new(angle: f64, shift: f64, dilation: f64) -> Result<Self> {
        if !(dilation > 0.0 && dilation.is_finite()) {
            return Err(Error::InvalidParameter(format!("dilation must be positive, got {dilation}")));
        }
        Ok(Self { angle, shift, dilation })
    }

    pub fn identity() -> Self {
        Self {
            angle: 0.0,
            shift: 0.0,
            dilation: 1.0,
        }
    }

    /// Acts on a circle-valued function.
    pub fn apply<F: Fn(f64) -> Complex64>(&self, u: F, x: f64) -> Complex64 {
        Complex64::from_polar(1.0, self.angle) * u((x - self.shift) / self.dilation)
    }

    /// The same action expressed on bubble parameters:
    /// `ϑ → ϑ ± α`, `λ_k → λ_k / λ`, `a_k → q + λ a_k`.
    pub fn apply_to_params(&self, p: &BubbleParams) -> BubbleParams {
        BubbleParams {
            theta: if p.conjugate { p.theta - self.angle } else { p.theta + self.angle },
            components: p
                .components
                .iter()
                .map(|c| BubbleComponent {
                    scale: c.scale / self.dilation,
                    center: self.shift + self.dilation * c.center,
                })
                .collect(),
            conjugate: p.conjugate,
        }
    }
}

/// Sum of wrapped phase increments around a closed loop of unit samples,
/// divided by `2π`.
pub fn winding_number(loop_samples: &[Complex64]) -> Result<i64> {
    let n = loop_samples.len();
    let mut total = 0.0;
    for i in 0..n {
        let next = (i + 1) % n;
        let jump = (loop_samples[next] * loop_samples[i].conj()).arg();
        if jump.abs() >= PI * (1.0 - 1e-12) {
            return Err(Error::UnderResolved { index: i, next, jump });
        }
        total += jump;
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

/// Unit-modulus samples of a map `ℝ → S¹` on a line grid, plus its value at infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleValuedLineMap {
    field: LineField,
    degree: i64,
}

impl CircleValuedLineMap {
    pub fn new(grid: Arc<LineGrid>, samples: Vec<Complex64>, at_infinity: Complex64) -> Result<Self> {
        let check = |index: usize, v: Complex64| {
            let modulus = v.norm();
            if (modulus - 1.0).abs() > UNIT_TOL || !modulus.is_finite() {
                Err(Error::NotUnitModulus { index, modulus })
            } else {
                Ok(())
            }
        };
        for (i, &v) in samples.iter().enumerate() {
            check(i, v)?;
        }
        check(samples.len(), at_infinity)?;
        let field = LineField::bounded(grid, samples, Some(at_infinity))?;
        let mut closed = Vec::with_capacity(field.values().len() + 1);
        closed.push(at_infinity);
        closed.extend_from_slice(field.values());
        let degree = winding_number(&closed)?;
        Ok(Self { field, degree })
    }

    pub fn from_bubble(p: &BubbleParams, grid: Arc<LineGrid>) -> Result<Self> {
        p.validate()?;
        let samples = grid.sample(|x| evaluate_bubble(p, x));
        Self::new(grid, samples, p.limit())
    }

    pub fn from_fn<F: Fn(f64) -> Complex64>(grid: Arc<LineGrid>, u: F, at_infinity: Complex64) -> Result<Self> {
        let samples = grid.sample(u);
        Self::new(grid, samples, at_infinity)
    }

    pub fn field(&self) -> &LineField {
        &self.field
    }

    pub fn grid(&self) -> &Arc<LineGrid> {
        self.field.grid()
    }

    pub fn samples(&self) -> &[Complex64] {
        self.field.values()
    }

    pub fn at_infinity(&self) -> Complex64 {
        self.field.limit().expect("maps always carry their value at infinity")
    }

    pub fn degree(&self) -> i64 {
        self.degree
    }
}

pub fn winding_degree(u: &CircleValuedLineMap) -> i64 {
    u.degree()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEnergy {
    /// `π Σ_{|k| ≤ N} |k| |c_k|²`.
    pub energy: f64,
    /// Contribution of the upper half of the band, `N/2 < |k| ≤ N`; a
    /// truncation indicator.
    pub tail: f64,
}

/// Energy after conformal transport: lift `u` to the circle through the Cayley
/// chart on `4N` nodes and sum `π |k| |c_k|²` over `|k| ≤ N`.
pub fn energy_spectral(u: &CircleValuedLineMap, band: usize) -> Result<SpectralEnergy> {
    let grid = CircleGrid::new(4 * band.max(1))?;
    let lifted = lift_composition(u.field(), &grid, Chart::Cayley)?;
    let coeffs = analyze(&grid, &lifted, band)?;
    let mut energy = 0.0;
    let mut tail = 0.0;
    for (k, a) in coeffs.modes() {
        let term = PI * k.unsigned_abs() as f64 * a.norm_sqr();
        energy += term;
        if 2 * k.unsigned_abs() as usize > band {
            tail += term;
        }
    }
    Ok(SpectralEnergy { energy, tail })
}

/// `(1/π) ∫ |u(x) - u(y)|² / (x - y)² dy`, the inner integral of the Gagliardo energy.
fn energy_density<F: LineFunction + ?Sized>(u: &F, x: f64, cfg: &PvQuadratureConfig) -> Complex64 {
    let center = u.value(x);
    let tail = cfg.tail == TailModel::InverseSquare && u.limit().is_some();
    paired_integral(x, cfg, tail, |t| {
        Complex64::new((center - u.value(x + t)).norm_sqr() + (center - u.value(x - t)).norm_sqr(), 0.0)
    }) / PI
}

/// `(1/4π) ∬ |u(x) - u(y)|² / (x - y)² dx dy`.
///
/// The inner integral uses the paired quadrature; the outer one is trapezoidal
/// in the grid coordinate over the usable window, with `A/x²` tails beyond.
pub fn energy_gagliardo(u: &CircleValuedLineMap, cfg: &PvQuadratureConfig) -> Result<f64> {
    cfg.validate()?;
    let grid = u.grid();
    let window = cfg.usable_window(grid.radius());
    if window <= 0.0 {
        return Err(Error::QuadratureWindow {
            x: 0.0,
            truncation: cfg.truncation,
            radius: grid.radius(),
        });
    }
    let idx = grid.window_indices(window);
    let density: Vec<f64> = idx
        .par_iter()
        .map(|&i| energy_density(u.field(), grid.nodes()[i], cfg).re)
        .collect();
    let (first, last) = (idx[0], *idx.last().expect("window contains the origin"));
    let mut total = 0.0;
    for (pos, &i) in idx.iter().enumerate() {
        let mut w = grid.weights()[i];
        if i == first || i == last {
            // trapezoid end: half the interior weight
            w *= 0.5;
        }
        total += w * density[pos];
    }
    for (pos, i) in [(0, first), (density.len() - 1, last)] {
        let x = grid.nodes()[i].abs();
        total += density[pos] * x;
    }
    Ok(0.25 * total)
}

/// Sup-norm over the usable window of
/// `(-Δ)^{1/2} u - ((1/2π) ∫ |u(x) - u(y)|² / (x - y)² dy) u`.
pub fn el_residual(u: &CircleValuedLineMap, cfg: &PvQuadratureConfig) -> Result<f64> {
    el_residual_within(u, cfg, cfg.usable_window(u.grid().radius()))
}

/// [`el_residual`] restricted to the nodes with `|x| ≤ window`.
pub fn el_residual_within(u: &CircleValuedLineMap, cfg: &PvQuadratureConfig, window: f64) -> Result<f64> {
    cfg.validate()?;
    let grid = u.grid();
    let idx = grid.window_indices(window);
    let field = u.field();
    let residuals: Result<Vec<f64>> = idx
        .par_iter()
        .map(|&i| {
            let x = grid.nodes()[i];
            let lap = half_laplacian_line(field, x, cfg)?;
            let weight = 0.5 * energy_density(field, x, cfg).re;
            Ok((lap - field.values()[i] * weight).norm())
        })
        .collect();
    Ok(residuals?.into_iter().fold(0.0, f64::max))
}

/// Central finite difference of the symmetry orbit of `U` at the identity:
/// `i = 1` rotation, `i = 2` translation, `i = 3` dilation. The result is
/// projected onto the tangent line of S¹ at `U`, which removes the `O(h²)`
/// normal component of the difference quotient.
pub fn symmetry_generator(i: usize, h: f64, grid: Arc<LineGrid>) -> Result<TangentField> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    let (plus, minus) = match i {
        1 => (SymmetryAction::new(h, 0.0, 1.0)?, SymmetryAction::new(-h, 0.0, 1.0)?),
        2 => (SymmetryAction::new(0.0, h, 1.0)?, SymmetryAction::new(0.0, -h, 1.0)?),
        3 => (SymmetryAction::new(0.0, 0.0, 1.0 + h)?, SymmetryAction::new(0.0, 0.0, 1.0 - h)?),
        _ => return Err(Error::InvalidParameter(format!("symmetry generator index must be 1, 2 or 3, got {i}"))),
    };
    let standard = BubbleParams::standard();
    let u = |x: f64| evaluate_bubble(&standard, x);
    let derivative = |x: f64| (plus.apply(u, x) - minus.apply(u, x)) / (2.0 * h);
    let project = |x: f64| {
        let d = derivative(x);
        let ux = u(x);
        d - ux * (d * ux.conj()).re
    };
    // Limits at infinity: the rotation moves U(∞) = 1 to e^{iα}; the others fix it.
    let limit = if i == 1 {
        let d = (Complex64::from_polar(1.0, h) - Complex64::from_polar(1.0, -h)) / (2.0 * h);
        d - (d * Complex64::new(1.0, 0.0).conj()).re
    } else {
        Complex64::new(0.0, 0.0)
    };
    let field = LineField::sample(grid, project, Some(limit))?;
    TangentField::new(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn standard_bubble_values() {
        let p = BubbleParams::standard();
        assert!((evaluate_bubble(&p, 0.0) - c(-1.0, 0.0)).norm() < 1e-15);
        assert!((evaluate_bubble(&p, 1.0) - c(0.0, -1.0)).norm() < 1e-15);
        for &x in &[-3.0, 0.2, 5.0] {
            let expected = c(x * x - 1.0, -2.0 * x) / (x * x + 1.0);
            assert!((evaluate_bubble(&p, x) - expected).norm() < 1e-15);
        }
    }

    #[test]
    fn bubbles_have_unit_modulus() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let d = rng.gen_range(1..=4);
            let mut p = BubbleParams::random(d, &mut rng).unwrap();
            p.conjugate = rng.gen_bool(0.5);
            let x = rng.gen_range(-50.0..50.0);
            assert!((evaluate_bubble(&p, x).norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        assert!(BubbleParams::new(0.0, vec![], false).is_err());
        assert!(BubbleParams::new(0.0, vec![BubbleComponent { scale: -1.0, center: 0.0 }], false).is_err());
        assert!(SymmetryAction::new(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn winding_examples() {
        let grid = Arc::new(LineGrid::default());
        let constant = CircleValuedLineMap::from_fn(grid.clone(), |_| c(0.0, 1.0), c(0.0, 1.0)).unwrap();
        assert_eq!(winding_degree(&constant), 0);
        let u = CircleValuedLineMap::from_bubble(&BubbleParams::standard(), grid.clone()).unwrap();
        assert_eq!(winding_degree(&u), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p3 = BubbleParams::random(3, &mut rng).unwrap();
        assert_eq!(winding_degree(&CircleValuedLineMap::from_bubble(&p3, grid.clone()).unwrap()), 3);
        p3.conjugate = true;
        assert_eq!(winding_degree(&CircleValuedLineMap::from_bubble(&p3, grid).unwrap()), -3);
    }

    #[test]
    fn under_resolved_loops_are_rejected() {
        let samples = [c(1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)];
        assert!(matches!(winding_number(&samples), Err(Error::UnderResolved { .. })));
    }

    #[test]
    fn non_unit_samples_are_rejected() {
        let grid = Arc::new(LineGrid::graded(101, 100.0).unwrap());
        let err = CircleValuedLineMap::from_fn(grid, |_| c(0.5, 0.0), c(1.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::NotUnitModulus { .. }));
    }

    #[test]
    fn constant_map_has_zero_energies() {
        let grid = Arc::new(LineGrid::default());
        let constant = CircleValuedLineMap::from_fn(grid, |_| c(0.6, 0.8), c(0.6, 0.8)).unwrap();
        assert!(energy_spectral(&constant, 64).unwrap().energy < 1e-28);
        assert_eq!(energy_gagliardo(&constant, &PvQuadratureConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn standard_bubble_energy_is_pi() {
        let grid = Arc::new(LineGrid::default());
        let u = CircleValuedLineMap::from_bubble(&BubbleParams::standard(), grid).unwrap();
        let e = energy_spectral(&u, 64).unwrap();
        assert!((e.energy - PI).abs() < 1e-8, "{e:?}");
        let g = energy_gagliardo(&u, &PvQuadratureConfig::default()).unwrap();
        assert!((g - PI).abs() < 1e-3, "{g}");
    }

    #[test]
    fn action_on_params_matches_action_on_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = BubbleParams::random(2, &mut rng).unwrap();
        let g = SymmetryAction::new(0.4, -0.7, 1.6).unwrap();
        let q = g.apply_to_params(&p);
        for &x in &[-4.0, -0.3, 0.0, 2.5] {
            let direct = g.apply(|y| evaluate_bubble(&p, y), x);
            assert!((direct - evaluate_bubble(&q, x)).norm() < 1e-14);
        }
    }

    #[test]
    fn generators_match_kernel_fields() {
        let grid = Arc::new(LineGrid::default());
        let z = [
            |x: f64| c(2.0 * x, x * x - 1.0) / (x * x + 1.0),
            |x: f64| c(-4.0 * x, 2.0 * (1.0 - x * x)) / (x * x + 1.0).powi(2),
            |x: f64| c(-4.0 * x * x, 2.0 * x * (1.0 - x * x)) / (x * x + 1.0).powi(2),
        ];
        for (i, zi) in z.iter().enumerate() {
            let generated = symmetry_generator(i + 1, 1e-4, grid.clone()).unwrap();
            let err = grid
                .nodes()
                .iter()
                .zip(generated.field().values())
                .map(|(&x, v)| (v - zi(x)).norm())
                .fold(0.0, f64::max);
            assert!(err <= 1e-7, "Z{} error {err}", i + 1);
        }
        assert!(symmetry_generator(4, 1e-4, grid).is_err());
    }
}
