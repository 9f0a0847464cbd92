//! The conformal bridge between the line and the circle.
//!
//! Two charts identify ℝ with S¹ minus a point:
//!
//! * [`Chart::Stereographic`]: `S(x) = (2x/(x²+1), (1-x²)/(x²+1))`, pole `(0, -1)`.
//! * [`Chart::Cayley`]: `z(x) = (x-i)/(x+i)`, pole `z = 1`. This is the complex
//!   form of the standard bubble `U`, so fields expressed along `U` become
//!   polynomials in `z`.
//!
//! Both charts share the chordal metric and the Jacobian `2/(x²+1)`, and the
//! half-Laplacian is invariant under rotations of the circle, so either one
//! carries the intertwining identity.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::line::{LineField, LineFunction, LineGrid};
use crate::nonlocal::{half_laplacian_line, PvQuadratureConfig};
use crate::spectral::{half_laplacian_multiplier, trig_interpolant, CircleGrid, SpectralField};

const UNIT_TOL: f64 = 1e-12;

/// A point of the unit circle in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CirclePoint {
    p1: f64,
    p2: f64,
}

impl CirclePoint {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        if ((p1 * p1 + p2 * p2) - 1.0).abs() > UNIT_TOL || !p1.is_finite() || !p2.is_finite() {
            return Err(Error::NotOnCircle(p1, p2));
        }
        Ok(Self { p1, p2 })
    }

    pub fn from_angle(theta: f64) -> Self {
        Self {
            p1: theta.cos(),
            p2: theta.sin(),
        }
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }

    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.p1, self.p2)
    }

    /// Angle in `[0, 2π)`.
    pub fn angle(&self) -> f64 {
        self.p2.atan2(self.p1).rem_euclid(2.0 * PI)
    }
}

pub fn stereographic(x: f64) -> CirclePoint {
    let d = x * x + 1.0;
    CirclePoint {
        p1: 2.0 * x / d,
        p2: (1.0 - x * x) / d,
    }
}

/// Inverse of [`stereographic`]. Uses `p1/(1+p2)` on the upper half and
/// `(1-p2)/p1` on the lower half to avoid cancellation.
pub fn inverse_stereographic(p: CirclePoint) -> Result<f64> {
    if p.p2 >= 0.0 {
        Ok(p.p1 / (1.0 + p.p2))
    } else if p.p1 == 0.0 {
        Err(Error::Pole)
    } else {
        Ok((1.0 - p.p2) / p.p1)
    }
}

/// `J(x) = 2/(x²+1)`, the length distortion of either chart.
pub fn jacobian(x: f64) -> f64 {
    2.0 / (x * x + 1.0)
}

/// `|S(x) - S(y)|²`, computed from the projected points.
pub fn chordal_sq(x: f64, y: f64) -> f64 {
    let (a, b) = (stereographic(x), stereographic(y));
    (a.p1 - b.p1).powi(2) + (a.p2 - b.p2).powi(2)
}

/// The Cayley chart `z(x) = (x - i)/(x + i)`.
pub fn cayley(x: f64) -> Complex64 {
    let d = x * x + 1.0;
    Complex64::new((x * x - 1.0) / d, -2.0 * x / d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    Stereographic,
    Cayley,
}

impl Chart {
    pub fn point(&self, x: f64) -> Complex64 {
        match self {
            Chart::Stereographic => stereographic(x).as_complex(),
            Chart::Cayley => cayley(x),
        }
    }

    /// Angle of the image of `x`, in `[0, 2π)`.
    pub fn angle(&self, x: f64) -> f64 {
        match self {
            Chart::Stereographic => (0.5 * PI - 2.0 * x.atan()).rem_euclid(2.0 * PI),
            Chart::Cayley => PI + 2.0 * x.atan(),
        }
    }

    pub fn pole_angle(&self) -> f64 {
        match self {
            Chart::Stereographic => 1.5 * PI,
            Chart::Cayley => 0.0,
        }
    }

    /// Preimage of the circle point at angle `theta`; `None` at the pole.
    pub fn preimage(&self, theta: f64) -> Option<f64> {
        match self {
            Chart::Stereographic => inverse_stereographic(CirclePoint::from_angle(theta)).ok(),
            Chart::Cayley => {
                let half = 0.5 * theta.rem_euclid(2.0 * PI);
                let s = half.sin();
                if s == 0.0 {
                    None
                } else {
                    Some(-half.cos() / s)
                }
            }
        }
    }

    fn is_pole_node(&self, grid: &CircleGrid, j: usize) -> bool {
        let m = grid.len();
        match self {
            Chart::Cayley => j == 0,
            Chart::Stereographic => 4 * j == 3 * m,
        }
    }
}

fn circle_preimages(grid: &CircleGrid, chart: Chart) -> Vec<Option<f64>> {
    (0..grid.len())
        .map(|j| {
            if chart.is_pole_node(grid, j) {
                None
            } else {
                chart.preimage(grid.node(j))
            }
        })
        .collect()
}

/// Circle samples of `ṽ` with `ṽ(chart(x)) = v(x)`: pure composition, no Jacobian.
///
/// The pole node takes the field's declared limit at infinity.
pub fn lift_composition<F: LineFunction + ?Sized>(f: &F, grid: &CircleGrid, chart: Chart) -> Result<Vec<Complex64>> {
    circle_preimages(grid, chart)
        .into_iter()
        .map(|pre| match pre {
            None => f.limit().ok_or(Error::PoleUndetermined),
            Some(x) if x.abs() > f.radius() => Err(Error::OutsideGrid { x, radius: f.radius() }),
            Some(x) => Ok(f.value(x)),
        })
        .collect()
}

/// Inverse of [`lift_composition`]: evaluates the trigonometric interpolant of
/// the circle samples at the chart image of every line node. The pole sample
/// becomes the field's limit at infinity.
pub fn pull_composition(
    samples: &[Complex64],
    grid: &CircleGrid,
    chart: Chart,
    line: Arc<LineGrid>,
) -> Result<LineField> {
    let interp = trig_interpolant(grid, samples)?;
    let limit = interp.eval_at(chart.pole_angle());
    LineField::sample(line, |x| interp.eval_at(chart.angle(x)), Some(limit))
}

/// Circle samples of `φ̃` defined by `φ(x) = J(x) φ̃(S(x))`.
///
/// Only decaying fields have a bounded `φ̃`. The pole node, when the grid has
/// one, needs the limit of `φ(x)/J(x)` supplied as `pole_value`.
pub fn lift_weighted(f: &LineField, grid: &CircleGrid, pole_value: Option<Complex64>) -> Result<Vec<Complex64>> {
    if let crate::line::DecayClass::Bounded = f.decay() {
        let x = f.grid().radius();
        let observed = f.value(x).norm().max(f.value(-x).norm()) * (1.0 + x * x);
        return Err(Error::NotDecaying {
            x,
            observed,
            bound: f64::NAN,
        });
    }
    circle_preimages(grid, Chart::Stereographic)
        .into_iter()
        .map(|pre| match pre {
            None => pole_value.ok_or(Error::PoleUndetermined),
            Some(x) if x.abs() > f.radius() => Err(Error::OutsideGrid { x, radius: f.radius() }),
            Some(x) => Ok(f.value(x) / jacobian(x)),
        })
        .collect()
}

/// Sup-norm discrepancy in the intertwining identity
/// `(-Δ_ℝ)^{1/2}[ψ∘S](x) = J(x) [(-Δ_{S¹})^{1/2} ψ](S(x))`
/// over grid nodes with `|x| ≤ window`. The left side is the line quadrature
/// applied to samples of `ψ∘S`; the right side is the Fourier multiplier.
pub fn intertwine_residual(
    psi: &SpectralField,
    line: Arc<LineGrid>,
    cfg: &PvQuadratureConfig,
    window: f64,
) -> Result<f64> {
    let chart = Chart::Stereographic;
    let pulled = LineField::sample(
        line.clone(),
        |x| psi.eval_at(chart.angle(x)),
        Some(psi.eval_at(chart.pole_angle())),
    )?;
    let image = half_laplacian_multiplier(psi);
    let points: Vec<f64> = line.window_indices(window).into_iter().map(|i| line.nodes()[i]).collect();
    let residuals: Result<Vec<f64>> = points
        .par_iter()
        .map(|&x| {
            let left = half_laplacian_line(&pulled, x, cfg)?;
            let right = image.eval_at(chart.angle(x)) * jacobian(x);
            Ok((left - right).norm())
        })
        .collect();
    Ok(residuals?.into_iter().fold(0.0, f64::max))
}

/// Convenience form of [`intertwine_residual`] taking circle samples.
pub fn intertwine_residual_samples(
    samples: &[Complex64],
    grid: &CircleGrid,
    line: Arc<LineGrid>,
    cfg: &PvQuadratureConfig,
    window: f64,
) -> Result<f64> {
    let psi = trig_interpolant(grid, samples)?;
    intertwine_residual(&psi, line, cfg, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::line::Analytic;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn stereographic_examples() {
        assert_eq!(stereographic(0.0), CirclePoint { p1: 0.0, p2: 1.0 });
        assert_eq!(stereographic(1.0), CirclePoint { p1: 1.0, p2: 0.0 });
        assert_eq!(stereographic(-1.0), CirclePoint { p1: -1.0, p2: 0.0 });
    }

    #[test]
    fn inverse_examples_and_pole() {
        assert_eq!(inverse_stereographic(CirclePoint::new(0.0, 1.0).unwrap()).unwrap(), 0.0);
        assert_eq!(inverse_stereographic(CirclePoint::new(1.0, 0.0).unwrap()).unwrap(), 1.0);
        assert_eq!(inverse_stereographic(CirclePoint::new(0.0, -1.0).unwrap()), Err(Error::Pole));
        assert!(CirclePoint::new(1.0, 1.0).is_err());
    }

    #[test]
    fn jacobian_examples() {
        assert_eq!(jacobian(0.0), 2.0);
        assert_eq!(jacobian(1.0), 1.0);
    }

    #[test]
    fn chordal_examples() {
        assert!((chordal_sq(0.0, 1.0) - 2.0).abs() < 1e-15);
        assert_eq!(chordal_sq(0.7, 0.7), 0.0);
    }

    #[test]
    fn cayley_is_the_standard_bubble_and_has_jacobian_modulus() {
        for &x in &[-5.0, -1.0, 0.0, 0.3, 2.0] {
            let z = cayley(x);
            let direct = (c(x, -1.0)) / c(x, 1.0);
            assert!((z - direct).norm() < 1e-15);
            let h = 1e-5;
            let derivative = (cayley(x + h) - cayley(x - h)) / (2.0 * h);
            assert!((derivative.norm() - jacobian(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn chart_angles_match_points() {
        for chart in [Chart::Stereographic, Chart::Cayley] {
            for &x in &[-30.0, -1.0, 0.0, 0.4, 12.0] {
                let from_angle = Complex64::from_polar(1.0, chart.angle(x));
                assert!((from_angle - chart.point(x)).norm() < 1e-14);
                let back = chart.preimage(chart.angle(x)).unwrap();
                assert!((back - x).abs() < 1e-12 * (1.0 + x * x));
            }
        }
        assert!(Chart::Cayley.preimage(0.0).is_none());
    }

    #[test]
    fn lift_constant_field() {
        let grid = CircleGrid::new(16).unwrap();
        let one = Analytic::new(|_| c(1.0, 0.0), Some(c(1.0, 0.0)));
        let lifted = lift_composition(&one, &grid, Chart::Cayley).unwrap();
        assert!(lifted.iter().all(|&v| v == c(1.0, 0.0)));
    }

    #[test]
    fn lift_first_component_of_u_gives_cosine() {
        let grid = CircleGrid::new(32).unwrap();
        let u1 = Analytic::new(|x: f64| c(cayley(x).re, 0.0), Some(c(1.0, 0.0)));
        let lifted = lift_composition(&u1, &grid, Chart::Cayley).unwrap();
        for (j, v) in lifted.iter().enumerate() {
            assert!((v - c(grid.node(j).cos(), 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn lift_without_limit_is_rejected_at_pole() {
        let grid = CircleGrid::new(8).unwrap();
        let f = Analytic::new(|x: f64| c(x.atan(), 0.0), None);
        assert_eq!(lift_composition(&f, &grid, Chart::Cayley), Err(Error::PoleUndetermined));
    }

    #[test]
    fn weighted_lift_examples() {
        let line = Arc::new(LineGrid::default());
        let grid = CircleGrid::new(64).unwrap();

        let j = LineField::decaying(line.clone(), line.sample(|x| c(jacobian(x), 0.0)), 2.0).unwrap();
        let lifted = lift_weighted(&j, &grid, Some(c(1.0, 0.0))).unwrap();
        assert!(lifted.iter().all(|v| (v - c(1.0, 0.0)).norm() < 1e-12));

        let phi = line.sample(|x| c(4.0 * x / (x * x + 1.0).powi(2), 0.0));
        let phi = LineField::decaying(line.clone(), phi, 4.0).unwrap();
        let lifted = lift_weighted(&phi, &grid, Some(c(0.0, 0.0))).unwrap();
        for (j, v) in lifted.iter().enumerate() {
            assert!((v - c(grid.node(j).cos(), 0.0)).norm() < 1e-10, "j={j} {v}");
        }

        let ones = LineField::bounded(line.clone(), vec![c(1.0, 0.0); line.len()], Some(c(1.0, 0.0))).unwrap();
        assert!(matches!(lift_weighted(&ones, &grid, None), Err(Error::NotDecaying { .. })));
    }

    #[test]
    fn pull_inverts_lift_on_band_limited_fields() {
        let line = Arc::new(LineGrid::default());
        let grid = CircleGrid::new(64).unwrap();
        // Z₂ in complex form, -2i/(x+i)², a quadratic polynomial in z.
        let z2 = Analytic::new(|x: f64| c(0.0, -2.0) / (c(x, 1.0) * c(x, 1.0)), Some(c(0.0, 0.0)));
        let lifted = lift_composition(&z2, &grid, Chart::Cayley).unwrap();
        let pulled = pull_composition(&lifted, &grid, Chart::Cayley, line.clone()).unwrap();
        for (x, v) in line.nodes().iter().zip(pulled.values()) {
            assert!((v - z2.value(*x)).norm() < 1e-13);
        }
    }

    #[test]
    fn intertwining_vanishes_for_constants() {
        let one = SpectralField::from_modes(0, &[(0, c(1.0, 0.0))]);
        let r = intertwine_residual(&one, Arc::new(LineGrid::default()), &PvQuadratureConfig::default(), 100.0).unwrap();
        assert_eq!(r, 0.0);
    }
}
