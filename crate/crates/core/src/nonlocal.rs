//! Direct half-Laplacian on ℝ by principal-value quadrature.
//!
//! Every nonlocal quantity on the line here is an integral of the form
//! `∫_0^∞ N(t) / t² dt` where `N(t)` pairs the points `x + t` and `x - t`, e.g.
//! `N(t) = 2f(x) - f(x+t) - f(x-t)` for the half-Laplacian. Pairing cancels
//! the principal-value singularity, so `N(t)/t²` stays bounded at `t = 0`.
//! The range `[0, T]` is split into panels graded geometrically away from
//! `t = 0` and `t = |x|` (where `x - t` or `x + t` crosses the origin) and
//! integrated with Gauss–Legendre on each panel. Beyond `T` the integrand is
//! modelled as `N(T) T² / t²`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::line::LineFunction;

const GAUSS_POINTS: usize = 12;
const PANEL_GROWTH: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailModel {
    /// Truncate at `T`; the neglected tail is reported as an error bar.
    None,
    /// Integrate the `c / t²` continuation of the integrand past `T`.
    InverseSquare,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PvQuadratureConfig {
    /// Width of the innermost panels next to each focus point.
    pub step: f64,
    /// Truncation radius `T` of the `t`-integral.
    pub truncation: f64,
    pub tail: TailModel,
}

impl Default for PvQuadratureConfig {
    fn default() -> Self {
        Self {
            step: 0.05,
            truncation: 900.0,
            tail: TailModel::InverseSquare,
        }
    }
}

impl PvQuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "pairing step must be positive, got {}",
                self.step
            )));
        }
        if !(self.truncation > 10.0 * self.step && self.truncation.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "truncation {} must exceed 10 x step {}",
                self.truncation, self.step
            )));
        }
        Ok(())
    }

    /// Largest `|x|` at which a field of the given radius can be evaluated.
    pub fn usable_window(&self, radius: f64) -> f64 {
        radius - self.truncation
    }

    /// Bound `4‖f‖_∞ / (πT)` on the neglected tail when it is not modelled.
    pub fn tail_error_bar(&self, sup_norm: f64) -> f64 {
        4.0 * sup_norm / (PI * self.truncation)
    }

    fn check_window(&self, x: f64, radius: f64) -> Result<()> {
        if x.abs() + self.truncation > radius * (1.0 + 1e-12) {
            return Err(Error::QuadratureWindow {
                x,
                truncation: self.truncation,
                radius,
            });
        }
        Ok(())
    }
}

fn gauss_legendre() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GAUSS_POINTS;
        (0..n)
            .map(|i| {
                let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
                let mut dp = 0.0;
                for _ in 0..100 {
                    let (mut p0, mut p1) = (1.0, x);
                    for k in 2..=n {
                        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                        p0 = p1;
                        p1 = p2;
                    }
                    dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                    let dx = p1 / dp;
                    x -= dx;
                    if dx.abs() < 1e-16 {
                        break;
                    }
                }
                (x, 2.0 / ((1.0 - x * x) * dp * dp))
            })
            .collect()
    })
}

/// Panel breakpoints on `[0, T]`, graded away from `0` and `|x|`.
fn breakpoints(x: f64, cfg: &PvQuadratureConfig) -> Vec<f64> {
    let t_max = cfg.truncation;
    let mut points = vec![0.0, t_max];
    let mut foci = vec![0.0];
    if x.abs() > 0.0 && x.abs() < t_max {
        foci.push(x.abs());
    }
    for &c in &foci {
        let mut w = cfg.step;
        while w < t_max {
            for p in [c - w, c + w] {
                if p > 0.0 && p < t_max {
                    points.push(p);
                }
            }
            w *= PANEL_GROWTH;
        }
        if c > 0.0 {
            points.push(c);
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * t_max);
    points
}

/// `∫_0^T N(t)/t² dt`, plus the modelled tail when `tail` is set.
pub fn paired_integral<N>(x: f64, cfg: &PvQuadratureConfig, tail: bool, numerator: N) -> Complex64
where
    N: Fn(f64) -> Complex64,
{
    let rule = gauss_legendre();
    let points = breakpoints(x, cfg);
    let mut total = Complex64::new(0.0, 0.0);
    for pair in points.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut panel = Complex64::new(0.0, 0.0);
        for &(node, weight) in rule {
            let t = mid + half * node;
            panel += numerator(t) * (weight / (t * t));
        }
        total += panel * half;
    }
    if tail {
        total += numerator(cfg.truncation) / cfg.truncation;
    }
    total
}

fn tail_applies<F: LineFunction + ?Sized>(f: &F, cfg: &PvQuadratureConfig) -> bool {
    cfg.tail == TailModel::InverseSquare && f.limit().is_some()
}

/// `(-Δ)^{1/2} f(x) = (1/π) ∫_0^∞ (2f(x) - f(x+t) - f(x-t)) / t² dt`.
///
/// The tail model is applied only when the field declares a limit at infinity.
pub fn half_laplacian_line<F: LineFunction + ?Sized>(f: &F, x: f64, cfg: &PvQuadratureConfig) -> Result<Complex64> {
    cfg.validate()?;
    cfg.check_window(x, f.radius())?;
    let center = f.value(x);
    let value = paired_integral(x, cfg, tail_applies(f, cfg), |t| {
        center * 2.0 - f.value(x + t) - f.value(x - t)
    });
    Ok(value / PI)
}

/// [`half_laplacian_line`] at many points, evaluated in parallel.
pub fn half_laplacian_line_at<F: LineFunction + ?Sized>(
    f: &F,
    points: &[f64],
    cfg: &PvQuadratureConfig,
) -> Result<Vec<Complex64>> {
    points
        .par_iter()
        .map(|&x| half_laplacian_line(f, x, cfg))
        .collect()
}

/// Closed-form interaction potential `2 / (x² + 1)` of the standard bubble.
pub fn potential(x: f64) -> f64 {
    2.0 / (x * x + 1.0)
}

/// `(1/2π) ∫ |u(x) - u(y)|² / (x - y)² dy` by quadrature.
///
/// For the standard bubble this is the potential `2/(x²+1)`.
pub fn potential_quadrature<F: LineFunction + ?Sized>(u: &F, x: f64, cfg: &PvQuadratureConfig) -> Result<f64> {
    cfg.validate()?;
    cfg.check_window(x, u.radius())?;
    let center = u.value(x);
    let value = paired_integral(x, cfg, tail_applies(u, cfg), |t| {
        Complex64::new((center - u.value(x + t)).norm_sqr() + (center - u.value(x - t)).norm_sqr(), 0.0)
    });
    Ok(value.re / (2.0 * PI))
}

/// `(1/π) ∫ (a(x) - a(y)) · (b(x) - b(y)) / (x - y)² dy`, with `·` the real
/// inner product of ℝ² ≅ ℂ.
pub fn double_difference<A, B>(a: &A, b: &B, x: f64, cfg: &PvQuadratureConfig) -> Result<f64>
where
    A: LineFunction + ?Sized,
    B: LineFunction + ?Sized,
{
    cfg.validate()?;
    cfg.check_window(x, a.radius().min(b.radius()))?;
    let (a0, b0) = (a.value(x), b.value(x));
    let dot = |p: Complex64, q: Complex64| p.re * q.re + p.im * q.im;
    let tail = cfg.tail == TailModel::InverseSquare && a.limit().is_some() && b.limit().is_some();
    let value = paired_integral(x, cfg, tail, |t| {
        let plus = dot(a0 - a.value(x + t), b0 - b.value(x + t));
        let minus = dot(a0 - a.value(x - t), b0 - b.value(x - t));
        Complex64::new(plus + minus, 0.0)
    });
    Ok(value.re / PI)
}
