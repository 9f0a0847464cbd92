//! Sampled fields on the real line.
//!
//! [`LineGrid`] places nodes at `x = s / (1 - s²)` for uniformly spaced `s`.
//! Fields that decay algebraically at infinity are smooth functions of `s`,
//! so local polynomial interpolation in `s` stays accurate all the way out to
//! the truncation radius.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const STENCIL: usize = 8;
// Barycentric weights (-1)^i C(7, i) for eight equispaced points.
const BARY: [f64; STENCIL] = [1.0, -7.0, 21.0, -35.0, 35.0, -21.0, 7.0, -1.0];

/// Symmetric graded grid on `[-radius, radius]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    radius: f64,
    s_max: f64,
    ds: f64,
}

impl Default for LineGrid {
    fn default() -> Self {
        Self::graded(2001, 1000.0).expect("default grid parameters are valid")
    }
}

impl LineGrid {
    /// `count` nodes (odd, so that 0 is a node) spread over `[-radius, radius]`.
    pub fn graded(count: usize, radius: f64) -> Result<Self> {
        if count < 2 * STENCIL + 1 || count.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "line grid needs an odd node count of at least {}, got {count}",
                2 * STENCIL + 1
            )));
        }
        if !(radius.is_finite() && radius > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "line grid radius must be finite and > 1, got {radius}"
            )));
        }
        let s_max = s_of(radius);
        let half = count / 2;
        let ds = s_max / half as f64;
        let mut nodes = vec![0.0; count];
        let mut weights = vec![0.0; count];
        for i in 0..=half {
            let s = if i == half { s_max } else { i as f64 * ds };
            let x = if i == half { radius } else { x_of(s) };
            let mut w = ds * dx_ds(s);
            if i == half {
                w *= 0.5;
            }
            nodes[half + i] = x;
            nodes[half - i] = -x;
            weights[half + i] = w;
            weights[half - i] = w;
        }
        Ok(Self {
            nodes,
            weights,
            radius,
            s_max,
            ds,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Trapezoidal weights in `s`, mapped to `x`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Indices of nodes with `|x| ≤ window`.
    pub fn window_indices(&self, window: f64) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].abs() <= window)
            .collect()
    }

    pub fn sample<F: Fn(f64) -> Complex64>(&self, f: F) -> Vec<Complex64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }

    /// Eight-point Lagrange interpolation in the `s` coordinate.
    pub fn interpolate(&self, values: &[Complex64], x: f64) -> Result<Complex64> {
        if !(x.abs() <= self.radius * (1.0 + 1e-12)) {
            return Err(Error::OutsideGrid {
                x,
                radius: self.radius,
            });
        }
        Ok(self.interpolate_unchecked(values, x))
    }

    pub(crate) fn interpolate_unchecked(&self, values: &[Complex64], x: f64) -> Complex64 {
        let n = self.nodes.len();
        let half = (n / 2) as f64;
        let pos = (s_of(x.clamp(-self.radius, self.radius)) / self.ds + half).clamp(0.0, (n - 1) as f64);
        let base = (pos.floor() as isize - (STENCIL as isize / 2 - 1))
            .clamp(0, (n - STENCIL) as isize) as usize;
        let u = pos - base as f64;
        let anchor = values[base];
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for (i, &w) in BARY.iter().enumerate() {
            let d = u - i as f64;
            if d == 0.0 {
                return values[base + i];
            }
            let c = w / d;
            num += (values[base + i] - anchor) * c;
            den += c;
        }
        anchor + num / den
    }
}

/// Grid coordinate: inverse of `x = s / (1 - s²)` on `(-1, 1)`.
pub fn s_of(x: f64) -> f64 {
    2.0 * x / (1.0 + (1.0 + 4.0 * x * x).sqrt())
}

pub fn x_of(s: f64) -> f64 {
    s / (1.0 - s * s)
}

fn dx_ds(s: f64) -> f64 {
    let d = 1.0 - s * s;
    (1.0 + s * s) / (d * d)
}

/// Anything that can be evaluated on (part of) the real line, with an
/// optional common limit at `x → ±∞`.
pub trait LineFunction: Sync {
    /// Value at `x`; callers stay within `[-radius(), radius()]`.
    fn value(&self, x: f64) -> Complex64;

    fn radius(&self) -> f64 {
        f64::INFINITY
    }

    /// Common limit at `±∞`, when known.
    fn limit(&self) -> Option<Complex64>;
}

/// A closed-form function of `x`.
pub struct Analytic<F> {
    f: F,
    limit: Option<Complex64>,
}

impl<F: Fn(f64) -> Complex64 + Sync> Analytic<F> {
    pub fn new(f: F, limit: Option<Complex64>) -> Self {
        Self { f, limit }
    }
}

impl<F: Fn(f64) -> Complex64 + Sync> LineFunction for Analytic<F> {
    fn value(&self, x: f64) -> Complex64 {
        (self.f)(x)
    }

    fn limit(&self) -> Option<Complex64> {
        self.limit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayClass {
    Bounded,
    /// `|f(x)| ≤ constant / (1 + x²)` at the outermost nodes.
    Decaying { constant: f64 },
}

/// Complex samples on a [`LineGrid`], with a decay tag and optional value at infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct LineField {
    grid: Arc<LineGrid>,
    values: Vec<Complex64>,
    decay: DecayClass,
    limit: Option<Complex64>,
}

impl LineField {
    pub fn bounded(grid: Arc<LineGrid>, values: Vec<Complex64>, limit: Option<Complex64>) -> Result<Self> {
        check_samples(&grid, &values)?;
        Ok(Self {
            grid,
            values,
            decay: DecayClass::Bounded,
            limit,
        })
    }

    /// Tags the field as decaying; rejects it when the outermost samples
    /// violate `|f| (1 + x²) ≤ constant`.
    pub fn decaying(grid: Arc<LineGrid>, values: Vec<Complex64>, constant: f64) -> Result<Self> {
        check_samples(&grid, &values)?;
        for i in [0, values.len() - 1] {
            let x = grid.nodes[i];
            let observed = values[i].norm() * (1.0 + x * x);
            if observed > constant {
                return Err(Error::NotDecaying {
                    x,
                    observed,
                    bound: constant,
                });
            }
        }
        Ok(Self {
            grid,
            values,
            decay: DecayClass::Decaying { constant },
            limit: Some(Complex64::new(0.0, 0.0)),
        })
    }

    /// Samples `f` at the grid nodes as a bounded field.
    pub fn sample<F: Fn(f64) -> Complex64>(grid: Arc<LineGrid>, f: F, limit: Option<Complex64>) -> Result<Self> {
        let values = grid.sample(f);
        Self::bounded(grid, values, limit)
    }

    pub fn grid(&self) -> &Arc<LineGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn decay(&self) -> DecayClass {
        self.decay
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn interpolate(&self, x: f64) -> Result<Complex64> {
        self.grid.interpolate(&self.values, x)
    }
}

impl LineFunction for LineField {
    fn value(&self, x: f64) -> Complex64 {
        self.grid.interpolate_unchecked(&self.values, x)
    }

    fn radius(&self) -> f64 {
        self.grid.radius
    }

    fn limit(&self) -> Option<Complex64> {
        self.limit
    }
}

fn check_samples(grid: &LineGrid, values: &[Complex64]) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::SampleLength {
            expected: grid.len(),
            found: values.len(),
        });
    }
    if let Some(index) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFinite { index });
    }
    Ok(())
}
