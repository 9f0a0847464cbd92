//! Gradient descent for the half-harmonic energy of circle-valued fields on
//! the circle side of the Cayley chart, and Möbius fitting of the limits.
//!
//! Fields are unit-modulus samples on a [`CircleGrid`] of `M = 2N + 1` nodes.
//! The energy is `E(u) = π Σ_{|k| ≤ N} |k| |c_k|²` with `c_k` the discrete
//! Fourier coefficients, i.e. `E = ½ ⟨u, (-Δ)^{1/2} u⟩` in `L²(dθ)`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bubbles::{winding_number, BubbleComponent, BubbleParams};
use crate::conformal::Chart;
use crate::error::{Error, Result};
use crate::spectral::{analyze, half_laplacian_multiplier, synthesize, CircleGrid};

const UNIT_TOL: f64 = 1e-12;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizerConfig {
    /// Initial step `η` of every iteration, before halving.
    pub eta: f64,
    pub max_iters: usize,
    /// Stop once the `L²(dθ)` norm of the tangential gradient falls below this.
    pub tol: f64,
    pub band: usize,
    pub degree_watch: bool,
}

impl Default for MinimizerConfig {
    fn default() -> Self {
        Self {
            eta: 1.0 / 64.0,
            max_iters: 20_000,
            tol: 1e-6,
            band: 64,
            degree_watch: true,
        }
    }
}

impl MinimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("step size must be positive, got {}", self.eta)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.band < 1 {
            return Err(Error::BandTooSmall { band: self.band, min: 1 });
        }
        Ok(())
    }

    pub fn grid(&self) -> CircleGrid {
        CircleGrid::for_band(self.band)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowStatus {
    Converged,
    IterationCap,
    /// No halving of the step decreased the energy.
    LineSearchStalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub samples: Vec<Complex64>,
    pub iterations: usize,
    /// Energy after every accepted step, starting with the initial energy;
    /// later entries accumulate the directly computed energy changes.
    pub energy_trace: Vec<f64>,
    pub gradient_trace: Vec<f64>,
    pub degree: i64,
    pub status: FlowStatus,
}

impl FlowState {
    pub fn energy(&self) -> f64 {
        *self.energy_trace.last().expect("trace holds the initial energy")
    }

    pub fn gradient_norm(&self) -> f64 {
        *self.gradient_trace.last().expect("trace holds the initial gradient")
    }
}

fn check_unit(samples: &[Complex64]) -> Result<()> {
    for (index, v) in samples.iter().enumerate() {
        let modulus = v.norm();
        if !((modulus - 1.0).abs() <= UNIT_TOL) {
            return Err(Error::NotUnitModulus { index, modulus });
        }
    }
    Ok(())
}

fn band_of(grid: &CircleGrid) -> usize {
    (grid.len() - 1) / 2
}

fn spectral_energy(grid: &CircleGrid, samples: &[Complex64]) -> Result<f64> {
    let c = analyze(grid, samples, band_of(grid))?;
    Ok(PI * c.modes().map(|(k, a)| k.unsigned_abs() as f64 * a.norm_sqr()).sum::<f64>())
}

/// `π Σ_{|k| ≤ N} |k| |c_k|²` for unit samples on a grid of `2N + 1` nodes.
pub fn energy(grid: &CircleGrid, samples: &[Complex64]) -> Result<f64> {
    check_unit(samples)?;
    spectral_energy(grid, samples)
}

/// `L²(dθ)` inner product `∫ Re(ā b) dθ` by the trapezoid rule.
pub fn inner(grid: &CircleGrid, a: &[Complex64], b: &[Complex64]) -> f64 {
    grid.spacing() * a.iter().zip(b).map(|(p, q)| p.re * q.re + p.im * q.im).sum::<f64>()
}

pub fn l2_norm(grid: &CircleGrid, a: &[Complex64]) -> f64 {
    inner(grid, a, a).sqrt()
}

/// `E(v) - E(u)` as `π Σ |k| Re((c'_k - c_k) conj(c'_k + c_k))`, accurate
/// relative to the difference rather than to `E`.
fn energy_change(grid: &CircleGrid, u: &[Complex64], v: &[Complex64]) -> Result<f64> {
    let n = band_of(grid);
    let diff: Vec<Complex64> = v.iter().zip(u).map(|(a, b)| a - b).collect();
    let sum: Vec<Complex64> = v.iter().zip(u).map(|(a, b)| a + b).collect();
    let d = analyze(grid, &diff, n)?;
    let s = analyze(grid, &sum, n)?;
    Ok(PI * d
        .modes()
        .map(|(k, a)| k.unsigned_abs() as f64 * (a * s.coeff(k).conj()).re)
        .sum::<f64>())
}

fn euclidean_gradient(grid: &CircleGrid, samples: &[Complex64]) -> Result<Vec<Complex64>> {
    let c = analyze(grid, samples, band_of(grid))?;
    Ok(synthesize(&half_laplacian_multiplier(&c), grid))
}

fn project_tangent(g: &mut [Complex64], u: &[Complex64]) {
    for (gj, &uj) in g.iter_mut().zip(u) {
        *gj -= uj * (*gj * uj.conj()).re;
    }
}

/// `L²(dθ)` gradient `(-Δ)^{1/2} u`, projected pointwise onto the tangent line at `u`.
pub fn energy_gradient(grid: &CircleGrid, samples: &[Complex64]) -> Result<Vec<Complex64>> {
    check_unit(samples)?;
    let mut g = euclidean_gradient(grid, samples)?;
    project_tangent(&mut g, samples);
    Ok(g)
}

/// Pointwise normalization of `u + δ`; `None` when a sample vanishes.
pub fn retract(u: &[Complex64], delta: &[Complex64]) -> Option<Vec<Complex64>> {
    u.iter()
        .zip(delta)
        .map(|(&a, &d)| {
            let v = a + d;
            let m = v.norm();
            (m > 1e-12).then(|| v / m)
        })
        .collect()
}

fn check_degree(grid: &CircleGrid, samples: &[Complex64]) -> Result<i64> {
    if samples.len() != grid.len() {
        return Err(Error::SampleLength {
            expected: grid.len(),
            found: samples.len(),
        });
    }
    winding_number(samples)
}

/// Riemannian gradient descent with pointwise-normalization retraction and
/// step halving whenever the energy would increase.
pub fn descend(init: &[Complex64], cfg: &MinimizerConfig) -> Result<FlowState> {
    descend_with(init, cfg, |_, _| {})
}

/// [`descend`] with a callback `(iteration, energy)` after every accepted step.
pub fn descend_with<F: FnMut(usize, f64)>(init: &[Complex64], cfg: &MinimizerConfig, mut observe: F) -> Result<FlowState> {
    cfg.validate()?;
    let grid = cfg.grid();
    check_unit(init)?;
    let degree = check_degree(&grid, init)?;
    let mut u = init.to_vec();
    let mut e = spectral_energy(&grid, &u)?;
    let mut g = energy_gradient(&grid, &u)?;
    let mut g_norm = l2_norm(&grid, &g);
    let mut energy_trace = vec![e];
    let mut gradient_trace = vec![g_norm];
    let mut status = FlowStatus::IterationCap;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        if g_norm <= cfg.tol {
            status = FlowStatus::Converged;
            break;
        }
        let mut eta = cfg.eta;
        let mut accepted = None;
        let mut retraction_failures = 0;
        for _ in 0..MAX_HALVINGS {
            let delta: Vec<Complex64> = g.iter().map(|&gj| -gj * eta).collect();
            match retract(&u, &delta) {
                None => retraction_failures += 1,
                Some(candidate) => {
                    let change = energy_change(&grid, &u, &candidate)?;
                    if change <= 0.0 {
                        accepted = Some((candidate, e + change));
                        break;
                    }
                }
            }
            eta *= 0.5;
        }
        let Some((candidate, e_new)) = accepted else {
            if retraction_failures == MAX_HALVINGS {
                return Err(Error::RetractionFailed { iteration: iterations, step: eta });
            }
            status = FlowStatus::LineSearchStalled;
            break;
        };
        iterations += 1;
        if cfg.degree_watch {
            let d = winding_number(&candidate)?;
            if d != degree {
                return Err(Error::DegreeJump {
                    iteration: iterations,
                    from: degree,
                    to: d,
                });
            }
        }
        u = candidate;
        e = e_new;
        g = energy_gradient(&grid, &u)?;
        g_norm = l2_norm(&grid, &g);
        energy_trace.push(e);
        gradient_trace.push(g_norm);
        observe(iterations, e);
    }
    if status == FlowStatus::IterationCap && g_norm <= cfg.tol {
        status = FlowStatus::Converged;
    }
    let degree = winding_number(&u)?;
    Ok(FlowState {
        samples: u,
        iterations,
        energy_trace,
        gradient_trace,
        degree,
        status,
    })
}

/// `z^d · exp(i ε Σ_{m=1}^{3} (p_m cos mθ + q_m sin mθ) / m)` with random
/// `p_m, q_m ∈ [-1, 1]`.
pub fn random_initial_field<R: Rng + ?Sized>(grid: &CircleGrid, degree: i64, amplitude: f64, rng: &mut R) -> Vec<Complex64> {
    let coeffs: Vec<(f64, f64)> = (0..3).map(|_| (rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0))).collect();
    grid.sample(|theta| {
        let phase: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(m, &(p, q))| {
                let m = (m + 1) as f64;
                (p * (m * theta).cos() + q * (m * theta).sin()) / m
            })
            .sum();
        Complex64::from_polar(1.0, degree as f64 * theta + amplitude * phase)
    })
}

/// Smooth random tangent direction `i ρ u` with `ρ` a random low-mode profile.
pub fn random_tangent_direction<R: Rng + ?Sized>(grid: &CircleGrid, u: &[Complex64], rng: &mut R) -> Vec<Complex64> {
    let profile = random_initial_field(grid, 0, 1.0, rng);
    u.iter()
        .zip(profile)
        .map(|(&v, p)| Complex64::new(0.0, p.arg()) * v)
        .collect()
}

/// Largest relative error between central differences
/// `(E(R(u + hδ)) - E(R(u - hδ)))/2h` and `⟨∇E, δ⟩` over random tangent `δ`.
pub fn gradient_check<R: Rng + ?Sized>(
    grid: &CircleGrid,
    u: &[Complex64],
    directions: usize,
    h: f64,
    rng: &mut R,
) -> Result<f64> {
    let grad = energy_gradient(grid, u)?;
    let mut worst: f64 = 0.0;
    for _ in 0..directions {
        let delta = random_tangent_direction(grid, u, rng);
        let step = |s: f64| -> Result<f64> {
            let shifted: Vec<Complex64> = delta.iter().map(|d| d * s).collect();
            let moved = retract(u, &shifted).ok_or(Error::RetractionFailed { iteration: 0, step: s })?;
            energy(grid, &moved)
        };
        let fd = (step(h)? - step(-h)?) / (2.0 * h);
        let exact = inner(grid, &grad, &delta);
        worst = worst.max((fd - exact).abs() / exact.abs().max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

/// Samples of a bubble transported to the circle through the Cayley chart.
pub fn bubble_on_circle(p: &BubbleParams, grid: &CircleGrid) -> Vec<Complex64> {
    (0..grid.len())
        .map(|j| match Chart::Cayley.preimage(grid.node(j)).filter(|_| j != 0) {
            Some(x) => crate::bubbles::evaluate_bubble(p, x),
            None => p.limit(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobiusFit {
    pub params: BubbleParams,
    /// Sup-norm misfit over the circle nodes.
    pub residual: f64,
    pub member: bool,
}

pub const DEFAULT_FIT_THRESHOLD: f64 = 1e-4;

fn model(theta: f64, ln_lambda: f64, a: f64, x: Option<f64>) -> (Complex64, [Complex64; 3]) {
    let phase = Complex64::from_polar(1.0, theta);
    let i = Complex64::new(0.0, 1.0);
    match x {
        None => (phase, [i * phase, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)]),
        Some(x) => {
            let lambda = ln_lambda.exp();
            let y = lambda * (x - a);
            let q = Complex64::new(y, -1.0) / Complex64::new(y, 1.0);
            let dq = 2.0 * i / (Complex64::new(y, 1.0) * Complex64::new(y, 1.0));
            let b = phase * q;
            (b, [i * b, phase * dq * y, -phase * dq * lambda])
        }
    }
}

/// Least-squares fit of `e^{iϑ}(λ(x - a) - i)/(λ(x - a) + i)` to degree-one
/// circle samples.
///
/// The first two Fourier modes give a closed-form starting point (the lifted
/// bubble is the disk automorphism `e^{iφ}(z - α)/(1 - ᾱz)`), refined by
/// Levenberg–Marquardt in `(ϑ, ln λ, a)`.
pub fn fit_mobius(grid: &CircleGrid, samples: &[Complex64], threshold: f64) -> Result<MobiusFit> {
    check_unit(samples)?;
    let degree = check_degree(grid, samples)?;
    if degree != 1 {
        return Err(Error::DegreeMismatch { expected: 1, found: degree });
    }
    let coeffs = analyze(grid, samples, 1)?;
    let (c0, c1) = (coeffs.coeff(0), coeffs.coeff(1));
    let r = c0 / c1;
    let alpha = if r.norm() < 1e-300 {
        Complex64::new(0.0, 0.0)
    } else {
        let rho = (-1.0 + (1.0 + 4.0 * r.norm_sqr()).sqrt()) / (2.0 * r.norm());
        -r * (1.0 - rho * rho)
    };
    let one = Complex64::new(1.0, 0.0);
    let center = Complex64::new(0.0, 1.0) * (one + alpha) / (one - alpha);
    let mut params = Vector3::new(
        c1.arg() + ((one - alpha) / (one - alpha.conj())).arg(),
        (1.0 / center.im.max(1e-12)).ln(),
        center.re,
    );
    let points: Vec<Option<f64>> = (0..grid.len())
        .map(|j| if j == 0 { None } else { Chart::Cayley.preimage(grid.node(j)) })
        .collect();
    let misfit = |p: &Vector3<f64>| -> (f64, Matrix3<f64>, Vector3<f64>) {
        let mut cost = 0.0;
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (&x, &target) in points.iter().zip(samples) {
            let (value, grads) = model(p[0], p[1], p[2], x);
            let res = value - target;
            cost += res.norm_sqr();
            for a in 0..3 {
                jtr[a] += grads[a].re * res.re + grads[a].im * res.im;
                for b in 0..3 {
                    jtj[(a, b)] += grads[a].re * grads[b].re + grads[a].im * grads[b].im;
                }
            }
        }
        (cost, jtj, jtr)
    };
    let mut damping = 1e-3;
    let (mut cost, mut jtj, mut jtr) = misfit(&params);
    for _ in 0..200 {
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj;
            for d in 0..3 {
                a[(d, d)] *= 1.0 + damping;
            }
            let Some(step) = a.lu().solve(&(-jtr)) else {
                damping *= 10.0;
                continue;
            };
            let trial = params + step;
            let (c_new, jtj_new, jtr_new) = misfit(&trial);
            if c_new < cost {
                let small = step.norm() <= 1e-15 * (1.0 + params.norm());
                params = trial;
                cost = c_new;
                jtj = jtj_new;
                jtr = jtr_new;
                damping = (damping * 0.1).max(1e-12);
                improved = !small;
                break;
            }
            damping *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let fitted = BubbleParams::new(
        params[0].rem_euclid(2.0 * PI),
        vec![BubbleComponent {
            scale: params[1].exp(),
            center: params[2],
        }],
        false,
    )?;
    let residual = bubble_on_circle(&fitted, grid)
        .iter()
        .zip(samples)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    Ok(MobiusFit {
        params: fitted,
        residual,
        member: residual <= threshold,
    })
}
