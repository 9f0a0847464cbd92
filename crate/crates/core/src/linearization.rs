//! The linearized operator `L₀` around the standard bubble `U`, its lift to
//! a complex equation on the circle, and the mode-space kernel computation.
//!
//! Tangent fields `v : ℝ → T_U S¹` are stored as complex samples `v₁ + i v₂`.
//! Lifting goes through the Cayley chart `z(x) = U(x)`, so that the angle of
//! `z` is the angle of `U` and `w = ṽ₁ + i ṽ₂` satisfies
//! `(-Δ)^{1/2} w = 2w + z² (-Δ)^{1/2} w̄` exactly when `L₀ v = 0`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bubbles::{evaluate_bubble, BubbleParams};
use crate::conformal::{cayley, lift_composition, pull_composition, Chart};
use crate::error::{Error, Result};
use crate::line::{LineField, LineGrid};
use crate::nonlocal::{double_difference, half_laplacian_line, potential, potential_quadrature, PvQuadratureConfig};
use crate::spectral::{analyze, conjugate, half_laplacian_multiplier, modulate, CircleGrid, SpectralField};

const TANGENCY_TOL: f64 = 1e-10;
const GAP_REQUIRED: f64 = 1e6;

/// The standard bubble `U(x) = ((x² - 1) - 2ix) / (x² + 1)`.
pub fn standard_bubble(x: f64) -> Complex64 {
    cayley(x)
}

fn dot(a: Complex64, b: Complex64) -> f64 {
    a.re * b.re + a.im * b.im
}

/// Closed forms of the three symmetry-generated kernel fields.
pub fn kernel_field(i: usize, x: f64) -> Complex64 {
    let d = x * x + 1.0;
    match i {
        1 => Complex64::new(2.0 * x, x * x - 1.0) / d,
        2 => Complex64::new(-4.0 * x, 2.0 * (1.0 - x * x)) / (d * d),
        3 => Complex64::new(-4.0 * x * x, 2.0 * x * (1.0 - x * x)) / (d * d),
        _ => panic!("kernel field index must be 1, 2 or 3"),
    }
}

/// Value of the kernel field at infinity.
pub fn kernel_field_limit(i: usize) -> Complex64 {
    if i == 1 {
        Complex64::new(0.0, 1.0)
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// A line field with `v(x_j) · U(x_j) = 0` at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentField {
    field: LineField,
}

impl TangentField {
    pub fn new(field: LineField) -> Result<Self> {
        for (index, (&x, &v)) in field.grid().nodes().iter().zip(field.values()).enumerate() {
            let d = dot(v, standard_bubble(x));
            if d.abs() > TANGENCY_TOL {
                return Err(Error::NotTangent { index, dot: d });
            }
        }
        Ok(Self { field })
    }

    pub fn from_fn<F: Fn(f64) -> Complex64>(grid: Arc<LineGrid>, v: F, limit: Option<Complex64>) -> Result<Self> {
        Self::new(LineField::sample(grid, v, limit)?)
    }

    /// `v = ρ · iU` for a real profile `ρ`, tangent by construction.
    pub fn from_profile<F: Fn(f64) -> f64>(grid: Arc<LineGrid>, rho: F, limit: Option<Complex64>) -> Result<Self> {
        Self::from_fn(grid, |x| Complex64::new(0.0, rho(x)) * standard_bubble(x), limit)
    }

    /// One of `Z₁, Z₂, Z₃` sampled on the grid.
    pub fn kernel(i: usize, grid: Arc<LineGrid>) -> Result<Self> {
        if !(1..=3).contains(&i) {
            return Err(Error::InvalidParameter(format!("kernel field index must be 1, 2 or 3, got {i}")));
        }
        Self::from_fn(grid, |x| kernel_field(i, x), Some(kernel_field_limit(i)))
    }

    pub fn field(&self) -> &LineField {
        &self.field
    }

    pub fn grid(&self) -> &Arc<LineGrid> {
        self.field.grid()
    }

    pub fn values(&self) -> &[Complex64] {
        self.field.values()
    }
}

/// Values of an operator at the grid nodes inside a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowField {
    pub points: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl WindowField {
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest `|value · U|` over the window.
    pub fn max_normal_component(&self) -> f64 {
        self.points
            .iter()
            .zip(&self.values)
            .map(|(&x, &v)| dot(v, standard_bubble(x)).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_difference(&self, other: &WindowField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

fn window_nodes(v: &TangentField, cfg: &PvQuadratureConfig, window: Option<f64>) -> Result<Vec<usize>> {
    cfg.validate()?;
    let grid = v.grid();
    let usable = cfg.usable_window(grid.radius());
    let window = window.unwrap_or(usable);
    if window > usable * (1.0 + 1e-12) || window < 0.0 {
        return Err(Error::QuadratureWindow {
            x: window,
            truncation: cfg.truncation,
            radius: grid.radius(),
        });
    }
    Ok(grid.window_indices(window))
}

/// `L₀v = (-Δ)^{1/2}v - ((1/2π)∫|U(x)-U(y)|²/(x-y)² dy) v
///        - ((1/π)∫(U(x)-U(y))·(v(x)-v(y))/(x-y)² dy) U`,
/// every integral by quadrature, at the nodes with `|x| ≤ window`
/// (the whole usable window when `None`).
pub fn apply_l0_defining(v: &TangentField, cfg: &PvQuadratureConfig, window: Option<f64>) -> Result<WindowField> {
    let idx = window_nodes(v, cfg, window)?;
    let u = BubbleParams::standard();
    let field = v.field();
    let grid = v.grid();
    let values: Result<Vec<Complex64>> = idx
        .par_iter()
        .map(|&i| {
            let x = grid.nodes()[i];
            let lap = half_laplacian_line(field, x, cfg)?;
            let pot = potential_quadrature(&u, x, cfg)?;
            let coupling = double_difference(&u, field, x, cfg)?;
            Ok(lap - field.values()[i] * pot - evaluate_bubble(&u, x) * coupling)
        })
        .collect();
    Ok(WindowField {
        points: idx.iter().map(|&i| grid.nodes()[i]).collect(),
        values: values?,
    })
}

/// `L₀v = (-Δ)^{1/2}v - (2/(x²+1)) v - ((-Δ)^{1/2}v · U) U`.
pub fn apply_l0_simplified(v: &TangentField, cfg: &PvQuadratureConfig, window: Option<f64>) -> Result<WindowField> {
    let idx = window_nodes(v, cfg, window)?;
    let field = v.field();
    let grid = v.grid();
    let values: Result<Vec<Complex64>> = idx
        .par_iter()
        .map(|&i| {
            let x = grid.nodes()[i];
            let lap = half_laplacian_line(field, x, cfg)?;
            let u = standard_bubble(x);
            Ok(lap - field.values()[i] * potential(x) - u * dot(lap, u))
        })
        .collect();
    Ok(WindowField {
        points: idx.iter().map(|&i| grid.nodes()[i]).collect(),
        values: values?,
    })
}

/// `w = ṽ₁ + i ṽ₂` as Fourier modes in `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexCircleField {
    pub modes: SpectralField,
}

impl ComplexCircleField {
    pub fn new(modes: SpectralField) -> Self {
        Self { modes }
    }

    /// Largest `|Re(w z̄)|` over the nodes of `grid`.
    pub fn max_normal_component(&self, grid: &CircleGrid) -> f64 {
        (0..grid.len())
            .map(|j| {
                let theta = grid.node(j);
                let z = Complex64::from_polar(1.0, theta);
                (self.modes.eval_at(theta) * z.conj()).re.abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Composition lift through the Cayley chart onto `4N` circle nodes,
/// keeping modes `|k| ≤ N`. The pole node takes the field's value at
/// infinity; without one the lift is refused.
pub fn lift_to_complex(v: &TangentField, band: usize) -> Result<ComplexCircleField> {
    let grid = CircleGrid::new(4 * band.max(1))?;
    let samples = lift_composition(v.field(), &grid, Chart::Cayley)?;
    Ok(ComplexCircleField::new(analyze(&grid, &samples, band)?))
}

/// Inverse of [`lift_to_complex`]: `v(x) = w(z(x))` on the line grid.
pub fn push_to_tangent(w: &ComplexCircleField, line: Arc<LineGrid>) -> Result<TangentField> {
    let grid = CircleGrid::for_band(w.modes.band());
    let samples = crate::spectral::synthesize(&w.modes, &grid);
    TangentField::new(pull_composition(&samples, &grid, Chart::Cayley, line)?)
}

/// `(-Δ)^{1/2}w - 2w - z²(-Δ)^{1/2}w̄` in coefficient space.
pub fn complex_residual_field(w: &SpectralField) -> SpectralField {
    let hw = half_laplacian_multiplier(w);
    let coupled = modulate(&conjugate(&hw), 2);
    hw.sub(&w.scale(Complex64::new(2.0, 0.0))).sub(&coupled)
}

/// ℓ² norm of [`complex_residual_field`].
pub fn complex_residual(w: &ComplexCircleField) -> f64 {
    complex_residual_field(&w.modes).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquationFamily {
    /// `(|k| - 2) a_k - |k - 2| ā_{2-k} = 0`.
    Recurrence,
    /// `a_k + ā_{2-k} = 0`.
    Tangency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Re,
    Im,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowTag {
    pub family: EquationFamily,
    pub k: i64,
    pub component: Component,
}

/// Coefficients `(c_self, c_partner)` of `c_self a_k - c_partner ā_{2-k} = 0`.
pub fn recurrence_coefficients(k: i64) -> (f64, f64) {
    ((k.abs() - 2) as f64, (k - 2).abs() as f64)
}

/// Real-linear encoding of both equation families for `|k| ≤ N`.
///
/// Unknowns are ordered `(Re a_{-N}, Im a_{-N}, ..., Re a_N, Im a_N)`.
/// Conjugation is the signed permutation `(Re, Im) → (Re, -Im)`. Partners
/// `ā_{2-k}` with `|2 - k| > N` are dropped. At `k = 1` the unknown is its
/// own partner, so the two contributions merge into one entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSystem {
    pub band: usize,
    pub matrix: DMatrix<f64>,
    pub rows: Vec<RowTag>,
}

impl ModeSystem {
    pub fn unknowns(&self) -> usize {
        2 * (2 * self.band + 1)
    }

    /// Column of `Re a_k`; `Im a_k` is the next one.
    pub fn column(&self, k: i64) -> usize {
        2 * (k + self.band as i64) as usize
    }

    pub fn row_index(&self, family: EquationFamily, k: i64, component: Component) -> Option<usize> {
        self.rows
            .iter()
            .position(|r| r.family == family && r.k == k && r.component == component)
    }

    /// Packs modes `|k| ≤ N` of a field into the unknown vector.
    pub fn encode(&self, field: &SpectralField) -> DVector<f64> {
        let mut out = DVector::zeros(self.unknowns());
        for k in -(self.band as i64)..=self.band as i64 {
            let a = field.coeff(k);
            let c = self.column(k);
            out[c] = a.re;
            out[c + 1] = a.im;
        }
        out
    }

    pub fn decode(&self, vector: &[f64]) -> SpectralField {
        let coeffs = vector.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
        SpectralField::from_coeffs(self.band, coeffs).expect("vector length matches the band")
    }
}

pub fn assemble_mode_system(band: usize) -> Result<ModeSystem> {
    if band < 3 {
        return Err(Error::BandTooSmall { band, min: 3 });
    }
    let n = band as i64;
    let unknowns = 2 * (2 * band + 1);
    let mut rows = Vec::with_capacity(2 * unknowns);
    let mut matrix = DMatrix::zeros(2 * unknowns, unknowns);
    let col = |k: i64| 2 * (k + n) as usize;
    for k in -n..=n {
        let partner = 2 - k;
        let in_range = partner.abs() <= n;
        for (family, c_self, c_partner) in [
            (EquationFamily::Recurrence, recurrence_coefficients(k).0, -recurrence_coefficients(k).1),
            (EquationFamily::Tangency, 1.0, 1.0),
        ] {
            // c_self a_k + c_partner ā_{2-k}
            let (re_row, im_row) = (rows.len(), rows.len() + 1);
            rows.push(RowTag { family, k, component: Component::Re });
            rows.push(RowTag { family, k, component: Component::Im });
            matrix[(re_row, col(k))] += c_self;
            matrix[(im_row, col(k) + 1)] += c_self;
            if in_range {
                matrix[(re_row, col(partner))] += c_partner;
                matrix[(im_row, col(partner) + 1)] -= c_partner;
            }
        }
    }
    Ok(ModeSystem { band, matrix, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub band: usize,
    pub zero_threshold: f64,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub dimension: usize,
    /// Smallest retained over largest discarded singular value.
    pub gap_ratio: f64,
    pub degenerate: bool,
    /// Orthonormal kernel vectors in [`ModeSystem`] coordinates.
    pub basis: Vec<Vec<f64>>,
    /// `‖M b‖` per basis vector.
    pub system_residuals: Vec<f64>,
    /// [`complex_residual`] of each basis vector read as modes.
    pub complex_residuals: Vec<f64>,
}

pub const DEFAULT_ZERO_THRESHOLD: f64 = 1e-8;

pub fn solve_kernel(system: &ModeSystem, zero_threshold: f64) -> Result<KernelReport> {
    if !(zero_threshold > 0.0 && zero_threshold < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "zero threshold must lie in (0, 1), got {zero_threshold}"
        )));
    }
    if system.band < 3 {
        return Err(Error::BandTooSmall { band: system.band, min: 3 });
    }
    let svd = system.matrix.clone().svd(false, true);
    let v_t = svd.v_t.ok_or(Error::SvdFailed)?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let sigma_max = singular_values[0];
    let rank = singular_values
        .iter()
        .take_while(|&&s| s >= zero_threshold * sigma_max)
        .count();
    let dimension = singular_values.len() - rank;
    let gap_ratio = if dimension == 0 || rank == 0 {
        f64::INFINITY
    } else {
        singular_values[rank - 1] / singular_values[rank].max(f64::MIN_POSITIVE)
    };
    let basis: Vec<Vec<f64>> = order[rank..]
        .iter()
        .map(|&i| v_t.row(i).iter().copied().collect())
        .collect();
    let system_residuals = basis
        .iter()
        .map(|b| (&system.matrix * DVector::from_column_slice(b)).norm())
        .collect();
    let complex_residuals = basis
        .iter()
        .map(|b| complex_residual(&ComplexCircleField::new(system.decode(b))))
        .collect();
    Ok(KernelReport {
        band: system.band,
        zero_threshold,
        singular_values,
        dimension,
        gap_ratio,
        degenerate: gap_ratio < GAP_REQUIRED,
        basis,
        system_residuals,
        complex_residuals,
    })
}

/// `iz`, `(i/2)(z - 1)²`, `(z² - 1)/2`.
pub fn reference_kernel_modes() -> [SpectralField; 3] {
    let c = Complex64::new;
    [
        SpectralField::from_modes(2, &[(1, c(0.0, 1.0))]),
        SpectralField::from_modes(2, &[(0, c(0.0, 0.5)), (1, c(0.0, -1.0)), (2, c(0.0, 0.5))]),
        SpectralField::from_modes(2, &[(0, c(-0.5, 0.0)), (2, c(0.5, 0.0))]),
    ]
}

/// Principal angles between the column spans of `a` and `b`, ascending.
///
/// Cosines come from `Q_aᵀ Q_b` and sines from `Q_b - Q_a Q_aᵀ Q_b`; each angle
/// uses whichever is better conditioned, so tiny angles keep full precision.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    if a.nrows() != b.nrows() || a.ncols() == 0 || b.ncols() == 0 {
        return Err(Error::InvalidParameter(format!(
            "principal angles need non-empty bases of equal length, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let cross = qa.transpose() * &qb;
    let mut cosines: Vec<f64> = cross.singular_values().iter().map(|c| c.min(1.0)).collect();
    cosines.sort_by(|x, y| y.total_cmp(x));
    let residual = &qb - &qa * &cross;
    let mut sines: Vec<f64> = residual.singular_values().iter().map(|s| s.min(1.0)).collect();
    sines.sort_by(f64::total_cmp);
    let k = cosines.len().min(sines.len());
    Ok((0..k)
        .map(|i| {
            if cosines[i] > std::f64::consts::FRAC_1_SQRT_2 {
                sines[i].asin()
            } else {
                cosines[i].acos()
            }
        })
        .collect())
}

/// Real coordinates `(a, b, c)` of a kernel element in the reference basis,
/// and the residual of `i(a - b) = a₁`, `c/2 + (i/2) b = a₂`, `a₀ = -ā₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelCoordinates {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub relation_residual: f64,
}

pub fn kernel_coordinates(w: &SpectralField) -> KernelCoordinates {
    let (a0, a1, a2) = (w.coeff(0), w.coeff(1), w.coeff(2));
    let b = 2.0 * a2.im;
    let c = 2.0 * a2.re;
    let a = a1.im + b;
    let i = Complex64::new(0.0, 1.0);
    let r1 = (i * (a - b) - a1).norm();
    let r2 = (Complex64::new(c / 2.0, b / 2.0) - a2).norm();
    let r0 = (a0 + a2.conj()).norm();
    KernelCoordinates {
        a,
        b,
        c,
        relation_residual: r0.max(r1).max(r2),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub mode_angles: Vec<f64>,
    pub line_angles: Vec<f64>,
    pub coordinates: Vec<KernelCoordinates>,
    /// Largest basis coefficient outside `k ∈ {0, 1, 2}`.
    pub off_support: f64,
}

fn line_matrix(columns: &[Vec<Complex64>]) -> DMatrix<f64> {
    let rows = 2 * columns[0].len();
    DMatrix::from_fn(rows, columns.len(), |r, c| {
        let v = columns[c][r / 2];
        if r % 2 == 0 {
            v.re
        } else {
            v.im
        }
    })
}

/// Compares a three-dimensional kernel with `span{iz, (i/2)(z-1)², (z²-1)/2}`
/// in mode space, and with `span{Z₁, Z₂, Z₃}` after pushing to the line
/// nodes `|x| ≤ window`.
pub fn correspondence_check(report: &KernelReport, line: Arc<LineGrid>, window: f64) -> Result<Correspondence> {
    if report.dimension != 3 {
        return Err(Error::KernelDimension {
            expected: 3,
            found: report.dimension,
        });
    }
    let system = assemble_mode_system(report.band)?;
    let kernel = DMatrix::from_fn(system.unknowns(), 3, |r, c| report.basis[c][r]);
    let reference_modes = reference_kernel_modes();
    let mut reference = DMatrix::zeros(system.unknowns(), 3);
    for (c, w) in reference_modes.iter().enumerate() {
        reference.set_column(c, &system.encode(w));
    }
    let mode_angles = principal_angles(&kernel, &reference)?;

    let idx = line.window_indices(window);
    let fields: Vec<SpectralField> = report.basis.iter().map(|b| system.decode(b)).collect();
    let mut pushed = Vec::with_capacity(3);
    for w in &fields {
        let v = push_to_tangent(&ComplexCircleField::new(w.clone()), line.clone())?;
        pushed.push(idx.iter().map(|&i| v.values()[i]).collect::<Vec<_>>());
    }
    let closed: Vec<Vec<Complex64>> = (1..=3)
        .map(|k| idx.iter().map(|&i| kernel_field(k, line.nodes()[i])).collect())
        .collect();
    let line_angles = principal_angles(&line_matrix(&pushed), &line_matrix(&closed))?;

    let off_support = fields
        .iter()
        .flat_map(|w| w.modes().filter(|(k, _)| !(0..=2).contains(k)).map(|(_, a)| a.norm()))
        .fold(0.0, f64::max);
    Ok(Correspondence {
        mode_angles,
        line_angles,
        coordinates: fields.iter().map(kernel_coordinates).collect(),
        off_support,
    })
}

/// Reference non-kernel tangent field `iU / (1 + x²)²`.
///
/// Kernel fields are `iU ρ` with `ρ ∈ span{1, 1/(1 + x²), x/(1 + x²)}`
/// (`Z₁ = iU`, `Z₂ = -2iU/(1 + x²)`, `Z₃ = -2iUx/(1 + x²)`); this profile is not.
pub fn control_field(grid: Arc<LineGrid>) -> Result<TangentField> {
    TangentField::from_profile(grid, |x| 1.0 / (1.0 + x * x).powi(2), Some(Complex64::new(0.0, 0.0)))
}

/// Tangent field `iU · ρ` with `ρ` a random combination of decaying profiles
/// `1/(1 + s²)` and `s/(1 + s²)` at `s = (x - c)/w`.
pub fn random_tangent_field<R: rand::Rng + ?Sized>(grid: Arc<LineGrid>, rng: &mut R) -> Result<TangentField> {
    let terms: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(0.5..2.0),
            )
        })
        .collect();
    let rho = move |x: f64| {
        terms
            .iter()
            .map(|&(p, q, c, w)| {
                let s = (x - c) / w;
                (p + q * s) / (1.0 + s * s)
            })
            .sum::<f64>()
    };
    TangentField::from_profile(grid, rho, Some(Complex64::new(0.0, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubbles::symmetry_generator;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn kernel_fields_are_tangent() {
        let grid = Arc::new(LineGrid::default());
        for i in 1..=3 {
            assert!(TangentField::kernel(i, grid.clone()).is_ok());
        }
        let radial = TangentField::from_fn(grid, standard_bubble, Some(c(1.0, 0.0)));
        assert!(matches!(radial, Err(Error::NotTangent { .. })));
    }

    #[test]
    fn lifts_of_kernel_fields() {
        let grid = Arc::new(LineGrid::default());
        let expected = reference_kernel_modes();
        for i in 1..=3 {
            let w = lift_to_complex(&TangentField::kernel(i, grid.clone()).unwrap(), 8).unwrap();
            let err = w.modes.sub(&expected[i - 1]).sup_coeff();
            assert!(err < 1e-13, "Z{i}: {err}");
            assert!(w.max_normal_component(&CircleGrid::for_band(8)) < 1e-13);
        }
    }

    #[test]
    fn lift_round_trip() {
        let grid = Arc::new(LineGrid::default());
        let v = TangentField::kernel(3, grid.clone()).unwrap();
        let back = push_to_tangent(&lift_to_complex(&v, 8).unwrap(), grid).unwrap();
        let err = v
            .values()
            .iter()
            .zip(back.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-13, "{err}");
    }

    #[test]
    fn lift_without_limit_is_refused() {
        let grid = Arc::new(LineGrid::default());
        let v = TangentField::from_profile(grid, |x| x / (1.0 + x * x), None).unwrap();
        assert_eq!(lift_to_complex(&v, 8).unwrap_err(), Error::PoleUndetermined);
    }

    #[test]
    fn complex_residual_examples() {
        for w in reference_kernel_modes() {
            assert!(complex_residual(&ComplexCircleField::new(w)) <= 1e-15);
        }
        for k in [-3, 3, 4] {
            let r = complex_residual(&ComplexCircleField::new(SpectralField::from_modes(0, &[(k, c(1.0, 0.0))])));
            assert!(r >= 0.5, "k = {k}: {r}");
        }
        let r = complex_residual(&ComplexCircleField::new(SpectralField::from_modes(0, &[(3, c(1.0, 0.0))])));
        assert!((r - 10f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn unified_coefficients_match_three_cases() {
        for k in -32i64..=32 {
            let (s, p) = recurrence_coefficients(k);
            if k < 0 {
                assert_eq!((s, p), ((-k - 2) as f64, (2 - k) as f64));
            } else if k <= 2 {
                assert_eq!((s, p), ((k - 2) as f64, (2 - k) as f64));
            } else {
                // (k-2) a_k = (k-2) ā_{2-k}, i.e. a_k = ā_{2-k}
                assert_eq!(s, p);
                assert!(s > 0.0);
            }
        }
    }

    #[test]
    fn mode_system_rows() {
        let m = assemble_mode_system(5).unwrap();
        assert_eq!(m.matrix.nrows(), 4 * 11);
        assert_eq!(m.rows.len(), 4 * 11);
        let entry = |fam, k, comp, col_k: i64, im: bool| {
            m.matrix[(m.row_index(fam, k, comp).unwrap(), m.column(col_k) + im as usize)]
        };
        use Component::*;
        use EquationFamily::*;
        // -a₁ = ā₁ and a₁ = -ā₁ both read Re a₁ = 0
        assert_eq!(entry(Recurrence, 1, Re, 1, false), -2.0);
        assert_eq!(entry(Recurrence, 1, Im, 1, true), 0.0);
        assert_eq!(entry(Tangency, 1, Re, 1, false), 2.0);
        assert_eq!(entry(Tangency, 1, Im, 1, true), 0.0);
        // a₅ = ā₋₃ and a₅ = -ā₋₃
        assert_eq!(entry(Recurrence, 5, Re, 5, false), 3.0);
        assert_eq!(entry(Recurrence, 5, Re, -3, false), -3.0);
        assert_eq!(entry(Recurrence, 5, Im, -3, true), 3.0);
        assert_eq!(entry(Tangency, 5, Re, -3, false), 1.0);
        assert_eq!(entry(Tangency, 5, Im, -3, true), -1.0);
        // -2a₀ = 2ā₂ and a₀ = -ā₂ coincide up to scale
        let rec = m.row_index(Recurrence, 0, Re).unwrap();
        let tan = m.row_index(Tangency, 0, Re).unwrap();
        assert_eq!(m.matrix.row(rec), m.matrix.row(tan) * -2.0);
        // the k = 2 recurrence row is identically zero
        let zero = m.row_index(Recurrence, 2, Re).unwrap();
        assert!(m.matrix.row(zero).iter().all(|&v| v == 0.0));
        assert_eq!(assemble_mode_system(2).unwrap_err(), Error::BandTooSmall { band: 2, min: 3 });
    }

    #[test]
    fn kernel_is_three_dimensional() {
        for n in [3, 5, 8, 16, 32] {
            let report = solve_kernel(&assemble_mode_system(n).unwrap(), DEFAULT_ZERO_THRESHOLD).unwrap();
            assert_eq!(report.dimension, 3, "N = {n}");
            assert!(report.gap_ratio >= 1e10, "N = {n}: {}", report.gap_ratio);
            assert!(!report.degenerate);
            assert!(report.singular_values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn kernel_matches_reference_span() {
        let report = solve_kernel(&assemble_mode_system(5).unwrap(), DEFAULT_ZERO_THRESHOLD).unwrap();
        let corr = correspondence_check(&report, Arc::new(LineGrid::default()), 100.0).unwrap();
        assert!(corr.mode_angles.iter().all(|&a| a <= 1e-12), "{:?}", corr.mode_angles);
        assert!(corr.line_angles.iter().all(|&a| a <= 1e-6), "{:?}", corr.line_angles);
        assert!(corr.off_support <= 1e-12);
        assert!(corr.coordinates.iter().all(|k| k.relation_residual <= 1e-12));
    }

    #[test]
    fn principal_angles_of_known_planes() {
        let a = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let t: f64 = 0.3;
        let b = DMatrix::from_column_slice(3, 1, &[t.cos(), t.sin(), 0.0]);
        let angles = principal_angles(&a, &b).unwrap();
        assert!((angles[0] - t).abs() < 1e-15);
        let tiny: f64 = 1e-13;
        let b = DMatrix::from_column_slice(3, 1, &[tiny.cos(), tiny.sin(), 0.0]);
        assert!((principal_angles(&a, &b).unwrap()[0] - tiny).abs() < 1e-20);
    }

    #[test]
    fn kernel_profiles() {
        let grid = Arc::new(LineGrid::default());
        let profiles: [fn(f64) -> f64; 3] = [|_| 1.0, |x| -2.0 / (1.0 + x * x), |x| -2.0 * x / (1.0 + x * x)];
        for (i, rho) in profiles.iter().enumerate() {
            let v = TangentField::from_profile(grid.clone(), rho, None).unwrap();
            for (&x, &value) in grid.nodes().iter().zip(v.values()) {
                assert!((value - kernel_field(i + 1, x)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn control_field_is_not_in_kernel() {
        let grid = Arc::new(LineGrid::default());
        let w = lift_to_complex(&control_field(grid).unwrap(), 64).unwrap();
        assert!(complex_residual(&w) > 0.1);
    }

    #[test]
    fn simplified_output_is_tangent() {
        let grid = Arc::new(LineGrid::default());
        let v = control_field(grid).unwrap();
        let out = apply_l0_simplified(&v, &PvQuadratureConfig::default(), Some(10.0)).unwrap();
        assert!(out.max_normal_component() < 1e-14, "{}", out.max_normal_component());
    }

    #[test]
    fn generator_lifts_to_kernel() {
        let grid = Arc::new(LineGrid::default());
        let z1 = symmetry_generator(1, 1e-4, grid).unwrap();
        let w = lift_to_complex(&z1, 8).unwrap();
        assert!(complex_residual(&w) < 1e-7);
    }
}
