//! The four verification and minimization runs behind the command line.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::bubbles::{
    el_residual, energy_gagliardo, energy_spectral, evaluate_bubble, symmetry_generator, BubbleParams,
    CircleValuedLineMap, SymmetryAction,
};
use crate::conformal::{chordal_sq, intertwine_residual, Chart};
use crate::error::{Error, Result};
use crate::line::{Analytic, LineGrid};
use crate::linearization::{
    apply_l0_defining, apply_l0_simplified, assemble_mode_system, control_field, correspondence_check,
    kernel_field, random_tangent_field, solve_kernel, TangentField,
};
use crate::minimizer::{descend, fit_mobius, gradient_check, random_initial_field, DEFAULT_FIT_THRESHOLD};
use crate::nonlocal::{half_laplacian_line, potential, potential_quadrature};
use crate::report::{write_trace, Check, Command, Report, RunConfig};
use crate::spectral::{half_laplacian_multiplier, half_laplacian_quadrature_all, synthesize, CircleGrid, SpectralField};

pub const KERNEL_GAP: f64 = 1e6;
pub const MODE_ANGLE_TOL: f64 = 1e-12;
pub const LINE_ANGLE_TOL: f64 = 1e-6;
pub const LINE_TOL: f64 = 1e-4;
pub const ENERGY_TOL: f64 = 1e-6;
pub const GAGLIARDO_TOL: f64 = 1e-3;
pub const POTENTIAL_TOL: f64 = 1e-6;
pub const CLOSED_FORM_TOL: f64 = 1e-5;
pub const GENERATOR_TOL: f64 = 1e-7;
pub const FORM_TOL: f64 = 1e-6;
pub const MINIMIZER_ENERGY_TOL: f64 = 1e-5;
pub const GRADIENT_CHECK_TOL: f64 = 1e-5;
pub const CONTROL_RATIO: f64 = 10.0;
/// Zero thresholds that must reproduce the kernel dimension.
pub const THRESHOLD_SWEEP: (f64, f64) = (1e-10, 1e-2);

/// Runs the configured command. Configuration errors come back as
/// `Err` before any computation starts.
pub fn run(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    let start = Instant::now();
    let (checks, data) = match cfg.command {
        Command::VerifyKernel => verify_kernel(cfg)?,
        Command::VerifyBubble => verify_bubble(cfg)?,
        Command::VerifyOperators => verify_operators(cfg)?,
        Command::Minimize => minimize(cfg)?,
    };
    let report = Report::new(cfg.clone(), checks, data, start.elapsed().as_secs_f64());
    if let Some(path) = &cfg.output {
        report.write(path)?;
    }
    Ok(report)
}

fn line_grid(cfg: &RunConfig) -> Result<Arc<LineGrid>> {
    Ok(Arc::new(LineGrid::graded(cfg.line.nodes, cfg.line.radius)?))
}

fn window(cfg: &RunConfig) -> f64 {
    cfg.quadrature.usable_window(cfg.line.radius)
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn kernel_dimension(band: usize, threshold: f64) -> Result<usize> {
    Ok(solve_kernel(&assemble_mode_system(band)?, threshold)?.dimension)
}

fn verify_kernel(cfg: &RunConfig) -> Result<(Vec<Check>, serde_json::Value)> {
    let system = assemble_mode_system(cfg.modes)?;
    let report = solve_kernel(&system, cfg.zero_threshold)?;
    let mut checks = vec![
        Check::equals("kernel.dimension", report.dimension as f64, 3.0),
        Check::at_least("kernel.gap_ratio", report.gap_ratio, KERNEL_GAP),
        Check::at_most("kernel.system_residual", max_of(report.system_residuals.iter().copied()), MODE_ANGLE_TOL),
        Check::at_most("kernel.complex_residual", max_of(report.complex_residuals.iter().copied()), MODE_ANGLE_TOL),
    ];
    let (tight, loose) = THRESHOLD_SWEEP;
    let stable = kernel_dimension(cfg.modes, loose)? == report.dimension
        && kernel_dimension(cfg.modes, tight)? == report.dimension;
    checks.push(Check::equals("kernel.threshold_stability", stable as u8 as f64, 1.0));
    let mut data = json!({
        "singular_values": report.singular_values,
        "dimension": report.dimension,
        "gap_ratio": report.gap_ratio,
        "degenerate": report.degenerate,
        "system_residuals": report.system_residuals,
        "complex_residuals": report.complex_residuals,
        "threshold_sweep": [tight, cfg.zero_threshold, loose],
    });
    if report.dimension == 3 {
        let corr = correspondence_check(&report, line_grid(cfg)?, window(cfg))?;
        checks.push(Check::at_most("kernel.mode_angle", max_of(corr.mode_angles.iter().copied()), MODE_ANGLE_TOL));
        checks.push(Check::at_most("kernel.line_angle", max_of(corr.line_angles.iter().copied()), LINE_ANGLE_TOL));
        checks.push(Check::at_most("kernel.off_support", corr.off_support, MODE_ANGLE_TOL));
        checks.push(Check::at_most(
            "kernel.coefficient_relations",
            max_of(corr.coordinates.iter().map(|c| c.relation_residual)),
            MODE_ANGLE_TOL,
        ));
        data["principal_angles"] = json!({ "mode": corr.mode_angles, "line": corr.line_angles });
        data["coordinates"] = json!(corr.coordinates);
    }
    Ok((checks, data))
}

fn bubble_params(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<BubbleParams> {
    match &cfg.bubble {
        Some(p) => Ok(p.clone()),
        None => {
            let mut p = BubbleParams::random(cfg.degree.unsigned_abs() as usize, rng)?;
            p.conjugate = cfg.degree < 0;
            Ok(p)
        }
    }
}

fn perturbed(p: &BubbleParams, eps: f64) -> impl Fn(f64) -> Complex64 + '_ {
    move |x| {
        let chart = Chart::Cayley.angle(x);
        evaluate_bubble(p, x) * Complex64::from_polar(1.0, eps * chart.sin())
    }
}

fn verify_bubble(cfg: &RunConfig) -> Result<(Vec<Check>, serde_json::Value)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = bubble_params(cfg, &mut rng)?;
    let d = params.degree();
    let line = line_grid(cfg)?;
    let u = CircleValuedLineMap::from_bubble(&params, line.clone())?;
    let unit = max_of(u.samples().iter().map(|v| (v.norm() - 1.0).abs()));
    let spectral = energy_spectral(&u, cfg.modes)?;
    let gagliardo = energy_gagliardo(&u, &cfg.quadrature)?;
    let el = el_residual(&u, &cfg.quadrature)?;

    let action = SymmetryAction::new(rng.gen_range(0.0..2.0 * PI), rng.gen_range(-1.0..1.0), rng.gen_range(0.5..2.0))?;
    let moved = action.apply_to_params(&params);
    let u_moved = CircleValuedLineMap::from_bubble(&moved, line.clone())?;
    let moved_energy = energy_spectral(&u_moved, cfg.modes)?;

    let control = CircleValuedLineMap::from_fn(line, perturbed(&params, 0.1), params.limit())?;
    let control_el = el_residual(&control, &cfg.quadrature)?;

    let target = PI * d.unsigned_abs() as f64;
    let checks = vec![
        Check::at_most("bubble.unit_modulus", unit, 1e-12),
        Check::equals("bubble.winding_degree", u.degree() as f64, d as f64),
        Check::equals("bubble.winding_invariance", u_moved.degree() as f64, d as f64),
        Check::at_most("bubble.energy_spectral", (spectral.energy - target).abs(), ENERGY_TOL),
        Check::at_most("bubble.energy_truncation", spectral.tail, ENERGY_TOL),
        Check::at_most("bubble.energy_gagliardo", (gagliardo - spectral.energy).abs(), GAGLIARDO_TOL),
        Check::at_most("bubble.energy_invariance", (moved_energy.energy - spectral.energy).abs(), ENERGY_TOL),
        Check::at_most("bubble.el_residual", el, LINE_TOL),
        Check::at_least("bubble.el_control_ratio", control_el / el.max(f64::MIN_POSITIVE), CONTROL_RATIO),
    ];
    let data = json!({
        "params": params,
        "degree": d,
        "energy_spectral": spectral.energy,
        "energy_tail": spectral.tail,
        "energy_gagliardo": gagliardo,
        "el_residual": el,
        "control_el_residual": control_el,
        "symmetry_action": action,
    });
    Ok((checks, data))
}

fn verify_operators(cfg: &RunConfig) -> Result<(Vec<Check>, serde_json::Value)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let q = &cfg.quadrature;
    let line = line_grid(cfg)?;
    let standard = BubbleParams::standard();

    let potential_err = max_of(
        [0.0, 1.0, -1.0, 3.0, -3.0]
            .iter()
            .map(|&x| potential_quadrature(&standard, x, q).map(|p| (p - potential(x)).abs()))
            .collect::<Result<Vec<_>>>()?,
    );

    let chordal_err = max_of((0..1000).map(|_| {
        let (x, y): (f64, f64) = (rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
        let exact = 4.0 * (x - y).powi(2) / ((x * x + 1.0) * (y * y + 1.0));
        (chordal_sq(x, y) - exact).abs() / exact.max(f64::MIN_POSITIVE)
    }));

    let psi = SpectralField::random(cfg.modes, &mut rng);
    let intertwine = intertwine_residual(&psi, line.clone(), q, window(cfg))?;

    let grid = CircleGrid::new(512.max(32 * cfg.modes))?;
    let samples = synthesize(&psi, &grid);
    let by_quadrature = half_laplacian_quadrature_all(&grid, &samples)?;
    let by_multiplier = synthesize(&half_laplacian_multiplier(&psi), &grid);
    let circle_oracle = max_of(by_quadrature.iter().zip(&by_multiplier).map(|(a, b)| (a - b).norm()));

    let lorentz = Analytic::new(|x: f64| Complex64::new(1.0 / (1.0 + x * x), 0.0), Some(Complex64::new(0.0, 0.0)));
    let closed_points: Vec<f64> = line
        .window_indices(window(cfg))
        .into_iter()
        .map(|i| line.nodes()[i])
        .collect();
    let closed_err = max_of(
        closed_points
            .iter()
            .map(|&x| {
                half_laplacian_line(&lorentz, x, q).map(|v| (v.re - (1.0 - x * x) / (1.0 + x * x).powi(2)).abs().max(v.im.abs()))
            })
            .collect::<Result<Vec<_>>>()?,
    );

    let mut generator_err: f64 = 0.0;
    for i in 1..=3 {
        let z = symmetry_generator(i, 1e-4, line.clone())?;
        generator_err = generator_err.max(max_of(
            line.nodes().iter().zip(z.values()).map(|(&x, v)| (v - kernel_field(i, x)).norm()),
        ));
    }

    let mut l0_kernel: f64 = 0.0;
    for i in 1..=3 {
        l0_kernel = l0_kernel.max(apply_l0_defining(&TangentField::kernel(i, line.clone())?, q, None)?.sup_norm());
    }
    let l0_control = apply_l0_defining(&control_field(line.clone())?, q, None)?.sup_norm();

    let v = random_tangent_field(line.clone(), &mut rng)?;
    let defining = apply_l0_defining(&v, q, None)?;
    let simplified = apply_l0_simplified(&v, q, None)?;
    let form_gap = defining.max_difference(&simplified);

    let checks = vec![
        Check::at_most("operators.potential_identity", potential_err, POTENTIAL_TOL),
        Check::at_most("operators.chordal_identity", chordal_err, 1e-12),
        Check::at_most("operators.intertwining", intertwine, LINE_TOL),
        Check::at_most("operators.circle_oracle", circle_oracle, POTENTIAL_TOL),
        Check::at_most("operators.lorentzian_closed_form", closed_err, CLOSED_FORM_TOL),
        Check::at_most("operators.symmetry_generators", generator_err, GENERATOR_TOL),
        Check::at_most("operators.l0_kernel_residual", l0_kernel, LINE_TOL),
        Check::at_least("operators.l0_control_ratio", l0_control / l0_kernel.max(f64::MIN_POSITIVE), CONTROL_RATIO),
        Check::at_most("operators.form_equivalence", form_gap, FORM_TOL),
        Check::at_most("operators.simplified_tangency", simplified.max_normal_component(), 1e-12),
    ];
    let data = json!({
        "window": window(cfg),
        "random_field_band": cfg.modes,
        "l0_kernel_residual": l0_kernel,
        "l0_control_residual": l0_control,
        "intertwining_residual": intertwine,
    });
    Ok((checks, data))
}

fn minimize(cfg: &RunConfig) -> Result<(Vec<Check>, serde_json::Value)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let grid = cfg.minimizer.grid();
    let init = random_initial_field(&grid, cfg.degree, 0.5, &mut rng);
    let gradient_err = gradient_check(&grid, &init, 20, 1e-5, &mut rng)?;
    let state = descend(&init, &cfg.minimizer)?;
    if let Some(path) = &cfg.trace {
        write_trace(path, &state.energy_trace, &state.gradient_trace)?;
    }
    let rise = max_of(state.energy_trace.windows(2).map(|w| w[1] - w[0]));
    let target = PI * cfg.degree.unsigned_abs() as f64;
    let mut checks = vec![
        Check::at_most("minimize.energy", (state.energy() - target).abs(), MINIMIZER_ENERGY_TOL),
        Check::at_most("minimize.monotone", rise, 0.0),
        Check::equals("minimize.degree", state.degree as f64, cfg.degree as f64),
        Check::at_most("minimize.gradient_norm", state.gradient_norm(), cfg.minimizer.tol),
        Check::at_most("minimize.gradient_check", gradient_err, GRADIENT_CHECK_TOL),
    ];
    let mut data = json!({
        "status": state.status,
        "iterations": state.iterations,
        "energy": state.energy(),
        "initial_energy": state.energy_trace[0],
        "gradient_norm": state.gradient_norm(),
    });
    if cfg.degree == 1 {
        let fit = fit_mobius(&grid, &state.samples, DEFAULT_FIT_THRESHOLD)?;
        checks.push(Check::at_most("minimize.mobius_fit", fit.residual, DEFAULT_FIT_THRESHOLD));
        data["mobius_fit"] = json!(fit);
    }
    Ok((checks, data))
}

/// Exit code contract: 0 when every check passes, 1 on a failed check or a
/// numerical error, 2 on a configuration error.
pub fn exit_code(outcome: &Result<Report>) -> i32 {
    match outcome {
        Ok(r) if r.passed => 0,
        Ok(_) => 1,
        Err(e) if is_usage_error(e) => 2,
        Err(_) => 1,
    }
}

pub fn is_usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidParameter(_) | Error::BandTooSmall { .. } | Error::GridTooSmall { .. }
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_command_passes() {
        let report = run(&RunConfig::new(Command::VerifyKernel)).unwrap();
        assert!(report.passed, "{:?}", report.failures().collect::<Vec<_>>());
        assert_eq!(exit_code(&Ok(report)), 0);
    }

    #[test]
    fn usage_errors_map_to_exit_two() {
        let mut cfg = RunConfig::new(Command::VerifyKernel);
        cfg.modes = 2;
        assert_eq!(exit_code(&run(&cfg)), 2);
    }

    #[test]
    fn minimize_is_deterministic() {
        let mut cfg = RunConfig::new(Command::Minimize);
        cfg.seed = 3;
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert!(a.passed, "{:?}", a.failures().collect::<Vec<_>>());
        assert_eq!(a.body_json().unwrap(), b.body_json().unwrap());
    }
}
