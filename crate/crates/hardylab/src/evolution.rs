//! Conservative time integration of the singular wave and Schrödinger
//! equations, with the multiplier-identity, hidden-regularity and
//! observability reports built on the recorded traces.

use crate::error::Error;
use crate::field::{BoundaryField, CxField, Field};
use crate::gramian::{SchrodingerStepper, WaveHum, WaveStepper};
use crate::grid::Grid;
use crate::operators::{
    boundary_quadrature, normal_derivative, radial_multiplier, BoundaryWeight, OperatorSet,
};
use crate::spectral::operator_modes;
use crate::Result;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// What a wave run records beyond the energy series.
#[derive(Debug, Clone)]
pub struct RecordOptions {
    /// Keep a `(t, position, velocity)` snapshot every this many steps
    /// (0 = endpoints only).
    pub snapshot_stride: usize,
    /// Record the boundary flux at every time node (needed by the
    /// multiplier and observability reports).
    pub record_flux: bool,
}

impl Default for RecordOptions {
    fn default() -> Self {
        RecordOptions {
            snapshot_stride: 0,
            record_flux: true,
        }
    }
}

/// Time series produced by a wave run.
#[derive(Debug, Clone)]
pub struct WaveTrace {
    pub times: Vec<f64>,
    /// Total energy `½(v_tᵀMv_t + vᵀK_λv)` per time node.
    pub energy: Vec<f64>,
    /// Position mass `vᵀMv` per time node.
    pub mass: Vec<f64>,
    /// Normal derivative per time node (empty when not recorded).
    pub flux: Vec<BoundaryField>,
    pub snapshots: Vec<(f64, Field, Field)>,
    pub initial_position: Field,
    pub initial_velocity: Field,
    pub final_position: Field,
    pub final_velocity: Field,
    pub lambda: f64,
    pub t_final: f64,
    pub dt: f64,
}

/// Time series produced by a Schrödinger run.
#[derive(Debug, Clone)]
pub struct SchrodingerTrace {
    pub times: Vec<f64>,
    /// `uᵀMu` per time node.
    pub mass: Vec<f64>,
    /// `uᵀK_λu` per time node.
    pub hardy_energy: Vec<f64>,
    pub final_state: CxField,
    pub lambda: f64,
    pub t_final: f64,
    pub dt: f64,
}

/// Integrate the homogeneous wave system from `(v0, v1)` by the implicit
/// midpoint rule: one SPD solve per step, discrete energy conserved to the
/// direct-solver rounding level.
pub fn wave_evolve(
    ops: &OperatorSet,
    v0: &Field,
    v1: &Field,
    t_final: f64,
    dt: f64,
    record: &RecordOptions,
) -> Result<WaveTrace> {
    ops.check_field(v0)?;
    ops.check_field(v1)?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "time step must be positive, got {dt}"
        )));
    }
    if t_final < dt {
        return Err(Error::InvalidParameter(format!(
            "final time {t_final} must cover at least one step {dt}"
        )));
    }
    let stepper = WaveStepper::new(ops, dt)?;
    let n_steps = (t_final / dt).round() as usize;
    let grid = &ops.grid;

    let mut v = v0.values.clone();
    let mut w = v1.values.clone();
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut energy = Vec::with_capacity(n_steps + 1);
    let mut mass = Vec::with_capacity(n_steps + 1);
    let mut flux = Vec::new();
    let mut snapshots = Vec::new();

    let mut record_node = |step: usize,
                           v: &[f64],
                           w: &[f64],
                           flux: &mut Vec<BoundaryField>,
                           snapshots: &mut Vec<(f64, Field, Field)>|
     -> Result<()> {
        let t = step as f64 * dt;
        times.push(t);
        energy.push(stepper.energy(v, w));
        mass.push(ops.mass_dot(v, v));
        if record.record_flux {
            let field = Field::from_values(grid, v.to_vec())?;
            flux.push(normal_derivative(grid, &field)?);
        }
        if record.snapshot_stride > 0 && step % record.snapshot_stride == 0 {
            snapshots.push((
                t,
                Field::from_values(grid, v.to_vec())?,
                Field::from_values(grid, w.to_vec())?,
            ));
        }
        Ok(())
    };

    record_node(0, &v, &w, &mut flux, &mut snapshots)?;
    for step in 1..=n_steps {
        stepper.step(&mut v, &mut w, dt, None);
        record_node(step, &v, &w, &mut flux, &mut snapshots)?;
    }

    Ok(WaveTrace {
        times,
        energy,
        mass,
        flux,
        snapshots,
        initial_position: v0.clone(),
        initial_velocity: v1.clone(),
        final_position: Field::from_values(grid, v)?,
        final_velocity: Field::from_values(grid, w)?,
        lambda: ops.lambda,
        t_final,
        dt,
    })
}

/// Crank-Nicolson integration of `i u_t - Δu - λu/|x|² = 0` from `u0`;
/// the step is a Cayley transform, so mass and Hardy energy are conserved
/// to rounding level.
pub fn schrodinger_evolve(
    ops: &OperatorSet,
    u0: &CxField,
    t_final: f64,
    dt: f64,
) -> Result<SchrodingerTrace> {
    u0.check_grid(&ops.grid)?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "time step must be positive, got {dt}"
        )));
    }
    if t_final < dt {
        return Err(Error::InvalidParameter(format!(
            "final time {t_final} must cover at least one step {dt}"
        )));
    }
    let stepper = SchrodingerStepper::new(ops, dt)?;
    let n_steps = (t_final / dt).round() as usize;

    let mut a = u0.re.values.clone();
    let mut b = u0.im.values.clone();
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut mass = Vec::with_capacity(n_steps + 1);
    let mut hardy = Vec::with_capacity(n_steps + 1);
    let k = &ops.stiffness_lambda;
    let mut record = |t: f64, a: &[f64], b: &[f64]| {
        times.push(t);
        mass.push(ops.mass_dot(a, a) + ops.mass_dot(b, b));
        hardy.push(k.quadratic(a) + k.quadratic(b));
    };
    record(0.0, &a, &b);
    for step in 1..=n_steps {
        stepper.step(&mut a, &mut b, dt, None, None);
        record(step as f64 * dt, &a, &b);
    }

    Ok(SchrodingerTrace {
        times,
        mass,
        hardy_energy: hardy,
        final_state: CxField {
            re: Field::from_values(&ops.grid, a)?,
            im: Field::from_values(&ops.grid, b)?,
        },
        lambda: ops.lambda,
        t_final,
        dt,
    })
}

/// The multiplier identity
/// `½∫₀ᵀ∫_Γ (x·ν)(∂v/∂ν)² = (T/2)(‖v0‖²_{H_λ} + ‖v1‖²) + [∫ v_t (x·∇v + (N-1)/2 v)]₀ᵀ`.
#[derive(Debug, Clone)]
pub struct MultiplierReport {
    pub lhs: f64,
    pub energy_part: f64,
    pub cross_part: f64,
    /// `(lhs - energy - cross) / max(|terms|)`.
    pub residual: f64,
}

/// Evaluate the multiplier identity on a recorded wave trace (trapezoid in
/// time, the scheme's native velocity at the endpoints).
pub fn multiplier_report(
    grid: &Grid,
    ops: &OperatorSet,
    trace: &WaveTrace,
) -> Result<MultiplierReport> {
    if trace.flux.len() != trace.times.len() {
        return Err(Error::InvalidParameter(
            "trace is missing flux data; rerun with record_flux".into(),
        ));
    }
    let lhs = 0.5 * trapezoid_boundary(grid, trace, BoundaryWeight::XDotNu)?;
    let v0 = &trace.initial_position;
    let v1 = &trace.initial_velocity;
    let energy_part = trace.t_final / 2.0
        * (ops.stiffness_lambda.quadratic(&v0.values) + ops.mass_dot(&v1.values, &v1.values));

    let cross = |pos: &Field, vel: &Field| -> f64 {
        let xg = radial_multiplier(grid, &pos.values);
        let half = (grid.dimension as f64 - 1.0) / 2.0;
        let mut s = 0.0;
        for i in 0..xg.len() {
            s += ops.mass[i] * vel.values[i] * (xg[i] + half * pos.values[i]);
        }
        s
    };
    let cross_part =
        cross(&trace.final_position, &trace.final_velocity) - cross(v0, v1);

    let scale = lhs
        .abs()
        .max(energy_part.abs())
        .max(cross_part.abs())
        .max(1e-300);
    Ok(MultiplierReport {
        lhs,
        energy_part,
        cross_part,
        residual: (lhs - energy_part - cross_part) / scale,
    })
}

/// `∫₀ᵀ∫_Γ (∂v/∂ν)²|x|² dσ dt / (‖v0‖²_{H_λ} + ‖v1‖²)`, guarded to zero on
/// zero data.
pub fn hidden_regularity_ratio(grid: &Grid, ops: &OperatorSet, trace: &WaveTrace) -> Result<f64> {
    if trace.flux.len() != trace.times.len() {
        return Err(Error::InvalidParameter(
            "trace is missing flux data; rerun with record_flux".into(),
        ));
    }
    let num = trapezoid_boundary(grid, trace, BoundaryWeight::AbsXSquared)?;
    let v0 = &trace.initial_position;
    let v1 = &trace.initial_velocity;
    let den =
        ops.stiffness_lambda.quadratic(&v0.values) + ops.mass_dot(&v1.values, &v1.values);
    if den <= 0.0 {
        return Ok(0.0);
    }
    Ok(num / den)
}

fn trapezoid_boundary(grid: &Grid, trace: &WaveTrace, weight: BoundaryWeight) -> Result<f64> {
    let mut total = 0.0;
    let last = trace.flux.len() - 1;
    for (n, bf) in trace.flux.iter().enumerate() {
        let q = boundary_quadrature(grid, bf, weight)?;
        let w = if n == 0 || n == last { 0.5 } else { 1.0 };
        total += w * q;
    }
    Ok(total * trace.dt)
}

/// Sampling plan for the observability scan.
#[derive(Debug, Clone)]
pub struct SampleSpec {
    /// Number of leading eigenmode data `(φ_k, 0)`.
    pub eigenmodes: usize,
    /// Number of seeded random data pairs.
    pub random: usize,
    pub seed: u64,
    /// Power-iteration refinement steps on the observation Gramian
    /// (0 = off).
    pub power_iterations: usize,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            eigenmodes: 3,
            random: 4,
            seed: 42,
            power_iterations: 0,
        }
    }
}

/// Result of an observability scan: per-sample ratios
/// `ρ = observation / energy` and the estimate `D₁ = 1/min ρ`.
#[derive(Debug, Clone)]
pub struct ObservabilityScan {
    pub d1_estimate: f64,
    pub worst_datum: (Field, Field),
    pub ratios: Vec<f64>,
    /// Samples dropped for having no energy.
    pub skipped: usize,
    /// Refined minimum ratio when power iteration ran.
    pub refined_min_ratio: Option<f64>,
}

/// Scan the observability ratio over eigenmode and seeded random data. The
/// observation integral is the control Gramian's quadratic form, so the
/// optional power-iteration mode refines the sampled minimum monotonically.
pub fn observability_scan(
    ops: &OperatorSet,
    t_final: f64,
    dt: f64,
    spec: &SampleSpec,
) -> Result<ObservabilityScan> {
    if !(t_final > 0.0) {
        return Err(Error::InvalidParameter(
            "observation time must be positive".into(),
        ));
    }
    let hum = WaveHum::new(ops, t_final, dt)?;
    let grid = &ops.grid;
    let n = grid.interior_count();

    let mut samples: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    if spec.eigenmodes > 0 {
        for mode in operator_modes(ops, spec.eigenmodes, 1e-10)? {
            samples.push((mode.vector.values, vec![0.0; n]));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..spec.random {
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        samples.push((a, b));
    }
    if samples.is_empty() {
        return Err(Error::InvalidParameter("no samples requested".into()));
    }

    let mut ratios = Vec::with_capacity(samples.len());
    let mut skipped = 0usize;
    let mut worst: Option<(f64, usize)> = None;
    for (idx, (a, b)) in samples.iter().enumerate() {
        let energy = hum.edot((a, b), (a, b));
        if energy <= 0.0 {
            skipped += 1;
            continue;
        }
        let rho = hum.gram_quad(a, b) / energy;
        if worst.map_or(true, |(w, _)| rho < w) {
            worst = Some((rho, idx));
        }
        ratios.push(rho);
    }
    let (mut min_rho, worst_idx) = worst.ok_or_else(|| {
        Error::InvalidParameter("every sample had zero energy".into())
    })?;
    let worst_datum = (
        Field::from_values(grid, samples[worst_idx].0.clone())?,
        Field::from_values(grid, samples[worst_idx].1.clone())?,
    );

    // optional refinement: power iteration on c·I - Λ pushes the worst
    // sample towards the least observable direction; its Rayleigh quotient
    // decreases monotonically
    let mut refined = None;
    if spec.power_iterations > 0 {
        let c = 1.5 * ratios.iter().fold(0.0f64, |m, &r| m.max(r)).max(min_rho);
        let mut y = samples[worst_idx].clone();
        for _ in 0..spec.power_iterations {
            let ly = hum.apply(&y.0, &y.1);
            for i in 0..n {
                y.0[i] = c * y.0[i] - ly.0[i];
                y.1[i] = c * y.1[i] - ly.1[i];
            }
            let nrm = hum.edot((&y.0, &y.1), (&y.0, &y.1)).sqrt();
            if nrm <= 0.0 {
                break;
            }
            for i in 0..n {
                y.0[i] /= nrm;
                y.1[i] /= nrm;
            }
        }
        let energy = hum.edot((&y.0, &y.1), (&y.0, &y.1));
        if energy > 0.0 {
            let rho = hum.gram_quad(&y.0, &y.1) / energy;
            min_rho = min_rho.min(rho);
            refined = Some(rho);
        }
    }

    Ok(ObservabilityScan {
        d1_estimate: 1.0 / min_rho,
        worst_datum,
        ratios,
        skipped,
        refined_min_ratio: refined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::operators::assemble;
    use std::f64::consts::PI;

    fn eigenmode(grid: &Grid) -> Field {
        Field::from_fn(grid, |r, t| t.sin() * (PI * r).sin() / r.sqrt())
    }

    #[test]
    fn zero_data_stays_zero() {
        let grid = build_grid(2, 16, 16, 1.0).unwrap();
        let ops = assemble(&grid, 0.75).unwrap();
        let z = Field::zeros(&grid);
        let tr = wave_evolve(&ops, &z, &z, 0.5, 0.05, &RecordOptions::default()).unwrap();
        assert!(tr.energy.iter().all(|&e| e == 0.0));
        assert!(tr.final_position.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn energy_is_conserved() {
        let grid = build_grid(2, 64, 64, 1.0).unwrap();
        let ops = assemble(&grid, 0.75).unwrap();
        let v0 = eigenmode(&grid);
        let v1 = Field::zeros(&grid);
        let tr = wave_evolve(
            &ops,
            &v0,
            &v1,
            2.5,
            1.0 / 200.0,
            &RecordOptions {
                snapshot_stride: 0,
                record_flux: false,
            },
        )
        .unwrap();
        let e0 = tr.energy[0];
        let drift = tr
            .energy
            .iter()
            .fold(0.0f64, |m, &e| m.max((e - e0).abs()))
            / e0;
        assert!(drift <= 1e-8, "drift {drift}");
    }

    #[test]
    fn time_reversal_round_trip() {
        let grid = build_grid(2, 48, 48, 1.0).unwrap();
        let ops = assemble(&grid, 0.75).unwrap();
        let v0 = eigenmode(&grid);
        let v1 = Field::from_fn(&grid, |r, t| (2.0 * t).sin() * r * (1.0 - r));
        let opts = RecordOptions {
            snapshot_stride: 0,
            record_flux: false,
        };
        let fwd = wave_evolve(&ops, &v0, &v1, 1.7, 1.0 / 100.0, &opts).unwrap();
        let back = wave_evolve(
            &ops,
            &fwd.final_position,
            &fwd.final_velocity.scaled(-1.0),
            1.7,
            1.0 / 100.0,
            &opts,
        )
        .unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..v0.len() {
            let d = back.final_position.values[i] - v0.values[i];
            num += ops.mass[i] * d * d;
            den += ops.mass[i] * v0.values[i] * v0.values[i];
        }
        assert!((num / den).sqrt() <= 1e-8, "reversal {}", (num / den).sqrt());
    }

    #[test]
    fn eigenmode_oscillates_at_its_frequency() {
        // v(t) ≈ cos(πt)·φ; at t = 1 the snapshot is -φ
        let grid = build_grid(2, 128, 128, 1.0).unwrap();
        let ops = assemble(&grid, 0.75).unwrap();
        let v0 = eigenmode(&grid);
        let tr = wave_evolve(
            &ops,
            &v0,
            &Field::zeros(&grid),
            1.0,
            1.0 / 400.0,
            &RecordOptions {
                snapshot_stride: 0,
                record_flux: false,
            },
        )
        .unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..v0.len() {
            let d = tr.final_position.values[i] + v0.values[i];
            num += ops.mass[i] * d * d;
            den += ops.mass[i] * v0.values[i] * v0.values[i];
        }
        let rel = (num / den).sqrt();
        assert!(rel < 0.02, "snapshot error {rel}");
    }

    #[test]
    fn schrodinger_conserves_mass_and_energy() {
        let grid = build_grid(2, 64, 64, 1.0).unwrap();
        let ops = assemble(&grid, 0.75).unwrap();
        let u0 = CxField::from_real(eigenmode(&grid));
        let tr = schrodinger_evolve(&ops, &u0, 1.0, 1.0 / 200.0).unwrap();
        let m0 = tr.mass[0];
        let drift = tr.mass.iter().fold(0.0f64, |m, &x| m.max((x - m0).abs())) / m0;
        assert!(drift <= 1e-10, "mass drift {drift}");
        let h0 = tr.hardy_energy[0];
        let hdrift = tr
            .hardy_energy
            .iter()
            .fold(0.0f64, |m, &x| m.max((x - h0).abs()))
            / h0;
        assert!(hdrift <= 1e-9, "hardy drift {hdrift}");
    }

    #[test]
    fn schrodinger_eigenmode_phase_rotation() {
        // u(t) = e^{+iμt} φ for A_λφ = μφ; at t = 2/π² the phase is e^{2i}
        let grid = build_grid(2, 128, 128, 1.0).unwrap();
        let ops = assemble(&grid, 0.75).unwrap();
        let phi = eigenmode(&grid);
        let u0 = CxField::from_real(phi.clone());
        let t_target = 2.0 / (PI * PI);
        let n_steps = 200;
        let tr = schrodinger_evolve(&ops, &u0, t_target, t_target / n_steps as f64).unwrap();
        let (c, s) = (2.0f64.cos(), 2.0f64.sin());
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..phi.len() {
            let dr = tr.final_state.re.values[i] - c * phi.values[i];
            let di = tr.final_state.im.values[i] - s * phi.values[i];
            num += ops.mass[i] * (dr * dr + di * di);
            den += ops.mass[i] * phi.values[i] * phi.values[i];
        }
        let rel = (num / den).sqrt();
        assert!(rel < 0.02, "phase error {rel}");
    }

    #[test]
    fn schrodinger_per_step_isometry() {
        let grid = build_grid(2, 32, 32, 1.0).unwrap();
        let ops = assemble(&grid, 1.0).unwrap();
        let u0 = CxField::from_fn(&grid, |r, t| ((2.0 * t).sin() * r, t.cos() * (1.0 - r)));
        let tr = schrodinger_evolve(&ops, &u0, 0.25, 1.0 / 100.0).unwrap();
        for w in tr.mass.windows(2) {
            assert!((w[1] - w[0]).abs() / tr.mass[0] <= 1e-12, "{w:?}");
        }
    }

    #[test]
    fn multiplier_identity_closed_form() {
        let grid = build_grid(2, 128, 128, 1.0).unwrap();
        let ops = assemble(&grid, 0.75).unwrap();
        let v0 = eigenmode(&grid);
        let tr = wave_evolve(
            &ops,
            &v0,
            &Field::zeros(&grid),
            2.5,
            1.0 / 400.0,
            &RecordOptions::default(),
        )
        .unwrap();
        let rep = multiplier_report(&grid, &ops, &tr).unwrap();
        let expected = PI.powi(3) / 4.0 * 1.25; // (π³/4)(T/2), sin(2πT) = 0
        assert!(
            (rep.lhs - expected).abs() / expected < 0.02,
            "lhs {} vs {expected}",
            rep.lhs
        );
        assert!(rep.residual.abs() <= 0.02, "residual {}", rep.residual);

        // non-resonant horizon: cross term π²/16
        let tr2 = wave_evolve(
            &ops,
            &v0,
            &Field::zeros(&grid),
            2.25,
            1.0 / 400.0,
            &RecordOptions::default(),
        )
        .unwrap();
        let rep2 = multiplier_report(&grid, &ops, &tr2).unwrap();
        let cross_expected = PI * PI / 16.0;
        assert!(
            (rep2.cross_part - cross_expected).abs() / cross_expected < 0.05,
            "cross {} vs {cross_expected}",
            rep2.cross_part
        );
        assert!(rep2.residual.abs() <= 0.02, "residual {}", rep2.residual);
    }

    #[test]
    fn multiplier_zero_data() {
        let grid = build_grid(2, 16, 16, 1.0).unwrap();
        let ops = assemble(&grid, 0.5).unwrap();
        let z = Field::zeros(&grid);
        let tr = wave_evolve(&ops, &z, &z, 0.5, 0.05, &RecordOptions::default()).unwrap();
        let rep = multiplier_report(&grid, &ops, &tr).unwrap();
        assert_eq!(rep.lhs, 0.0);
        assert_eq!(rep.energy_part, 0.0);
        assert_eq!(rep.cross_part, 0.0);
    }

    #[test]
    fn multiplier_requires_flux() {
        let grid = build_grid(2, 16, 16, 1.0).unwrap();
        let ops = assemble(&grid, 0.5).unwrap();
        let z = eigenmode(&grid);
        let tr = wave_evolve(
            &ops,
            &z,
            &Field::zeros(&grid),
            0.5,
            0.05,
            &RecordOptions {
                snapshot_stride: 0,
                record_flux: false,
            },
        )
        .unwrap();
        assert!(multiplier_report(&grid, &ops, &tr).is_err());
    }

    #[test]
    fn hidden_regularity_bounded_on_modes() {
        let grid = build_grid(2, 64, 64, 1.0).unwrap();
        let ops = assemble(&grid, 0.75).unwrap();
        let modes = operator_modes(&ops, 3, 1e-10).unwrap();
        for m in &modes {
            let tr = wave_evolve(
                &ops,
                &m.vector,
                &Field::zeros(&grid),
                2.5,
                1.0 / 200.0,
                &RecordOptions::default(),
            )
            .unwrap();
            let ratio = hidden_regularity_ratio(&grid, &ops, &tr).unwrap();
            assert!(ratio > 0.0 && ratio <= 12.0, "ratio {ratio}");
        }
        // zero data guarded
        let z = Field::zeros(&grid);
        let tr = wave_evolve(&ops, &z, &z, 0.5, 0.05, &RecordOptions::default()).unwrap();
        assert_eq!(hidden_regularity_ratio(&grid, &ops, &tr).unwrap(), 0.0);
    }

    #[test]
    fn observability_eigenmode_ratio_equals_horizon() {
        let grid = build_grid(2, 64, 64, 1.0).unwrap();
        let ops = assemble(&grid, 0.75).unwrap();
        let scan = observability_scan(
            &ops,
            2.5,
            1.0 / 200.0,
            &SampleSpec {
                eigenmodes: 1,
                random: 0,
                seed: 42,
                power_iterations: 0,
            },
        )
        .unwrap();
        // ρ = T for an eigenmode at a resonant horizon (sin(2πT) = 0)
        assert!(
            (scan.ratios[0] - 2.5).abs() / 2.5 < 0.02,
            "rho {}",
            scan.ratios[0]
        );
    }

    #[test]
    fn observability_short_horizon_is_weaker() {
        let grid = build_grid(2, 48, 48, 1.0).unwrap();
        let ops = assemble(&grid, 0.75).unwrap();
        let spec = SampleSpec {
            eigenmodes: 2,
            random: 3,
            seed: 42,
            power_iterations: 0,
        };
        let long = observability_scan(&ops, 2.5, 1.0 / 100.0, &spec).unwrap();
        let short = observability_scan(&ops, 0.1, 1.0 / 100.0, &spec).unwrap();
        assert!(long.ratios.iter().all(|&r| r > 0.0));
        let min_long = long.ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let min_short = short.ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min_short < min_long, "{min_short} !< {min_long}");
        assert!(long.d1_estimate > 0.0);
    }

    #[test]
    fn observability_ratios_scale_invariant() {
        let grid = build_grid(2, 32, 32, 1.0).unwrap();
        let ops = assemble(&grid, 0.75).unwrap();
        let hum = WaveHum::new(&ops, 1.0, 1.0 / 50.0).unwrap();
        let a = eigenmode(&grid);
        let b = Field::from_fn(&grid, |r, t| t.sin() * r);
        let e = hum.edot((&a.values, &b.values), (&a.values, &b.values));
        let rho = hum.gram_quad(&a.values, &b.values) / e;
        let a2 = a.scaled(3.7);
        let b2 = b.scaled(3.7);
        let e2 = hum.edot((&a2.values, &b2.values), (&a2.values, &b2.values));
        let rho2 = hum.gram_quad(&a2.values, &b2.values) / e2;
        assert!((rho - rho2).abs() <= 1e-12 * rho.abs());
    }

    #[test]
    fn observability_power_refinement_does_not_increase_the_minimum() {
        let grid = build_grid(2, 24, 24, 1.0).unwrap();
        let ops = assemble(&grid, 0.75).unwrap();
        let spec = SampleSpec {
            eigenmodes: 2,
            random: 2,
            seed: 7,
            power_iterations: 6,
        };
        let scan = observability_scan(&ops, 1.5, 1.0 / 50.0, &spec).unwrap();
        let sampled_min = scan.ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let refined = scan.refined_min_ratio.unwrap();
        assert!(refined <= sampled_min * (1.0 + 1e-9));
        assert!((1.0 / scan.d1_estimate - sampled_min.min(refined)).abs() < 1e-12);
    }

    #[test]
    fn zero_energy_sample_skipped() {
        let grid = build_grid(2, 16, 16, 1.0).unwrap();
        let ops = assemble(&grid, 0.5).unwrap();
        // eigenmodes = 0, random = 0 is rejected outright
        assert!(observability_scan(
            &ops,
            1.0,
            0.05,
            &SampleSpec {
                eigenmodes: 0,
                random: 0,
                seed: 1,
                power_iterations: 0
            }
        )
        .is_err());
    }

    #[test]
    fn dt_validation() {
        let grid = build_grid(2, 16, 16, 1.0).unwrap();
        let ops = assemble(&grid, 0.5).unwrap();
        let z = Field::zeros(&grid);
        assert!(wave_evolve(&ops, &z, &z, 1.0, 0.0, &RecordOptions::default()).is_err());
        assert!(wave_evolve(&ops, &z, &z, 0.01, 0.05, &RecordOptions::default()).is_err());
    }
}
