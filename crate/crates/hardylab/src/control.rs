//! HUM boundary controls for the singular wave and Schrödinger systems:
//! conjugate gradient on the discrete control Gramian, followed by a
//! forward verification run.
//!
//! The Gramian is exactly symmetric positive semidefinite in the discrete
//! energy inner product by construction (see the gramian module), but its
//! spectrum has a near-null tail of poorly observable high-frequency modes,
//! so the CG loop tracks its best iterate and stops on stagnation; the
//! verification run is the ground truth for what the control achieves.

use crate::error::Error;
use crate::field::{CxField, Field};
use crate::gramian::{SchrodingerHum, WaveHum};
use crate::operators::OperatorSet;
use crate::Result;

/// A computed wave boundary control.
#[derive(Debug, Clone)]
pub struct ControlResult {
    /// Control samples per step midpoint, one row per step, one column per
    /// controllable face (time `t = (n + 1/2)·dt` for row `n`).
    pub control_trace: Vec<Vec<f64>>,
    /// Indices of the controllable faces into `grid.boundary_faces`.
    pub face_indices: Vec<usize>,
    /// Minimizing adjoint data.
    pub minimizer: (Field, Field),
    pub cg_iterations: usize,
    /// Relative energy-norm residual of the Gramian equation at the
    /// returned iterate.
    pub cg_residual: f64,
    pub converged: bool,
    /// Observation half-norm `½ G(ẑ, ẑ)` at the minimizer (positive for a
    /// nonzero control).
    pub j_value: f64,
    /// `E(0) / E(T)` from the forward verification run.
    pub reduction_factor: f64,
    /// Set when the horizon is below the sharp control time `2 R_Ω`.
    pub short_horizon_warning: bool,
    pub t_final: f64,
    pub dt: f64,
}

/// A computed Schrödinger boundary control (complex-valued trace).
#[derive(Debug, Clone)]
pub struct SchrodingerControlResult {
    pub control_trace_re: Vec<Vec<f64>>,
    pub control_trace_im: Vec<Vec<f64>>,
    pub face_indices: Vec<usize>,
    pub minimizer: CxField,
    pub cg_iterations: usize,
    pub cg_residual: f64,
    pub converged: bool,
    pub j_value: f64,
    /// `‖u(T)‖²_M / ‖u0‖²_M` from the verification run.
    pub final_mass_ratio: f64,
    pub t_final: f64,
    pub dt: f64,
}

/// One application of the wave control Gramian `Λ` to adjoint data,
/// Riesz-represented in the energy inner product. Exactly symmetric and
/// positive semidefinite there.
pub fn hum_operator(
    ops: &OperatorSet,
    v_data: (&Field, &Field),
    t_final: f64,
    dt: f64,
) -> Result<(Field, Field)> {
    ops.check_field(v_data.0)?;
    ops.check_field(v_data.1)?;
    let hum = WaveHum::new(ops, t_final, dt)?;
    let (a, b) = hum.apply(&v_data.0.values, &v_data.1.values);
    Ok((
        Field::from_values(&ops.grid, a)?,
        Field::from_values(&ops.grid, b)?,
    ))
}

/// Conjugate gradient with best-iterate tracking and stagnation detection,
/// generic over the state representation.
struct CgOutcome {
    z: Vec<f64>,
    iterations: usize,
    residual: f64,
    converged: bool,
}

fn cg_best(
    apply: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    inner: &dyn Fn(&[f64], &[f64]) -> f64,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> CgOutcome {
    let n = b.len();
    let norm_b = inner(b, b).sqrt();
    if norm_b == 0.0 {
        return CgOutcome {
            z: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let mut z = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = inner(&r, &r);
    let mut best = (1.0f64, z.clone());
    let mut since_best = 0usize;
    let stagnation_window = 50;
    for it in 1..=max_iter {
        let lp = apply(&p);
        let pap = inner(&lp, &p);
        if pap <= 0.0 || !pap.is_finite() {
            // ran into the numerical null space; the best iterate stands
            return CgOutcome {
                z: best.1,
                iterations: it,
                residual: best.0,
                converged: best.0 <= tol,
            };
        }
        let alpha = rr / pap;
        for i in 0..n {
            z[i] += alpha * p[i];
            r[i] -= alpha * lp[i];
        }
        let rr_new = inner(&r, &r);
        let rel = (rr_new / (norm_b * norm_b)).sqrt();
        if rel < best.0 {
            best = (rel, z.clone());
            since_best = 0;
        } else {
            since_best += 1;
        }
        if rel <= tol {
            return CgOutcome {
                z,
                iterations: it,
                residual: rel,
                converged: true,
            };
        }
        if since_best >= stagnation_window {
            // residual floor of the Gramian's near-null tail reached
            return CgOutcome {
                z: best.1,
                iterations: it,
                residual: best.0,
                converged: false,
            };
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    CgOutcome {
        z: best.1,
        iterations: max_iter,
        residual: best.0,
        converged: false,
    }
}

/// Solve the null-control problem for initial data `(u0, u1)`: conjugate
/// gradient on `Λ z = b` in the energy inner product, control
/// `h = (x·ν) · g(ẑ)` on the positive-`x·ν` boundary, verified by a forward
/// run.
pub fn hum_solve(
    ops: &OperatorSet,
    u0: &Field,
    u1: &Field,
    t_final: f64,
    dt: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ControlResult> {
    ops.check_field(u0)?;
    ops.check_field(u1)?;
    let short_horizon_warning = t_final < 2.0 * ops.grid.radius;
    let hum = WaveHum::new(ops, t_final, dt)?;
    let n = ops.grid.interior_count();

    let (b0, b1) = hum.rhs(&u0.values, &u1.values);
    let b = concat(&b0, &b1);
    let mut apply = |x: &[f64]| -> Vec<f64> {
        let (x0, x1) = x.split_at(n);
        let (y0, y1) = hum.apply(x0, x1);
        concat(&y0, &y1)
    };
    let inner = |x: &[f64], y: &[f64]| -> f64 {
        hum.edot((&x[..n], &x[n..]), (&y[..n], &y[n..]))
    };
    let out = cg_best(&mut apply, &inner, &b, tol, max_iter);

    let (z0, z1) = out.z.split_at(n);
    let control = hum.control_of(z0, z1);
    let fluxes = hum.observe(z0, z1);
    let j_value = 0.5 * hum.gram_of_fluxes(&fluxes, &fluxes);
    let (_, _, e0, et) = hum.forward_with_control(&u0.values, &u1.values, &control);
    let reduction_factor = if e0 == 0.0 { 1.0 } else { e0 / et.max(1e-300) };

    Ok(ControlResult {
        control_trace: control,
        face_indices: hum.arc.faces.clone(),
        minimizer: (
            Field::from_values(&ops.grid, z0.to_vec())?,
            Field::from_values(&ops.grid, z1.to_vec())?,
        ),
        cg_iterations: out.iterations,
        cg_residual: out.residual,
        converged: out.converged,
        j_value,
        reduction_factor,
        short_horizon_warning,
        t_final,
        dt,
    })
}

/// Forward controlled run from `(u0, u1)` with a stored control; returns
/// `(final_energy, reduction_factor)`.
pub fn verify_control(
    ops: &OperatorSet,
    u0: &Field,
    u1: &Field,
    control: &ControlResult,
    t_final: f64,
    dt: f64,
) -> Result<(f64, f64)> {
    ops.check_field(u0)?;
    ops.check_field(u1)?;
    if control.t_final != t_final || control.dt != dt {
        return Err(Error::GridMismatch(format!(
            "control was computed for (T, dt) = ({}, {}), got ({}, {})",
            control.t_final, control.dt, t_final, dt
        )));
    }
    let hum = WaveHum::new(ops, t_final, dt)?;
    if control.control_trace.len() != hum.n_steps
        || control.face_indices != hum.arc.faces
    {
        return Err(Error::GridMismatch(
            "control trace does not match this grid/horizon".into(),
        ));
    }
    let (_, _, e0, et) = hum.forward_with_control(&u0.values, &u1.values, &control.control_trace);
    let reduction = if e0 == 0.0 { 1.0 } else { e0 / et.max(1e-300) };
    Ok((et, reduction))
}

/// Null control for the Schrödinger system. Same CG structure with the
/// conjugate-linear pairing handled through real/imaginary parts; the
/// adjoint data lives in the `H_λ` geometry.
pub fn schrodinger_hum_solve(
    ops: &OperatorSet,
    u0: &CxField,
    t_final: f64,
    dt: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SchrodingerControlResult> {
    u0.check_grid(&ops.grid)?;
    let hum = SchrodingerHum::new(ops, t_final, dt)?;
    let n = ops.grid.interior_count();

    let (b0, b1) = hum.rhs(&u0.re.values, &u0.im.values);
    let b = concat(&b0, &b1);
    let mut apply = |x: &[f64]| -> Vec<f64> {
        let (x0, x1) = x.split_at(n);
        let (y0, y1) = hum.apply(x0, x1);
        concat(&y0, &y1)
    };
    let inner = |x: &[f64], y: &[f64]| -> f64 {
        hum.kdot((&x[..n], &x[n..]), (&y[..n], &y[n..]))
    };
    let out = cg_best(&mut apply, &inner, &b, tol, max_iter);

    let (z0, z1) = out.z.split_at(n);
    let control = hum.control_of(z0, z1);
    let fluxes = hum.observe(z0, z1);
    let j_value = 0.5 * hum.gram_of_fluxes(&fluxes, &fluxes);
    let (_, _, m0, mt) =
        hum.forward_with_control(&u0.re.values, &u0.im.values, &control);
    let final_mass_ratio = if m0 == 0.0 { 0.0 } else { mt / m0 };

    Ok(SchrodingerControlResult {
        control_trace_re: control.iter().map(|(re, _)| re.clone()).collect(),
        control_trace_im: control.iter().map(|(_, im)| im.clone()).collect(),
        face_indices: hum.arc.faces.clone(),
        minimizer: CxField {
            re: Field::from_values(&ops.grid, z0.to_vec())?,
            im: Field::from_values(&ops.grid, z1.to_vec())?,
        },
        cg_iterations: out.iterations,
        cg_residual: out.residual,
        converged: out.converged,
        j_value,
        final_mass_ratio,
        t_final,
        dt,
    })
}

fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}
