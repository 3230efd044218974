//! Elliptic solves for `A_λ u = f`, the Pohozaev and trace-regularity
//! reports, and nonlinear ground states with the existence/nonexistence
//! balance check.

use crate::error::Error;
use crate::field::Field;
use crate::grid::Grid;
use crate::linalg::pcg;
use crate::operators::{
    boundary_quadrature, normal_derivative, quadratic_form, radial_multiplier, BoundaryWeight,
    OperatorSet, QuadraticKind,
};
use crate::{critical_lambda, Result};

/// Solution of one Dirichlet solve with its CG diagnostics.
#[derive(Debug, Clone)]
pub struct DirichletSolve {
    pub field: Field,
    pub cg_iterations: usize,
    pub cg_residual: f64,
    /// Set when `λ = λ(N)`: the form loses unweighted coercivity and CG
    /// iteration counts are worth reporting.
    pub critical_lambda_flag: bool,
}

/// Solve `K_λ u = M f` by Jacobi-preconditioned CG to
/// `‖K_λ u - M f‖ ≤ tol · ‖M f‖`.
pub fn solve_dirichlet(ops: &OperatorSet, f: &Field, tol: f64) -> Result<DirichletSolve> {
    ops.check_field(f)?;
    if !f.is_finite() {
        return Err(Error::InvalidParameter(
            "right-hand side has non-finite entries".into(),
        ));
    }
    let critical = ops.lambda == critical_lambda(ops.grid.dimension);
    let rhs: Vec<f64> = ops
        .mass
        .iter()
        .zip(&f.values)
        .map(|(m, v)| m * v)
        .collect();
    let n = rhs.len();
    let max_iter = 40 * (n as f64).sqrt() as usize + 200;
    let out = pcg(&ops.stiffness_lambda, &rhs, tol, max_iter);
    if !out.converged {
        return Err(Error::NonConvergence {
            what: "dirichlet CG solve",
            iterations: out.iterations,
            residual: out.residual,
        });
    }
    Ok(DirichletSolve {
        field: Field::from_values(&ops.grid, out.x)?,
        cg_iterations: out.iterations,
        cg_residual: out.residual,
        critical_lambda_flag: critical,
    })
}

/// The three terms of the Pohozaev identity
/// `½∫_Γ (x·ν)(∂u/∂ν)² = -∫ A_λu (x·∇u) - (N-2)/2 ‖u‖²`
/// and their relative residual.
#[derive(Debug, Clone)]
pub struct PohozaevReport {
    pub boundary_term: f64,
    pub volume_term: f64,
    pub norm_term: f64,
    /// `(boundary - volume - norm) / max(|terms|)`.
    pub residual: f64,
    /// Set when the data `f` fails the discrete `L²` finiteness proxy.
    pub data_warning: bool,
}

/// Evaluate the Pohozaev identity for a field `u` with `A_λ u = f`.
pub fn pohozaev_report(
    grid: &Grid,
    ops: &OperatorSet,
    u: &Field,
    f: &Field,
) -> Result<PohozaevReport> {
    if !grid.same_layout(&ops.grid) {
        return Err(Error::GridMismatch(
            "operator set belongs to a different grid".into(),
        ));
    }
    ops.check_field(u)?;
    ops.check_field(f)?;
    let data_warning = !f.is_finite();

    let flux = normal_derivative(grid, u)?;
    let boundary_term = 0.5 * boundary_quadrature(grid, &flux, BoundaryWeight::XDotNu)?;

    let x_grad = radial_multiplier(grid, &u.values);
    let mut volume_term = 0.0;
    for i in 0..x_grad.len() {
        volume_term -= ops.mass[i] * f.values[i] * x_grad[i];
    }
    let hardy = quadratic_form(ops, u, QuadraticKind::Hardy)?;
    let norm_term = -(grid.dimension as f64 - 2.0) / 2.0 * hardy;

    let scale = boundary_term
        .abs()
        .max(volume_term.abs())
        .max(norm_term.abs())
        .max(1e-300);
    Ok(PohozaevReport {
        boundary_term,
        volume_term,
        norm_term,
        residual: (boundary_term - volume_term - norm_term) / scale,
        data_warning,
    })
}

/// `∫_Γ (∂u/∂ν)²|x|² dσ / (‖u‖²_{H_λ} + ‖A_λu‖²_{L²})`. Guarded to zero
/// when both `u` and `f` vanish.
pub fn trace_inequality_ratio(grid: &Grid, ops: &OperatorSet, u: &Field, f: &Field) -> Result<f64> {
    ops.check_field(u)?;
    ops.check_field(f)?;
    let flux = normal_derivative(grid, u)?;
    let num = boundary_quadrature(grid, &flux, BoundaryWeight::AbsXSquared)?;
    let den = quadratic_form(ops, u, QuadraticKind::Hardy)? + ops.mass_dot(&f.values, &f.values);
    if den <= 0.0 {
        return Ok(0.0);
    }
    Ok(num / den)
}

/// How the nonlinear solver treats supercritical exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroundStateMode {
    /// Reject `α ≥ (N+2)/(N-2)`: no nontrivial states exist there.
    Strict,
    /// Run anyway and report what happens.
    Exploratory,
}

/// A computed ground state of `A_λ u = |u|^{α-1} u`.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub u: Field,
    /// Infimum of `‖u‖²_{H_λ}` over the unit `L^{α+1}` sphere.
    pub i_value: f64,
    pub alpha: f64,
    pub iterations: usize,
    /// `‖K_λ u - M |u|^{α-1}u‖_{M⁻¹} / ‖M |u|^{α-1}u‖_{M⁻¹}` at the scaled
    /// state.
    pub fixed_point_residual: f64,
    /// Constrained objective per iteration (non-increasing).
    pub objective_history: Vec<f64>,
}

/// Normalized inverse iteration for the constrained minimization
/// `I = inf { ‖u‖²_{H_λ} : ‖u‖_{L^{α+1}} = 1 }`, scaled at the end so that
/// `A_λ u = |u|^{α-1} u` holds discretely.
pub fn ground_state(
    ops: &OperatorSet,
    alpha: f64,
    max_iter: usize,
    tol: f64,
    mode: GroundStateMode,
) -> Result<GroundState> {
    let dim = ops.grid.dimension;
    if alpha <= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "nonlinearity exponent must satisfy alpha > 1, got {alpha} (alpha = 1 is the linear case)"
        )));
    }
    if dim == 3 {
        let crit = 5.0; // (N+2)/(N-2) at N = 3
        if alpha >= crit && mode == GroundStateMode::Strict {
            return Err(Error::InvalidParameter(format!(
                "alpha = {alpha} is supercritical (alpha >= (N+2)/(N-2) = {crit}): \
                 no nontrivial states exist on star-shaped domains; \
                 use exploratory mode to watch the mechanism fail"
            )));
        }
    }

    let grid = &ops.grid;
    let n = grid.interior_count();
    let lp_norm = |v: &[f64]| -> f64 {
        let s: f64 = (0..n)
            .map(|i| ops.mass[i] * v[i].abs().powf(alpha + 1.0))
            .sum();
        s.powf(1.0 / (alpha + 1.0))
    };

    // positive initial guess vanishing on the Dirichlet boundary
    let mut u = Field::from_fn(grid, |r, t| {
        let radial = r * (grid.radius - r);
        let ang = if grid.axis_symmetry { t.cos() } else { t.sin() };
        radial * ang.max(0.0)
    });
    let nrm = lp_norm(&u.values);
    u = u.scaled(1.0 / nrm);

    let inner_tol = (tol * 1e-2).max(1e-14);
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=max_iter {
        iterations = it;
        let g: Vec<f64> = u
            .values
            .iter()
            .map(|&v| v.abs().powf(alpha - 1.0) * v)
            .collect();
        let rhs = Field::from_values(grid, g)?;
        let step = solve_dirichlet(ops, &rhs, inner_tol)?;
        let nrm = lp_norm(&step.field.values);
        if nrm <= 1e-300 {
            return Err(Error::NonConvergence {
                what: "ground state iteration collapsed to zero (restart with a positive guess)",
                iterations: it,
                residual: f64::INFINITY,
            });
        }
        let next = step.field.scaled(1.0 / nrm);
        let objective = quadratic_form(ops, &next, QuadraticKind::Hardy)?;
        history.push(objective);

        let mut delta = 0.0;
        for i in 0..n {
            let d = next.values[i] - u.values[i];
            delta += ops.mass[i] * d * d;
        }
        u = next;
        if delta.sqrt() <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            what: "ground state inverse iteration",
            iterations,
            residual: history.last().copied().unwrap_or(f64::NAN),
        });
    }

    let i_value = quadratic_form(ops, &u, QuadraticKind::Hardy)?;
    // scale so that K_λ U = M |U|^{α-1} U
    let scaled = u.scaled(i_value.powf(1.0 / (alpha - 1.0)));
    let f_scaled: Vec<f64> = scaled
        .values
        .iter()
        .map(|&v| v.abs().powf(alpha - 1.0) * v)
        .collect();
    let ku = ops.stiffness_lambda.mul_vec_alloc(&scaled.values);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let mf = ops.mass[i] * f_scaled[i];
        let r = ku[i] - mf;
        num += r * r / ops.mass[i];
        den += mf * mf / ops.mass[i];
    }
    let fixed_point_residual = (num / den.max(1e-300)).sqrt();

    Ok(GroundState {
        u: scaled,
        i_value,
        alpha,
        iterations,
        fixed_point_residual,
        objective_history: history,
    })
}

/// Pohozaev balance of a converged ground state.
#[derive(Debug, Clone)]
pub struct NonlinearBalance {
    /// `N/(α+1) - (N-2)/2`; its sign separates the existence regimes.
    pub balance_factor: f64,
    /// `½∫_Γ (x·ν)(∂u/∂ν)²`.
    pub boundary_term: f64,
    /// `balance_factor · ‖u‖^{α+1}_{L^{α+1}}`.
    pub predicted: f64,
    pub relative_gap: f64,
}

/// Check the integrated Pohozaev balance
/// `½∫(x·ν)(∂u/∂ν)² = (N/(α+1) - (N-2)/2) ∫|u|^{α+1}` for a ground state.
pub fn nonlinear_balance(grid: &Grid, gs: &GroundState) -> Result<NonlinearBalance> {
    gs.u.check_grid(grid)?;
    if !gs.fixed_point_residual.is_finite() || gs.fixed_point_residual > 1e-2 {
        return Err(Error::InvalidParameter(format!(
            "ground state is not converged (fixed point residual {:.2e})",
            gs.fixed_point_residual
        )));
    }
    let n_f = grid.dimension as f64;
    let balance_factor = n_f / (gs.alpha + 1.0) - (n_f - 2.0) / 2.0;

    let flux = normal_derivative(grid, &gs.u)?;
    let boundary_term = 0.5 * boundary_quadrature(grid, &flux, BoundaryWeight::XDotNu)?;

    let mut lp = 0.0;
    for idx in 0..gs.u.len() {
        let (i, j) = grid.interior_coords(idx);
        lp += grid.cell_measure(i, j) * gs.u.values[idx].abs().powf(gs.alpha + 1.0);
    }
    let predicted = balance_factor * lp;
    let relative_gap = if predicted.abs() > 0.0 {
        (boundary_term - predicted).abs() / predicted.abs()
    } else {
        boundary_term.abs()
    };
    Ok(NonlinearBalance {
        balance_factor,
        boundary_term,
        predicted,
        relative_gap,
    })
}
