//! Assembly of the discrete quadratic forms attached to `A_λ = -Δ - λ/|x|²`
//! and the boundary machinery built on them.
//!
//! The stiffness forms come from edge sums with midpoint coefficients
//! `r_{i±1/2}^{N-1} sin^{N-2}θ_{j±1/2}`, so symmetry is exact; the mass,
//! inverse-square and logarithmic weights are nodal-lumped diagonals, which
//! keeps every generalized eigenproblem in diagonal-B form.

use crate::bessel;
use crate::error::Error;
use crate::field::{BoundaryField, Field};
use crate::grid::{FaceKind, Grid};
use crate::linalg::CsrMatrix;
use crate::{critical_lambda, Result};
use std::f64::consts::PI;

/// Which quadratic form to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadraticKind {
    /// `∫ |∇u|²`
    Dirichlet,
    /// `∫ u²`
    Mass,
    /// `∫ u² / |x|²`
    Potential,
    /// `∫ u² / (|x|² log²(R/|x|))`
    LogWeight,
    /// `∫ |x|² |∇u|²`
    Radial,
    /// `∫ |∇u|² - λ ∫ u²/|x|²`
    Hardy,
}

/// Weight applied inside a boundary quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryWeight {
    One,
    AbsXSquared,
    XDotNu,
}

/// Coupling of one controllable boundary face (positive `x·ν`) to its
/// adjacent interior node: the Dirichlet-elimination edge weight.
#[derive(Debug, Clone)]
pub struct ArcCoupling {
    /// Index into `grid.boundary_faces`.
    pub face: usize,
    /// Linear interior index of the adjacent node.
    pub node: usize,
    /// Edge weight `w_e` of the eliminated boundary edge.
    pub weight: f64,
}

/// Assembled symmetric forms for a fixed `λ`.
#[derive(Debug)]
pub struct OperatorSet {
    pub lambda: f64,
    pub grid: Grid,
    /// Stiffness `∫|∇u|²` (edge form).
    pub stiffness: CsrMatrix,
    /// Radially weighted stiffness `∫|x|²|∇u|²`.
    pub stiffness_radial: CsrMatrix,
    /// `stiffness - λ · diag(potential)`.
    pub stiffness_lambda: CsrMatrix,
    /// Lumped mass diagonal.
    pub mass: Vec<f64>,
    /// `mass / r²`.
    pub potential: Vec<f64>,
    /// `potential / log²(R/r)`.
    pub log_weight: Vec<f64>,
    /// Controllable-boundary couplings (arc faces).
    pub arc_coupling: Vec<ArcCoupling>,
}

impl OperatorSet {
    pub fn mass_csr(&self) -> CsrMatrix {
        CsrMatrix::from_diagonal(&self.mass)
    }

    pub fn potential_csr(&self) -> CsrMatrix {
        CsrMatrix::from_diagonal(&self.potential)
    }

    pub fn log_weight_csr(&self) -> CsrMatrix {
        CsrMatrix::from_diagonal(&self.log_weight)
    }

    /// `Σ_i mass_i · a_i · b_i`, the discrete `L²` inner product.
    pub fn mass_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.mass
            .iter()
            .zip(a.iter().zip(b))
            .map(|(m, (x, y))| m * x * y)
            .sum()
    }

    pub fn check_field(&self, u: &Field) -> Result<()> {
        u.check_grid(&self.grid)
    }
}

/// Assemble every form for the given `λ ≤ λ(N)`.
pub fn assemble(grid: &Grid, lambda: f64) -> Result<OperatorSet> {
    let lam_n = critical_lambda(grid.dimension);
    if lambda > lam_n {
        return Err(Error::SupercriticalLambda {
            lambda,
            dimension: grid.dimension,
            limit: lam_n,
        });
    }
    if !lambda.is_finite() {
        return Err(Error::InvalidParameter("lambda must be finite".into()));
    }

    let n = grid.interior_count();
    let (n_r, n_t) = (grid.n_r, grid.n_theta);
    let (dr, dt) = (grid.delta_r, grid.delta_theta);
    let dim = grid.dimension as i32;
    let c_n = if grid.dimension == 2 { 1.0 } else { 2.0 * PI };
    let s = |theta: f64| grid.angular_weight(theta);

    let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(10 * n);
    let mut trip_rad: Vec<(usize, usize, f64)> = Vec::with_capacity(10 * n);
    let mut arc_coupling = Vec::with_capacity(n_t - 1);

    let add_edge = |t: &mut Vec<(usize, usize, f64)>, a: Option<usize>, b: Option<usize>, w: f64| {
        match (a, b) {
            (Some(a), Some(b)) => {
                t.push((a, a, w));
                t.push((b, b, w));
                t.push((a, b, -w));
                t.push((b, a, -w));
            }
            (Some(a), None) | (None, Some(a)) => t.push((a, a, w)),
            (None, None) => {}
        }
    };

    // radial edges between rings i and i+1 (i = 0 closes on the origin,
    // i = n_r-1 on the arc)
    for i in 0..n_r {
        let rm = (i as f64 + 0.5) * dr;
        let base = c_n * rm.powi(dim - 1) * dt / dr;
        let base_rad = c_n * rm.powi(dim + 1) * dt / dr;
        for j in 1..n_t {
            let sj = s(grid.theta(j));
            let a = (i >= 1).then(|| grid.interior_index(i, j));
            let b = (i + 1 <= n_r - 1).then(|| grid.interior_index(i + 1, j));
            add_edge(&mut trip, a, b, base * sj);
            add_edge(&mut trip_rad, a, b, base_rad * sj);
            if i == n_r - 1 {
                // eliminated boundary edge: this is the control coupling
                arc_coupling.push(ArcCoupling {
                    face: j - 1, // arc faces lead the face list
                    node: grid.interior_index(n_r - 1, j),
                    weight: base * sj,
                });
            }
        }
    }

    // angular edges between columns j and j+1; for the meridian grid the
    // axis-side edge (j = 0 to 1) is dropped: reflection stencil
    let j_start = if grid.axis_symmetry { 1 } else { 0 };
    for i in 1..n_r {
        let ri = grid.r(i);
        let base = c_n * ri.powi(dim - 3) * dr / dt;
        let base_rad = c_n * ri.powi(dim - 1) * dr / dt;
        for j in j_start..n_t {
            let sm = s((j as f64 + 0.5) * dt);
            let a = (j >= 1).then(|| grid.interior_index(i, j));
            let b = (j + 1 <= n_t - 1).then(|| grid.interior_index(i, j + 1));
            add_edge(&mut trip, a, b, base * sm);
            add_edge(&mut trip_rad, a, b, base_rad * sm);
        }
    }

    let stiffness = CsrMatrix::from_triplets(n, &trip);
    let stiffness_radial = CsrMatrix::from_triplets(n, &trip_rad);

    let mut mass = vec![0.0; n];
    let mut potential = vec![0.0; n];
    let mut log_weight = vec![0.0; n];
    for idx in 0..n {
        let (i, j) = grid.interior_coords(idx);
        let m = grid.cell_measure(i, j);
        let r = grid.r(i);
        mass[idx] = m;
        potential[idx] = m / (r * r);
        let lg = (grid.radius / r).ln();
        log_weight[idx] = potential[idx] / (lg * lg);
    }

    let stiffness_lambda = CsrMatrix::linear_combination(
        1.0,
        &stiffness,
        -lambda,
        &CsrMatrix::from_diagonal(&potential),
    );

    Ok(OperatorSet {
        lambda,
        grid: grid.clone(),
        stiffness,
        stiffness_radial,
        stiffness_lambda,
        mass,
        potential,
        log_weight,
        arc_coupling,
    })
}

/// Evaluate one of the assembled quadratic forms at `u`.
pub fn quadratic_form(ops: &OperatorSet, u: &Field, which: QuadraticKind) -> Result<f64> {
    ops.check_field(u)?;
    let v = &u.values;
    Ok(match which {
        QuadraticKind::Dirichlet => ops.stiffness.quadratic(v),
        QuadraticKind::Mass => diag_quad(&ops.mass, v),
        QuadraticKind::Potential => diag_quad(&ops.potential, v),
        QuadraticKind::LogWeight => diag_quad(&ops.log_weight, v),
        QuadraticKind::Radial => ops.stiffness_radial.quadratic(v),
        QuadraticKind::Hardy => ops.stiffness_lambda.quadratic(v),
    })
}

fn diag_quad(d: &[f64], v: &[f64]) -> f64 {
    d.iter().zip(v).map(|(d, x)| d * x * x).sum()
}

/// Centered radial derivative at the nodes (Dirichlet zeros beyond both the
/// origin ring and the arc).
pub(crate) fn radial_derivative(grid: &Grid, u: &[f64]) -> Vec<f64> {
    let (n_r, n_t) = (grid.n_r, grid.n_theta);
    let cols = n_t - 1;
    let mut d = vec![0.0; u.len()];
    for i in 1..n_r {
        for j in 1..n_t {
            let idx = grid.interior_index(i, j);
            let um = if i >= 2 { u[idx - cols] } else { 0.0 };
            let up = if i + 1 <= n_r - 1 { u[idx + cols] } else { 0.0 };
            d[idx] = (up - um) / (2.0 * grid.delta_r);
        }
    }
    d
}

/// Centered angular derivative; the meridian grid mirrors across the axis
/// (ghost column `u_{i,0} = u_{i,1}`), everything else closes on Dirichlet
/// zeros.
pub(crate) fn theta_derivative(grid: &Grid, u: &[f64]) -> Vec<f64> {
    let (n_r, n_t) = (grid.n_r, grid.n_theta);
    let mut d = vec![0.0; u.len()];
    for i in 1..n_r {
        for j in 1..n_t {
            let idx = grid.interior_index(i, j);
            let um = if j >= 2 {
                u[idx - 1]
            } else if grid.axis_symmetry {
                u[idx] // reflection ghost
            } else {
                0.0
            };
            let up = if j + 1 <= n_t - 1 { u[idx + 1] } else { 0.0 };
            d[idx] = (up - um) / (2.0 * grid.delta_theta);
        }
    }
    d
}

/// `x·∇u = r ∂_r u` sampled at the nodes.
pub(crate) fn radial_multiplier(grid: &Grid, u: &[f64]) -> Vec<f64> {
    let mut d = radial_derivative(grid, u);
    for (idx, v) in d.iter_mut().enumerate() {
        let (i, _) = grid.interior_coords(idx);
        *v *= grid.r(i);
    }
    d
}

/// The sum-of-squares rewriting of the Hardy form,
/// `B_{λ,1}[u] = ∫ |∇u + (N/2)(x/|x|²)u - (e_N/x_N)u|² + (λ(N)-λ) ∫ u²/|x|²`,
/// evaluated through its polar components.
///
/// With `θ` measured from the flat boundary for the half-disk and from the
/// symmetry axis for the half-ball meridian, expanding `e_N` in the local
/// polar frame gives
///
/// - radial component `u_r + ((N-2)/2)(u/r)` in both geometries,
/// - angular component `(u_θ - u·cot θ)/r` for `N = 2` (where `x_N = r sin θ`)
///   and `(u_θ + u·tan θ)/r` for `N = 3` (where `x_N = r cos θ`).
///
/// Both angular corrections stay finite on the grid because `u` vanishes
/// linearly at the Dirichlet faces where the cotangent/tangent blows up.
/// The unit tests pin this decomposition against the Cartesian definition
/// on an off-axis patch.
pub fn regularized_hardy_form(grid: &Grid, lambda: f64, u: &Field) -> Result<f64> {
    u.check_grid(grid)?;
    let lam_n = critical_lambda(grid.dimension);
    if lambda > lam_n {
        return Err(Error::SupercriticalLambda {
            lambda,
            dimension: grid.dimension,
            limit: lam_n,
        });
    }
    let v = &u.values;
    let ur = radial_derivative(grid, v);
    let ut = theta_derivative(grid, v);
    let half_shift = (grid.dimension as f64 - 2.0) / 2.0;
    let mut total = 0.0;
    for idx in 0..v.len() {
        let (i, j) = grid.interior_coords(idx);
        let (r, theta) = (grid.r(i), grid.theta(j));
        let g_r = ur[idx] + half_shift * v[idx] / r;
        let g_t = if grid.dimension == 2 {
            (ut[idx] - v[idx] / theta.tan()) / r
        } else {
            (ut[idx] + v[idx] * theta.tan()) / r
        };
        let m = grid.cell_measure(i, j);
        total += m * (g_r * g_r + g_t * g_t);
        total += (lam_n - lambda) * m / (r * r) * v[idx] * v[idx];
    }
    Ok(total)
}

/// Outward normal derivative on every Dirichlet face by the second-order
/// one-sided stencil that uses the boundary zero:
/// `u'(x_b) ≈ (-4 u_1 + u_2) / (2h)` with `u_1, u_2` the first two interior
/// values walking inward. The origin-limit face reports zero.
pub fn normal_derivative(grid: &Grid, u: &Field) -> Result<BoundaryField> {
    u.check_grid(grid)?;
    let v = &u.values;
    let (n_r, n_t) = (grid.n_r, grid.n_theta);
    let mut out = Vec::with_capacity(grid.boundary_faces.len());
    for face in &grid.boundary_faces {
        let val = match face.kind {
            FaceKind::Arc => {
                let j = face.j;
                let u1 = v[grid.interior_index(n_r - 1, j)];
                let u2 = v[grid.interior_index(n_r - 2, j)];
                (-4.0 * u1 + u2) / (2.0 * grid.delta_r)
            }
            FaceKind::Flat => {
                let i = face.i;
                let r = grid.r(i);
                if face.j == 0 {
                    // θ = 0 side, ν = -θ̂/r direction
                    let u1 = v[grid.interior_index(i, 1)];
                    let u2 = v[grid.interior_index(i, 2)];
                    (-4.0 * u1 + u2) / (2.0 * grid.delta_theta) / r
                } else {
                    // θ = θ_max side, ν = +θ̂/r direction
                    let u1 = v[grid.interior_index(i, n_t - 1)];
                    let u2 = v[grid.interior_index(i, n_t - 2)];
                    (-4.0 * u1 + u2) / (2.0 * grid.delta_theta) / r
                }
            }
            FaceKind::OriginLimit => 0.0,
        };
        out.push(val);
    }
    BoundaryField::from_values(grid, out)
}

/// `Σ_faces weight(face) · b(face)² · surface_weight(face)`.
pub fn boundary_quadrature(grid: &Grid, b: &BoundaryField, weight: BoundaryWeight) -> Result<f64> {
    b.check_grid(grid)?;
    let mut total = 0.0;
    for (face, &val) in grid.boundary_faces.iter().zip(&b.values) {
        let w = match weight {
            BoundaryWeight::One => 1.0,
            BoundaryWeight::AbsXSquared => face.position.0 * face.position.0,
            BoundaryWeight::XDotNu => face.x_dot_nu,
        };
        total += w * val * val * face.surface_weight;
    }
    Ok(total)
}

/// Samples of the critical profile `e₁ = sin θ · J₀(z_{0,1} r)` (half-disk
/// normalization `x_N |x|^{-N/2} J₀(z_{0,1}|x|)` with `N = 2`).
pub fn critical_profile(grid: &Grid) -> Result<Field> {
    if grid.dimension != 2 {
        return Err(Error::InvalidParameter(
            "the critical profile diagnostic is defined on the half-disk (dimension 2)".into(),
        ));
    }
    let z01 = bessel::j0_first_zero();
    let scale = z01 / grid.radius;
    Ok(Field::from_fn(grid, |r, t| t.sin() * bessel::j0(scale * r)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use proptest::prelude::*;
    use rand::{Rng as _, SeedableRng as _};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn eigenmode(r: f64, t: f64) -> f64 {
        t.sin() * (PI * r).sin() / r.sqrt()
    }

    #[test]
    fn rejects_supercritical_lambda() {
        let g = build_grid(2, 8, 8, 1.0).unwrap();
        let err = assemble(&g, 1.5).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("critical Hardy constant"), "{msg}");
        assert!(msg.contains('1'), "{msg}");
    }

    #[test]
    fn lambda_zero_reduces_to_stiffness() {
        let g = build_grid(2, 8, 8, 1.0).unwrap();
        let ops = assemble(&g, 0.0).unwrap();
        assert_eq!(ops.stiffness.data, ops.stiffness_lambda.data);
    }

    #[test]
    fn mass_example_on_the_3x3_grid() {
        let g = build_grid(2, 4, 4, 1.0).unwrap();
        let ops = assemble(&g, 0.0).unwrap();
        let ones = Field::from_fn(&g, |_, _| 1.0);
        let m = quadratic_form(&ops, &ones, QuadraticKind::Mass).unwrap();
        let expected = (0.25 + 0.5 + 0.75) * 0.25 * (PI / 4.0) * 3.0;
        assert!((m - expected).abs() < 1e-13, "{m} vs {expected}");
    }

    #[test]
    fn stiffness_is_exactly_symmetric() {
        for dim in [2, 3] {
            let g = build_grid(dim, 12, 10, 1.0).unwrap();
            let ops = assemble(&g, 0.5).unwrap();
            for a in [&ops.stiffness, &ops.stiffness_radial] {
                for i in 0..a.n {
                    for p in a.indptr[i]..a.indptr[i + 1] {
                        let j = a.indices[p];
                        let mut aji = None;
                        for q in a.indptr[j]..a.indptr[j + 1] {
                            if a.indices[q] == i {
                                aji = Some(a.data[q]);
                            }
                        }
                        assert_eq!(Some(a.data[p]), aji);
                    }
                }
            }
        }
    }

    #[test]
    fn diagonals_positive_and_consistent() {
        for dim in [2, 3] {
            let g = build_grid(dim, 16, 16, 1.0).unwrap();
            let ops = assemble(&g, 0.0).unwrap();
            for idx in 0..g.interior_count() {
                assert!(ops.mass[idx] > 0.0);
                assert!(ops.potential[idx] > 0.0);
                assert!(ops.log_weight[idx] > 0.0);
                let (i, _) = g.interior_coords(idx);
                let r = g.r(i);
                assert_eq!(ops.potential[idx], ops.mass[idx] / (r * r));
                let lg = (g.radius / r).ln();
                assert_eq!(ops.log_weight[idx], ops.potential[idx] / (lg * lg));
            }
        }
    }

    #[test]
    fn eigenmode_rayleigh_quotient_near_pi_squared() {
        let g = build_grid(2, 128, 128, 1.0).unwrap();
        let ops = assemble(&g, 0.75).unwrap();
        let u = Field::from_fn(&g, eigenmode);
        let num = quadratic_form(&ops, &u, QuadraticKind::Hardy).unwrap();
        let den = quadratic_form(&ops, &u, QuadraticKind::Mass).unwrap();
        let q = num / den;
        assert!(
            (q - PI * PI).abs() / (PI * PI) < 0.02,
            "rayleigh {q} vs {}",
            PI * PI
        );
    }

    #[test]
    fn radial_form_bounded_by_scaled_dirichlet() {
        let g = build_grid(2, 64, 64, 1.0).unwrap();
        let ops = assemble(&g, 0.75).unwrap();
        let u = Field::from_fn(&g, eigenmode);
        let rad = quadratic_form(&ops, &u, QuadraticKind::Radial).unwrap();
        let dir = quadratic_form(&ops, &u, QuadraticKind::Dirichlet).unwrap();
        assert!(rad > 0.0);
        assert!(rad <= g.radius * g.radius * dir);
    }

    #[test]
    fn discrete_hardy_lower_bound_on_random_fields() {
        // u^T K_λ u ≥ -0.02·λ(N) · u^T M u for λ = λ(N)
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for dim in [2usize, 3] {
            let g = build_grid(dim, 32, 32, 1.0).unwrap();
            let lam = critical_lambda(dim);
            let ops = assemble(&g, lam).unwrap();
            for _ in 0..10 {
                let u = Field::from_values(
                    &g,
                    (0..g.interior_count())
                        .map(|_| rng.gen_range(-1.0..1.0))
                        .collect(),
                )
                .unwrap();
                let h = quadratic_form(&ops, &u, QuadraticKind::Hardy).unwrap();
                let m = quadratic_form(&ops, &u, QuadraticKind::Mass).unwrap();
                assert!(h >= -0.02 * lam * m, "dim {dim}: {h} vs {m}");
            }
        }
    }

    #[test]
    fn regularized_form_zero_on_zero_field() {
        let g = build_grid(2, 16, 16, 1.0).unwrap();
        let u = Field::zeros(&g);
        assert_eq!(regularized_hardy_form(&g, 1.0, &u).unwrap(), 0.0);
    }

    #[test]
    fn regularized_form_nonnegative_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in [2usize, 3] {
            let g = build_grid(dim, 24, 24, 1.0).unwrap();
            let lam = critical_lambda(dim);
            for _ in 0..10 {
                let u = Field::from_values(
                    &g,
                    (0..g.interior_count())
                        .map(|_| rng.gen_range(-1.0..1.0))
                        .collect(),
                )
                .unwrap();
                let b = regularized_hardy_form(&g, lam, &u).unwrap();
                assert!(b >= 0.0, "dim {dim}: {b}");
            }
        }
    }

    /// The polar-component decomposition must agree with the Cartesian
    /// definition `|∇u + (N/2)(x/|x|²)u - (e_N/x_N)u|²` pointwise. Checked
    /// with analytic derivatives on an off-axis patch.
    #[test]
    fn modified_gradient_matches_cartesian_definition() {
        // test profile u = r² sin(2θ) cos(r); derivatives in closed form
        let u = |r: f64, t: f64| r * r * (2.0 * t).sin() * r.cos();
        let ur = |r: f64, t: f64| (2.0 * r * r.cos() - r * r * r.sin()) * (2.0 * t).sin();
        let ut = |r: f64, t: f64| 2.0 * r * r * (2.0 * t).cos() * r.cos();

        for dim in [2usize, 3] {
            for &(r, t) in &[(0.55f64, 0.9f64), (0.8, 0.5), (0.3, 1.1)] {
                let (g_r, g_t) = {
                    let shift = (dim as f64 - 2.0) / 2.0;
                    let gr = ur(r, t) + shift * u(r, t) / r;
                    let gt = if dim == 2 {
                        (ut(r, t) - u(r, t) / t.tan()) / r
                    } else {
                        (ut(r, t) + u(r, t) * t.tan()) / r
                    };
                    (gr, gt)
                };
                // Cartesian form in the meridian plane: θ measured from the
                // flat boundary (dim 2, x_N = r sin θ) or from the axis
                // (dim 3, x_N = r cos θ).
                let (xhat, that, x_n, e_n_dot_xhat, e_n_dot_that);
                if dim == 2 {
                    xhat = (t.cos(), t.sin());
                    that = (-t.sin(), t.cos());
                    x_n = r * t.sin();
                    e_n_dot_xhat = t.sin();
                    e_n_dot_that = t.cos();
                } else {
                    xhat = (t.sin(), t.cos());
                    that = (t.cos(), -t.sin());
                    x_n = r * t.cos();
                    e_n_dot_xhat = t.cos();
                    e_n_dot_that = -t.sin();
                }
                let grad = (
                    ur(r, t) * xhat.0 + ut(r, t) / r * that.0,
                    ur(r, t) * xhat.1 + ut(r, t) / r * that.1,
                );
                let half_n = dim as f64 / 2.0;
                let gx = (
                    grad.0 + half_n * u(r, t) / r * xhat.0
                        - u(r, t) / x_n * (e_n_dot_xhat * xhat.0 + e_n_dot_that * that.0),
                    grad.1 + half_n * u(r, t) / r * xhat.1
                        - u(r, t) / x_n * (e_n_dot_xhat * xhat.1 + e_n_dot_that * that.1),
                );
                let cart = gx.0 * gx.0 + gx.1 * gx.1;
                let polar = g_r * g_r + g_t * g_t;
                assert!(
                    (cart - polar).abs() < 1e-12 * (1.0 + cart.abs()),
                    "dim {dim} at ({r},{t}): {cart} vs {polar}"
                );
            }
        }
    }

    /// The regularized and plain Hardy forms agree on fields supported away
    /// from the boundary and the origin. Expected values frozen from a
    /// high-resolution quadrature of the analytic bump integrands.
    #[test]
    fn regularized_matches_plain_on_interior_bump() {
        let bump = |r: f64, t: f64| {
            let s1 = (r - 0.5) / 0.2;
            let s2 = (t - PI / 2.0) / (PI / 4.0);
            if s1.abs() < 1.0 && s2.abs() < 1.0 {
                (-1.0 / (1.0 - s1 * s1)).exp() * (-1.0 / (1.0 - s2 * s2)).exp()
            } else {
                0.0
            }
        };
        let g = build_grid(2, 128, 128, 1.0).unwrap();
        let ops = assemble(&g, 1.0).unwrap();
        let u = Field::from_fn(&g, bump);
        let plain = quadratic_form(&ops, &u, QuadraticKind::Hardy).unwrap();
        let reg = regularized_hardy_form(&g, 1.0, &u).unwrap();
        let rel = (reg - plain).abs() / plain.abs();
        assert!(rel < 0.02, "128x128 relative gap {rel}");

        // high-resolution 2-D quadrature oracle for both integrands
        let oracle = bump_oracle();
        assert!(
            (plain - oracle).abs() / oracle < 0.02,
            "plain {plain} vs oracle {oracle}"
        );
        assert!(
            (reg - oracle).abs() / oracle < 0.02,
            "regularized {reg} vs oracle {oracle}"
        );

        // gap shrinks under refinement
        let g2 = build_grid(2, 256, 256, 1.0).unwrap();
        let ops2 = assemble(&g2, 1.0).unwrap();
        let u2 = Field::from_fn(&g2, bump);
        let plain2 = quadratic_form(&ops2, &u2, QuadraticKind::Hardy).unwrap();
        let reg2 = regularized_hardy_form(&g2, 1.0, &u2).unwrap();
        let rel2 = (reg2 - plain2).abs() / plain2.abs();
        assert!(rel2 < rel, "{rel2} !< {rel}");
    }

    /// Midpoint quadrature of the analytic Hardy integrand of the bump at
    /// 1024², independent of the grid machinery (analytic derivatives).
    fn bump_oracle() -> f64 {
        let psi = |s: f64| {
            if s.abs() < 1.0 {
                (-1.0 / (1.0 - s * s)).exp()
            } else {
                0.0
            }
        };
        let dpsi = |s: f64| {
            if s.abs() < 1.0 {
                let d = 1.0 - s * s;
                (-1.0 / d).exp() * (-2.0 * s / (d * d))
            } else {
                0.0
            }
        };
        let n = 1024;
        let (r0, r1) = (0.3, 0.7);
        let (t0, t1) = (PI / 4.0, 3.0 * PI / 4.0);
        let (hr, ht) = ((r1 - r0) / n as f64, (t1 - t0) / n as f64);
        let mut total = 0.0;
        for a in 0..n {
            let r = r0 + (a as f64 + 0.5) * hr;
            for b in 0..n {
                let t = t0 + (b as f64 + 0.5) * ht;
                let s1 = (r - 0.5) / 0.2;
                let s2 = (t - PI / 2.0) / (PI / 4.0);
                let u = psi(s1) * psi(s2);
                let ur = dpsi(s1) / 0.2 * psi(s2);
                let ut = psi(s1) * dpsi(s2) / (PI / 4.0);
                let grad2 = ur * ur + (ut / r) * (ut / r);
                total += (grad2 - u * u / (r * r)) * r * hr * ht;
            }
        }
        total
    }

    #[test]
    fn normal_derivative_zero_field() {
        let g = build_grid(2, 16, 16, 1.0).unwrap();
        let nd = normal_derivative(&g, &Field::zeros(&g)).unwrap();
        assert!(nd.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normal_derivative_of_eigenmode_on_the_arc() {
        let g = build_grid(2, 128, 128, 1.0).unwrap();
        let u = Field::from_fn(&g, eigenmode);
        let nd = normal_derivative(&g, &u).unwrap();
        for fi in g.arc_face_range() {
            let theta = g.boundary_faces[fi].position.1;
            let exact = -PI * theta.sin();
            assert!(
                (nd.values[fi] - exact).abs() < 0.02 * PI,
                "arc flux at θ={theta}: {} vs {exact}",
                nd.values[fi]
            );
        }
    }

    #[test]
    fn normal_derivative_flat_faces_manufactured() {
        // u = x₂(1-r) = r sinθ (1-r): flux -(1-r) on both flat runs
        let g = build_grid(2, 128, 128, 1.0).unwrap();
        let u = Field::from_fn(&g, |r, t| r * t.sin() * (1.0 - r));
        let nd = normal_derivative(&g, &u).unwrap();
        for (face, &v) in g.boundary_faces.iter().zip(&nd.values) {
            if face.kind == FaceKind::Flat {
                let exact = -(1.0 - face.position.0);
                assert!((v - exact).abs() < 1e-3, "{v} vs {exact}");
            }
        }
    }

    #[test]
    fn normal_derivative_second_order_on_smooth_field() {
        let err = |n: usize| {
            let g = build_grid(2, n, n, 1.0).unwrap();
            let u = Field::from_fn(&g, |r, t| t.sin() * (PI * r).sin());
            let nd = normal_derivative(&g, &u).unwrap();
            let mut worst = 0.0f64;
            for fi in g.arc_face_range() {
                let theta = g.boundary_faces[fi].position.1;
                worst = worst.max((nd.values[fi] - (-PI * theta.sin())).abs());
            }
            worst
        };
        let (e1, e2) = (err(32), err(64));
        let order = (e1 / e2).log2();
        assert!(order > 1.7, "observed order {order} ({e1} -> {e2})");
    }

    #[test]
    fn boundary_quadrature_closed_form() {
        let g = build_grid(2, 128, 128, 1.0).unwrap();
        let mut vals = vec![0.0; g.boundary_faces.len()];
        for fi in g.arc_face_range() {
            vals[fi] = -PI * g.boundary_faces[fi].position.1.sin();
        }
        let b = BoundaryField::from_values(&g, vals).unwrap();
        let q = boundary_quadrature(&g, &b, BoundaryWeight::XDotNu).unwrap();
        let exact = PI.powi(3) / 2.0;
        assert!((q - exact).abs() / exact < 0.01, "{q} vs {exact}");
        // |x|² weight equals x·ν weight on the unit arc; flat part is zero here
        let q2 = boundary_quadrature(&g, &b, BoundaryWeight::AbsXSquared).unwrap();
        assert!((q2 - q).abs() < 1e-12);
    }

    #[test]
    fn boundary_quadrature_zero_field() {
        let g = build_grid(3, 8, 8, 1.0).unwrap();
        let b = BoundaryField::zeros(&g);
        assert_eq!(
            boundary_quadrature(&g, &b, BoundaryWeight::XDotNu).unwrap(),
            0.0
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn hardy_equals_dirichlet_minus_lambda_potential(seed in 0u64..1000) {
            let g = build_grid(2, 12, 12, 1.0).unwrap();
            let ops = assemble(&g, 0.6).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = Field::from_values(
                &g,
                (0..g.interior_count()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            ).unwrap();
            let h = quadratic_form(&ops, &u, QuadraticKind::Hardy).unwrap();
            let d = quadratic_form(&ops, &u, QuadraticKind::Dirichlet).unwrap();
            let p = quadratic_form(&ops, &u, QuadraticKind::Potential).unwrap();
            let direct = d - 0.6 * p;
            prop_assert!((h - direct).abs() <= 1e-11 * (1.0 + d.abs() + p.abs()));
        }
    }
}
