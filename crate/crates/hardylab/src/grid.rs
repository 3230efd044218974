//! Polar tensor grid on the unit half-disk (dimension 2) or on the meridian
//! quarter-disk of the axisymmetric half-ball (dimension 3).
//!
//! Interior unknowns sit at `(r_i, θ_j)` with `r_i = i·Δr`, `θ_j = j·Δθ`,
//! `i = 1..n_r-1`, `j = 1..n_θ-1`. The boundary carries Dirichlet data
//! everywhere except the symmetry axis `θ = 0` of the dimension-3 reduction,
//! which is handled by a reflection (Neumann) stencil in the assembly. The
//! origin is a Dirichlet limit point: the first node ring sits at `r = Δr`.

use crate::error::Error;
use crate::Result;
use std::f64::consts::PI;

/// Where a boundary face sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceKind {
    /// Outer circular arc `r = R`.
    Arc,
    /// Flat part of the boundary through the origin (`θ = 0` or `θ = θ_max`
    /// for the half-disk; the equatorial disk `θ = π/2` for the half-ball).
    Flat,
    /// The origin `r → 0`, kept as a measure-zero bookkeeping face.
    OriginLimit,
}

/// One face of the discrete boundary.
#[derive(Debug, Clone)]
pub struct BoundaryFace {
    pub kind: FaceKind,
    /// Grid indices of the face center: arc faces at `(n_r, j)`, flat faces
    /// at `(i, 0)` or `(i, n_θ)`, the origin at `(0, 0)`.
    pub i: usize,
    pub j: usize,
    /// Face center in polar coordinates `(r, θ)`.
    pub position: (f64, f64),
    /// `x · ν` at the face: exactly `R` on the arc, exactly `0` elsewhere.
    pub x_dot_nu: f64,
    /// Measure of the face (arclength for the half-disk, rotated area for
    /// the half-ball meridian).
    pub surface_weight: f64,
}

/// Immutable description of the discrete domain.
#[derive(Debug, Clone)]
pub struct Grid {
    pub dimension: usize,
    pub n_r: usize,
    pub n_theta: usize,
    pub delta_r: f64,
    pub delta_theta: f64,
    pub radius: f64,
    /// Angular extent: `π` for the half-disk, `π/2` for the meridian.
    pub theta_max: f64,
    /// True iff the `θ = 0` side is the symmetry axis (dimension 3).
    pub axis_symmetry: bool,
    pub boundary_faces: Vec<BoundaryFace>,
}

impl Grid {
    /// Number of interior unknowns, `(n_r - 1)(n_θ - 1)`.
    pub fn interior_count(&self) -> usize {
        (self.n_r - 1) * (self.n_theta - 1)
    }

    /// Linear index of the interior node `(i, j)`, `1 ≤ i ≤ n_r-1`,
    /// `1 ≤ j ≤ n_θ-1`.
    #[inline]
    pub fn interior_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= 1 && i <= self.n_r - 1 && j >= 1 && j <= self.n_theta - 1);
        (i - 1) * (self.n_theta - 1) + (j - 1)
    }

    /// Inverse of [`interior_index`](Self::interior_index).
    #[inline]
    pub fn interior_coords(&self, idx: usize) -> (usize, usize) {
        let cols = self.n_theta - 1;
        (idx / cols + 1, idx % cols + 1)
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        i as f64 * self.delta_r
    }

    #[inline]
    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.delta_theta
    }

    /// `(r, θ)` of an interior node by linear index.
    pub fn node_polar(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.interior_coords(idx);
        (self.r(i), self.theta(j))
    }

    /// Volume weight of the measure `c_N r^{N-1} sin^{N-2}θ dr dθ` at a node
    /// (`c_2 = 1`, `c_3 = 2π`), lumped over one cell.
    pub fn cell_measure(&self, i: usize, j: usize) -> f64 {
        let c = if self.dimension == 2 { 1.0 } else { 2.0 * PI };
        c * self.r(i).powi(self.dimension as i32 - 1)
            * self.angular_weight(self.theta(j))
            * self.delta_r
            * self.delta_theta
    }

    /// `sin^{N-2}θ`.
    #[inline]
    pub fn angular_weight(&self, theta: f64) -> f64 {
        if self.dimension == 2 {
            1.0
        } else {
            theta.sin()
        }
    }

    /// Indices of the arc faces within `boundary_faces` (they come first).
    pub fn arc_face_range(&self) -> std::ops::Range<usize> {
        0..self.n_theta - 1
    }

    pub(crate) fn same_layout(&self, other: &Grid) -> bool {
        self.dimension == other.dimension
            && self.n_r == other.n_r
            && self.n_theta == other.n_theta
            && self.radius == other.radius
    }
}

/// Build the discrete domain.
///
/// Errors on `dimension ∉ {2,3}`, non-positive radius, or fewer than 4 nodes
/// per direction.
pub fn build_grid(dimension: usize, n_r: usize, n_theta: usize, radius: f64) -> Result<Grid> {
    if dimension != 2 && dimension != 3 {
        return Err(Error::InvalidParameter(format!(
            "dimension must be 2 or 3, got {dimension}"
        )));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "radius must be positive and finite, got {radius}"
        )));
    }
    if n_r < 4 || n_theta < 4 {
        return Err(Error::InvalidParameter(format!(
            "grid needs n_r >= 4 and n_theta >= 4, got ({n_r}, {n_theta})"
        )));
    }

    let theta_max = if dimension == 2 { PI } else { PI / 2.0 };
    let delta_r = radius / n_r as f64;
    let delta_theta = theta_max / n_theta as f64;
    let surf_c = if dimension == 2 { 1.0 } else { 2.0 * PI };

    let mut faces = Vec::new();

    // Arc faces, one per interior angular column. End faces widen by Δθ/2 so
    // the widths tile the whole arc.
    for j in 1..n_theta {
        let theta = j as f64 * delta_theta;
        let mut width = delta_theta;
        if j == 1 || j == n_theta - 1 {
            width += delta_theta / 2.0;
        }
        let s = if dimension == 2 { 1.0 } else { theta.sin() };
        faces.push(BoundaryFace {
            kind: FaceKind::Arc,
            i: n_r,
            j,
            position: (radius, theta),
            x_dot_nu: radius,
            surface_weight: surf_c * radius.powi(dimension as i32 - 1) * s * width,
        });
    }

    // Flat faces along each flat boundary run, one per interior radial ring;
    // end faces widen by Δr/2 to reach the origin and the arc corner.
    let flat_sides: &[usize] = if dimension == 2 {
        &[0, usize::MAX] // θ = 0 and θ = θ_max
    } else {
        &[usize::MAX] // only θ = π/2; θ = 0 is the symmetry axis
    };
    for &side in flat_sides {
        let j_face = if side == 0 { 0 } else { n_theta };
        let theta = if side == 0 { 0.0 } else { theta_max };
        for i in 1..n_r {
            let r = i as f64 * delta_r;
            let mut width = delta_r;
            if i == 1 || i == n_r - 1 {
                width += delta_r / 2.0;
            }
            // measure along the flat part: dr for the segment, 2πr dr for
            // the equatorial disk
            let w = if dimension == 2 {
                width
            } else {
                2.0 * PI * r * width
            };
            faces.push(BoundaryFace {
                kind: FaceKind::Flat,
                i,
                j: j_face,
                position: (r, theta),
                x_dot_nu: 0.0,
                surface_weight: w,
            });
        }
    }

    faces.push(BoundaryFace {
        kind: FaceKind::OriginLimit,
        i: 0,
        j: 0,
        position: (0.0, 0.0),
        x_dot_nu: 0.0,
        surface_weight: 0.0,
    });

    Ok(Grid {
        dimension,
        n_r,
        n_theta,
        delta_r,
        delta_theta,
        radius,
        theta_max,
        axis_symmetry: dimension == 3,
        boundary_faces: faces,
    })
}
