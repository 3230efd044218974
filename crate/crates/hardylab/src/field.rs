//! Grid functions: real and complex interior fields, boundary-face traces.

use crate::error::Error;
use crate::grid::Grid;
use crate::Result;

/// Real-valued grid function on the interior nodes.
#[derive(Debug, Clone)]
pub struct Field {
    pub values: Vec<f64>,
    stamp: (usize, usize, usize),
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Field {
            values: vec![0.0; grid.interior_count()],
            stamp: stamp(grid),
        }
    }

    /// Sample `f(r, θ)` at the interior nodes.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut v = Vec::with_capacity(grid.interior_count());
        for idx in 0..grid.interior_count() {
            let (r, t) = grid.node_polar(idx);
            v.push(f(r, t));
        }
        Field {
            values: v,
            stamp: stamp(grid),
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.interior_count() {
            return Err(Error::GridMismatch(format!(
                "field length {} does not match interior count {}",
                values.len(),
                grid.interior_count()
            )));
        }
        Ok(Field {
            values,
            stamp: stamp(grid),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.stamp != stamp(grid) {
            return Err(Error::GridMismatch(
                "field was built on a different grid".into(),
            ));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field {
            values: self.values.iter().map(|v| c * v).collect(),
            stamp: self.stamp,
        }
    }

    /// `self + c · other`.
    pub fn axpy(&self, c: f64, other: &Field) -> Field {
        Field {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + c * b)
                .collect(),
            stamp: self.stamp,
        }
    }
}

/// Complex grid function stored as split real and imaginary parts.
#[derive(Debug, Clone)]
pub struct CxField {
    pub re: Field,
    pub im: Field,
}

impl CxField {
    pub fn zeros(grid: &Grid) -> Self {
        CxField {
            re: Field::zeros(grid),
            im: Field::zeros(grid),
        }
    }

    /// Sample `f(r, θ) -> (re, im)` at the interior nodes.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let mut re = Vec::with_capacity(grid.interior_count());
        let mut im = Vec::with_capacity(grid.interior_count());
        for idx in 0..grid.interior_count() {
            let (r, t) = grid.node_polar(idx);
            let (a, b) = f(r, t);
            re.push(a);
            im.push(b);
        }
        CxField {
            re: Field::from_values(grid, re).expect("sampled on the same grid"),
            im: Field::from_values(grid, im).expect("sampled on the same grid"),
        }
    }

    pub fn from_real(re: Field) -> Self {
        let im = Field {
            values: vec![0.0; re.len()],
            stamp: re.stamp,
        };
        CxField { re, im }
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        self.re.check_grid(grid)?;
        self.im.check_grid(grid)
    }
}

/// One value per boundary face, aligned with `grid.boundary_faces`.
#[derive(Debug, Clone)]
pub struct BoundaryField {
    pub values: Vec<f64>,
    stamp: (usize, usize, usize),
}

impl BoundaryField {
    pub fn zeros(grid: &Grid) -> Self {
        BoundaryField {
            values: vec![0.0; grid.boundary_faces.len()],
            stamp: stamp(grid),
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.boundary_faces.len() {
            return Err(Error::GridMismatch(format!(
                "boundary field length {} does not match face count {}",
                values.len(),
                grid.boundary_faces.len()
            )));
        }
        Ok(BoundaryField {
            values,
            stamp: stamp(grid),
        })
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.stamp != stamp(grid) || self.values.len() != grid.boundary_faces.len() {
            return Err(Error::GridMismatch(
                "boundary field was built on a different grid".into(),
            ));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

fn stamp(grid: &Grid) -> (usize, usize, usize) {
    (grid.dimension, grid.n_r, grid.n_theta)
}
