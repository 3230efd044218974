//! Internal time-stepping cores and the discrete HUM machinery shared by
//! the evolution and control modules.
//!
//! The wave stepper is the implicit midpoint rule on the first-order system;
//! nonhomogeneous Dirichlet data enters through the eliminated boundary
//! edges (coupling matrix `C`), sampled at the step midpoints. With the
//! boundary flux defined through the same coupling,
//! `g = -D⁻¹ Cᵀ v_mid`, the discrete transposition identity
//!
//! `[pᵀMv - uᵀMq]₀ᵀ = -Δt Σ h̄ᵀ Cᵀ v̄`
//!
//! holds exactly, which makes the control Gramian symmetric positive
//! semidefinite in the discrete energy inner product to machine precision.

use crate::error::Error;
use crate::linalg::{BandedCholesky, CsrMatrix};
use crate::operators::OperatorSet;
use crate::Result;

/// Arc-face coupling data in array form.
pub(crate) struct ArcData {
    /// Interior node adjacent to each controllable face.
    pub nodes: Vec<usize>,
    /// Eliminated edge weights `w_e`.
    pub weights: Vec<f64>,
    /// Midpoint surface measures `D_f = w_e · Δr`.
    pub d: Vec<f64>,
    /// `x·ν` per face.
    pub x: Vec<f64>,
    /// Face indices into `grid.boundary_faces`.
    pub faces: Vec<usize>,
}

impl ArcData {
    pub fn new(ops: &OperatorSet) -> ArcData {
        let dr = ops.grid.delta_r;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut d = Vec::new();
        let mut x = Vec::new();
        let mut faces = Vec::new();
        for c in &ops.arc_coupling {
            nodes.push(c.node);
            weights.push(c.weight);
            d.push(c.weight * dr);
            x.push(ops.grid.boundary_faces[c.face].x_dot_nu);
            faces.push(c.face);
        }
        ArcData {
            nodes,
            weights,
            d,
            x,
            faces,
        }
    }

    pub fn n_faces(&self) -> usize {
        self.nodes.len()
    }

    /// Midpoint flux `g = -D⁻¹ Cᵀ v_mid` (second-order at the half-node).
    pub fn flux(&self, v_mid: &[f64], dr: f64, out: &mut [f64]) {
        for (k, &node) in self.nodes.iter().enumerate() {
            out[k] = v_mid[node] / dr;
        }
    }

    /// Accumulate `-(C h)` into an interior vector: `+w_e · h_f` at the
    /// adjacent node.
    pub fn scatter_control(&self, h: &[f64], out: &mut [f64]) {
        for (k, &node) in self.nodes.iter().enumerate() {
            out[node] += self.weights[k] * h[k];
        }
    }
}

/// Implicit midpoint stepper for `M v̈ + K_λ v = -C h`.
pub(crate) struct WaveStepper<'a> {
    pub ops: &'a OperatorSet,
    chol: BandedCholesky,
    pub dt: f64,
}

impl<'a> WaveStepper<'a> {
    pub fn new(ops: &'a OperatorSet, dt: f64) -> Result<WaveStepper<'a>> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let mass = CsrMatrix::from_diagonal(&ops.mass);
        let system = CsrMatrix::linear_combination(
            1.0,
            &mass,
            dt * dt / 4.0,
            &ops.stiffness_lambda,
        );
        let chol = BandedCholesky::factor(&system)?;
        Ok(WaveStepper { ops, chol, dt })
    }

    /// One midpoint step with signed `dt` (the system matrix is even in
    /// `dt`, so the same factorization serves both directions).
    /// `control` holds `-(C h̄)` pre-scattered on the interior.
    pub fn step(&self, v: &mut Vec<f64>, w: &mut Vec<f64>, dt: f64, control: Option<&[f64]>) {
        let n = v.len();
        let kv = self.ops.stiffness_lambda.mul_vec_alloc(v);
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = self.ops.mass[i] * (v[i] + dt * w[i]) - dt * dt / 4.0 * kv[i];
        }
        if let Some(c) = control {
            for i in 0..n {
                rhs[i] += dt * dt / 2.0 * c[i];
            }
        }
        self.chol.solve_in_place(&mut rhs);
        for i in 0..n {
            let w_new = 2.0 / dt * (rhs[i] - v[i]) - w[i];
            v[i] = rhs[i];
            w[i] = w_new;
        }
    }

    pub fn energy(&self, v: &[f64], w: &[f64]) -> f64 {
        0.5 * (self.ops.mass_dot(w, w) + self.ops.stiffness_lambda.quadratic(v))
    }
}

/// Crank-Nicolson stepper for `i M u̇ = -(K_λ u + C h)` in split form, via
/// the Schur complement `T = M + (Δt²/4) K M⁻¹ K` (one refinement pass per
/// solve keeps the mass drift at rounding level).
pub(crate) struct SchrodingerStepper<'a> {
    pub ops: &'a OperatorSet,
    chol: BandedCholesky,
    pub dt: f64,
}

impl<'a> SchrodingerStepper<'a> {
    pub fn new(ops: &'a OperatorSet, dt: f64) -> Result<SchrodingerStepper<'a>> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let minv: Vec<f64> = ops.mass.iter().map(|m| 1.0 / m).collect();
        let kmk = ops.stiffness_lambda.scaled_square(&minv);
        let system = CsrMatrix::linear_combination(
            1.0,
            &CsrMatrix::from_diagonal(&ops.mass),
            dt * dt / 4.0,
            &kmk,
        );
        let chol = BandedCholesky::factor(&system)?;
        Ok(SchrodingerStepper { ops, chol, dt })
    }

    /// One step with signed `dt`. `c_re`, `c_im` hold `-(C h̄)` scattered on
    /// the interior.
    pub fn step(
        &self,
        a: &mut Vec<f64>,
        b: &mut Vec<f64>,
        dt: f64,
        c_re: Option<&[f64]>,
        c_im: Option<&[f64]>,
    ) {
        let n = a.len();
        let k = &self.ops.stiffness_lambda;
        let m = &self.ops.mass;
        let ka = k.mul_vec_alloc(a);
        let kb = k.mul_vec_alloc(b);
        // ra = M a - dt/2 K b - dt (C h)_im ; rb = M b + dt/2 K a + dt (C h)_re
        let mut ra = vec![0.0; n];
        let mut rb = vec![0.0; n];
        for i in 0..n {
            ra[i] = m[i] * a[i] - dt / 2.0 * kb[i];
            rb[i] = m[i] * b[i] + dt / 2.0 * ka[i];
        }
        if let Some(c) = c_im {
            for i in 0..n {
                ra[i] += dt * c[i];
            }
        }
        if let Some(c) = c_re {
            for i in 0..n {
                rb[i] -= dt * c[i];
            }
        }
        // T a' = ra - dt/2 K M⁻¹ rb
        let mrb: Vec<f64> = rb.iter().zip(m).map(|(r, m)| r / m).collect();
        let kmrb = k.mul_vec_alloc(&mrb);
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = ra[i] - dt / 2.0 * kmrb[i];
        }
        let mut a_new = self.chol.solve(&rhs);
        // one pass of iterative refinement on T a' = rhs
        let t_apply = |x: &[f64]| -> Vec<f64> {
            let kx = k.mul_vec_alloc(x);
            let mkx: Vec<f64> = kx.iter().zip(m).map(|(v, m)| v / m).collect();
            let kmkx = k.mul_vec_alloc(&mkx);
            (0..n)
                .map(|i| m[i] * x[i] + dt * dt / 4.0 * kmkx[i])
                .collect()
        };
        let ta = t_apply(&a_new);
        let resid: Vec<f64> = (0..n).map(|i| rhs[i] - ta[i]).collect();
        let corr = self.chol.solve(&resid);
        for i in 0..n {
            a_new[i] += corr[i];
        }
        // b' = M⁻¹ (rb + dt/2 K a')
        let ka_new = k.mul_vec_alloc(&a_new);
        for i in 0..n {
            b[i] = (rb[i] + dt / 2.0 * ka_new[i]) / m[i];
        }
        *a = a_new;
    }

    pub fn mass_of(&self, a: &[f64], b: &[f64]) -> f64 {
        self.ops.mass_dot(a, a) + self.ops.mass_dot(b, b)
    }
}

// ---------------------------------------------------------------------------
// wave HUM machine
// ---------------------------------------------------------------------------

/// Everything needed to apply the wave control Gramian.
pub(crate) struct WaveHum<'a> {
    pub stepper: WaveStepper<'a>,
    pub arc: ArcData,
    pub kchol: BandedCholesky,
    pub n_steps: usize,
}

impl<'a> WaveHum<'a> {
    pub fn new(ops: &'a OperatorSet, t_final: f64, dt: f64) -> Result<WaveHum<'a>> {
        if !(t_final > 0.0) || t_final < dt {
            return Err(Error::InvalidParameter(format!(
                "final time {t_final} must be at least one step {dt}"
            )));
        }
        let n_steps = (t_final / dt).round() as usize;
        let stepper = WaveStepper::new(ops, dt)?;
        let kchol = BandedCholesky::factor(&ops.stiffness_lambda)?;
        Ok(WaveHum {
            stepper,
            arc: ArcData::new(ops),
            kchol,
            n_steps,
        })
    }

    fn ops(&self) -> &OperatorSet {
        self.stepper.ops
    }

    /// Adjoint run from `(v0, v1)`, recording midpoint fluxes per step.
    pub fn observe(&self, v0: &[f64], v1: &[f64]) -> Vec<Vec<f64>> {
        let dr = self.ops().grid.delta_r;
        let mut v = v0.to_vec();
        let mut w = v1.to_vec();
        let mut fluxes = Vec::with_capacity(self.n_steps);
        let mut g = vec![0.0; self.arc.n_faces()];
        for _ in 0..self.n_steps {
            let v_prev = v.clone();
            self.stepper.step(&mut v, &mut w, self.stepper.dt, None);
            let v_mid: Vec<f64> = v_prev
                .iter()
                .zip(&v)
                .map(|(a, b)| 0.5 * (a + b))
                .collect();
            self.arc.flux(&v_mid, dr, &mut g);
            fluxes.push(g.clone());
        }
        fluxes
    }

    /// `G(a, a) = Δt Σ_n Σ_f X_f D_f g²` for adjoint data `a`.
    pub fn gram_quad(&self, v0: &[f64], v1: &[f64]) -> f64 {
        let fluxes = self.observe(v0, v1);
        self.gram_of_fluxes(&fluxes, &fluxes)
    }

    pub fn gram_of_fluxes(&self, ga: &[Vec<f64>], gb: &[Vec<f64>]) -> f64 {
        let mut total = 0.0;
        for (ra, rb) in ga.iter().zip(gb) {
            for k in 0..self.arc.n_faces() {
                total += self.arc.x[k] * self.arc.d[k] * ra[k] * rb[k];
            }
        }
        total * self.stepper.dt
    }

    /// Control samples `h = X g` from adjoint data.
    pub fn control_of(&self, v0: &[f64], v1: &[f64]) -> Vec<Vec<f64>> {
        let mut h = self.observe(v0, v1);
        for row in h.iter_mut() {
            for (k, val) in row.iter_mut().enumerate() {
                *val *= self.arc.x[k];
            }
        }
        h
    }

    /// Run the controlled recurrence backward from zero final data.
    pub fn backward_from_zero(&self, h: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let n = self.ops().grid.interior_count();
        let mut u = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut c = vec![0.0; n];
        for step in (0..self.n_steps).rev() {
            c.iter_mut().for_each(|x| *x = 0.0);
            self.arc.scatter_control(&h[step], &mut c);
            self.stepper.step(&mut u, &mut p, -self.stepper.dt, Some(&c));
        }
        (u, p)
    }

    /// Forward controlled run; returns the final state and the energies at
    /// both ends.
    pub fn forward_with_control(
        &self,
        u0: &[f64],
        u1: &[f64],
        h: &[Vec<f64>],
    ) -> (Vec<f64>, Vec<f64>, f64, f64) {
        let n = self.ops().grid.interior_count();
        let mut u = u0.to_vec();
        let mut p = u1.to_vec();
        let e0 = self.stepper.energy(&u, &p);
        let mut c = vec![0.0; n];
        for row in h.iter().take(self.n_steps) {
            c.iter_mut().for_each(|x| *x = 0.0);
            self.arc.scatter_control(row, &mut c);
            self.stepper.step(&mut u, &mut p, self.stepper.dt, Some(&c));
        }
        let et = self.stepper.energy(&u, &p);
        (u, p, e0, et)
    }

    /// The Gramian `Λ a`, Riesz-represented in the energy inner product
    /// `(K_λ for the position slot, M for the velocity slot)`.
    pub fn apply(&self, v0: &[f64], v1: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h = self.control_of(v0, v1);
        let (u0h, p0h) = self.backward_from_zero(&h);
        let m = &self.ops().mass;
        let y0: Vec<f64> = p0h.iter().zip(m).map(|(p, m)| -m * p).collect();
        let slot0 = self.kchol.solve(&y0);
        (slot0, u0h)
    }

    /// `b` encoding the initial data `(u0, u1)`: `(-K_λ⁻¹ M u1, u0)`.
    pub fn rhs(&self, u0: &[f64], u1: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = &self.ops().mass;
        let y: Vec<f64> = u1.iter().zip(m).map(|(u, m)| -m * u).collect();
        (self.kchol.solve(&y), u0.to_vec())
    }

    /// Energy inner product of adjoint-data pairs.
    pub fn edot(&self, a: (&[f64], &[f64]), b: (&[f64], &[f64])) -> f64 {
        let k = &self.ops().stiffness_lambda;
        let ka = k.mul_vec_alloc(a.0);
        crate::linalg::dot(&ka, b.0) + self.ops().mass_dot(a.1, b.1)
    }
}

// ---------------------------------------------------------------------------
// Schrödinger HUM machine
// ---------------------------------------------------------------------------

pub(crate) struct SchrodingerHum<'a> {
    pub stepper: SchrodingerStepper<'a>,
    pub arc: ArcData,
    pub kchol: BandedCholesky,
    pub n_steps: usize,
}

impl<'a> SchrodingerHum<'a> {
    pub fn new(ops: &'a OperatorSet, t_final: f64, dt: f64) -> Result<SchrodingerHum<'a>> {
        if !(t_final > 0.0) || t_final < dt {
            return Err(Error::InvalidParameter(format!(
                "final time {t_final} must be at least one step {dt}"
            )));
        }
        let n_steps = (t_final / dt).round() as usize;
        let stepper = SchrodingerStepper::new(ops, dt)?;
        let kchol = BandedCholesky::factor(&ops.stiffness_lambda)?;
        Ok(SchrodingerHum {
            stepper,
            arc: ArcData::new(ops),
            kchol,
            n_steps,
        })
    }

    fn ops(&self) -> &OperatorSet {
        self.stepper.ops
    }

    /// Adjoint run recording complex midpoint fluxes `(re, im)` per step.
    pub fn observe(&self, z_re: &[f64], z_im: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
        let dr = self.ops().grid.delta_r;
        let mut a = z_re.to_vec();
        let mut b = z_im.to_vec();
        let mut out = Vec::with_capacity(self.n_steps);
        let nf = self.arc.n_faces();
        for _ in 0..self.n_steps {
            let a_prev = a.clone();
            let b_prev = b.clone();
            self.stepper.step(&mut a, &mut b, self.stepper.dt, None, None);
            let a_mid: Vec<f64> = a_prev.iter().zip(&a).map(|(x, y)| 0.5 * (x + y)).collect();
            let b_mid: Vec<f64> = b_prev.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let mut gre = vec![0.0; nf];
            let mut gim = vec![0.0; nf];
            self.arc.flux(&a_mid, dr, &mut gre);
            self.arc.flux(&b_mid, dr, &mut gim);
            out.push((gre, gim));
        }
        out
    }

    pub fn control_of(&self, z_re: &[f64], z_im: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut h = self.observe(z_re, z_im);
        for (re, im) in h.iter_mut() {
            for k in 0..self.arc.n_faces() {
                re[k] *= self.arc.x[k];
                im[k] *= self.arc.x[k];
            }
        }
        h
    }

    pub fn gram_of_fluxes(
        &self,
        ga: &[(Vec<f64>, Vec<f64>)],
        gb: &[(Vec<f64>, Vec<f64>)],
    ) -> f64 {
        let mut total = 0.0;
        for (ra, rb) in ga.iter().zip(gb) {
            for k in 0..self.arc.n_faces() {
                total += self.arc.x[k] * self.arc.d[k] * (ra.0[k] * rb.0[k] + ra.1[k] * rb.1[k]);
            }
        }
        total * self.stepper.dt
    }

    pub fn backward_from_zero(&self, h: &[(Vec<f64>, Vec<f64>)]) -> (Vec<f64>, Vec<f64>) {
        let n = self.ops().grid.interior_count();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut cre = vec![0.0; n];
        let mut cim = vec![0.0; n];
        for step in (0..self.n_steps).rev() {
            cre.iter_mut().for_each(|x| *x = 0.0);
            cim.iter_mut().for_each(|x| *x = 0.0);
            self.arc.scatter_control(&h[step].0, &mut cre);
            self.arc.scatter_control(&h[step].1, &mut cim);
            self.stepper
                .step(&mut a, &mut b, -self.stepper.dt, Some(&cre), Some(&cim));
        }
        (a, b)
    }

    pub fn forward_with_control(
        &self,
        u0_re: &[f64],
        u0_im: &[f64],
        h: &[(Vec<f64>, Vec<f64>)],
    ) -> (Vec<f64>, Vec<f64>, f64, f64) {
        let n = self.ops().grid.interior_count();
        let mut a = u0_re.to_vec();
        let mut b = u0_im.to_vec();
        let m0 = self.stepper.mass_of(&a, &b);
        let mut cre = vec![0.0; n];
        let mut cim = vec![0.0; n];
        for row in h.iter().take(self.n_steps) {
            cre.iter_mut().for_each(|x| *x = 0.0);
            cim.iter_mut().for_each(|x| *x = 0.0);
            self.arc.scatter_control(&row.0, &mut cre);
            self.arc.scatter_control(&row.1, &mut cim);
            self.stepper
                .step(&mut a, &mut b, self.stepper.dt, Some(&cre), Some(&cim));
        }
        let mt = self.stepper.mass_of(&a, &b);
        (a, b, m0, mt)
    }

    /// Gramian application in the `H_λ` geometry of the complex adjoint
    /// data: `Λ z = K_λ⁻¹ M (-i u₀ʰ)`.
    pub fn apply(&self, z_re: &[f64], z_im: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h = self.control_of(z_re, z_im);
        let (a0, b0) = self.backward_from_zero(&h);
        // -i (a + ib) = b - ia
        let m = &self.ops().mass;
        let re: Vec<f64> = b0.iter().zip(m).map(|(v, m)| m * v).collect();
        let im: Vec<f64> = a0.iter().zip(m).map(|(v, m)| -m * v).collect();
        (self.kchol.solve(&re), self.kchol.solve(&im))
    }

    /// `b = K_λ⁻¹ M (-i u0)`.
    pub fn rhs(&self, u0_re: &[f64], u0_im: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = &self.ops().mass;
        let re: Vec<f64> = u0_im.iter().zip(m).map(|(v, m)| m * v).collect();
        let im: Vec<f64> = u0_re.iter().zip(m).map(|(v, m)| -m * v).collect();
        (self.kchol.solve(&re), self.kchol.solve(&im))
    }

    /// Real `H_λ` inner product on split complex fields.
    pub fn kdot(&self, a: (&[f64], &[f64]), b: (&[f64], &[f64])) -> f64 {
        let k = &self.ops().stiffness_lambda;
        let k0 = k.mul_vec_alloc(a.0);
        let k1 = k.mul_vec_alloc(a.1);
        crate::linalg::dot(&k0, b.0) + crate::linalg::dot(&k1, b.1)
    }
}
