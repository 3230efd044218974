//! Small dense and sparse linear algebra kernels: symmetric CSR matrices,
//! banded Cholesky, Jacobi-preconditioned CG, cyclic Jacobi for small dense
//! eigenproblems, and Sturm bisection for symmetric tridiagonal pencils.

use crate::error::Error;
use crate::Result;

/// Symmetric sparse matrix in CSR layout. Only used for matrices whose full
/// pattern (both triangles) is stored.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl CsrMatrix {
    /// Build from triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> CsrMatrix {
        let mut counts = vec![0usize; n + 1];
        for &(r, _, _) in triplets {
            counts[r + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0f64; triplets.len()];
        let mut cursor = counts.clone();
        for &(r, c, v) in triplets {
            let p = cursor[r];
            cols[p] = c;
            vals[p] = v;
            cursor[r] += 1;
        }
        // sort each row and merge duplicates
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data = Vec::with_capacity(triplets.len());
        let mut row: Vec<(usize, f64)> = Vec::new();
        for i in 0..n {
            row.clear();
            for p in counts[i]..counts[i + 1] {
                row.push((cols[p], vals[p]));
            }
            row.sort_unstable_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut v = row[k].1;
                let mut m = k + 1;
                while m < row.len() && row[m].0 == c {
                    v += row[m].1;
                    m += 1;
                }
                indices.push(c);
                data.push(v);
                k = m;
            }
            indptr[i + 1] = indices.len();
        }
        CsrMatrix {
            n,
            indptr,
            indices,
            data,
        }
    }

    pub fn from_diagonal(d: &[f64]) -> CsrMatrix {
        let n = d.len();
        CsrMatrix {
            n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: d.to_vec(),
        }
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let mut s = 0.0;
            for p in self.indptr[i]..self.indptr[i + 1] {
                s += self.data[p] * x[self.indices[p]];
            }
            y[i] = s;
        }
    }

    pub fn mul_vec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec(x, &mut y);
        y
    }

    /// `x^T A x`.
    pub fn quadratic(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            let mut row = 0.0;
            for p in self.indptr[i]..self.indptr[i + 1] {
                row += self.data[p] * x[self.indices[p]];
            }
            s += x[i] * row;
        }
        s
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for p in self.indptr[i]..self.indptr[i + 1] {
                if self.indices[p] == i {
                    d[i] = self.data[p];
                }
            }
        }
        d
    }

    /// `alpha·A + beta·B` (patterns merged).
    pub fn linear_combination(alpha: f64, a: &CsrMatrix, beta: f64, b: &CsrMatrix) -> CsrMatrix {
        assert_eq!(a.n, b.n);
        let n = a.n;
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(a.indices.len().max(b.indices.len()));
        let mut data = Vec::with_capacity(indices.capacity());
        for i in 0..n {
            let (mut pa, ea) = (a.indptr[i], a.indptr[i + 1]);
            let (mut pb, eb) = (b.indptr[i], b.indptr[i + 1]);
            while pa < ea || pb < eb {
                let ca = if pa < ea { a.indices[pa] } else { usize::MAX };
                let cb = if pb < eb { b.indices[pb] } else { usize::MAX };
                if ca < cb {
                    indices.push(ca);
                    data.push(alpha * a.data[pa]);
                    pa += 1;
                } else if cb < ca {
                    indices.push(cb);
                    data.push(beta * b.data[pb]);
                    pb += 1;
                } else {
                    indices.push(ca);
                    data.push(alpha * a.data[pa] + beta * b.data[pb]);
                    pa += 1;
                    pb += 1;
                }
            }
            indptr[i + 1] = indices.len();
        }
        CsrMatrix {
            n,
            indptr,
            indices,
            data,
        }
    }

    /// `A · diag(d) · A` for symmetric `A` (used for the Crank-Nicolson
    /// Schur complement). Pattern radius doubles.
    pub fn scaled_square(&self, d: &[f64]) -> CsrMatrix {
        let n = self.n;
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        let mut acc: Vec<f64> = vec![0.0; n];
        let mut touched: Vec<usize> = Vec::new();
        for i in 0..n {
            for p in self.indptr[i]..self.indptr[i + 1] {
                let k = self.indices[p];
                let v = self.data[p] * d[k];
                for q in self.indptr[k]..self.indptr[k + 1] {
                    let j = self.indices[q];
                    if acc[j] == 0.0 && !touched.contains(&j) {
                        touched.push(j);
                    }
                    acc[j] += v * self.data[q];
                }
            }
            for &j in &touched {
                triplets.push((i, j, acc[j]));
                acc[j] = 0.0;
            }
            touched.clear();
        }
        CsrMatrix::from_triplets(n, &triplets)
    }

    pub fn bandwidth(&self) -> usize {
        let mut bw = 0;
        for i in 0..self.n {
            for p in self.indptr[i]..self.indptr[i + 1] {
                bw = bw.max(i.abs_diff(self.indices[p]));
            }
        }
        bw
    }
}

/// Cholesky factorization of a banded SPD matrix, stored row-major as
/// `band[i][k] = L[i, i - bw + k]`, `k = 0..=bw`.
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<BandedCholesky> {
        let n = a.n;
        let bw = a.bandwidth();
        let w = bw + 1;
        let mut band = vec![0.0f64; n * w];
        for i in 0..n {
            for p in a.indptr[i]..a.indptr[i + 1] {
                let j = a.indices[p];
                if j <= i {
                    band[i * w + (bw - (i - j))] = a.data[p];
                }
            }
        }
        // in-place banded Cholesky
        for i in 0..n {
            let start = i.saturating_sub(bw);
            for j in start..i {
                // L[i][j] = (A[i][j] - sum_k L[i][k] L[j][k]) / L[j][j]
                let kstart = start.max(j.saturating_sub(bw));
                let mut s = band[i * w + (bw - (i - j))];
                for k in kstart..j {
                    s -= band[i * w + (bw - (i - k))] * band[j * w + (bw - (j - k))];
                }
                band[i * w + (bw - (i - j))] = s / band[j * w + bw];
            }
            let mut s = band[i * w + bw];
            for k in start..i {
                let l = band[i * w + (bw - (i - k))];
                s -= l * l;
            }
            if s <= 0.0 || !s.is_finite() {
                return Err(Error::NotPositiveDefinite(format!(
                    "banded Cholesky pivot {s:.3e} at row {i}"
                )));
            }
            band[i * w + bw] = s.sqrt();
        }
        Ok(BandedCholesky { n, bw, band })
    }

    /// Solve `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        // forward: L y = b
        for i in 0..n {
            let start = i.saturating_sub(bw);
            let mut s = b[i];
            for k in start..i {
                s -= self.band[i * w + (bw - (i - k))] * b[k];
            }
            b[i] = s / self.band[i * w + bw];
        }
        // backward: L^T x = y
        for i in (0..n).rev() {
            let end = (i + bw).min(n - 1);
            let mut s = b[i];
            for k in (i + 1)..=end {
                s -= self.band[k * w + (bw - (k - i))] * b[k];
            }
            b[i] = s / self.band[i * w + bw];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Jacobi-preconditioned CG for SPD `A x = b`; stops when
/// `‖b - A x‖₂ ≤ tol · ‖b‖₂`.
pub fn pcg(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> CgResult {
    let n = a.n;
    let norm_b = norm2(b);
    if norm_b == 0.0 {
        return CgResult {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let dinv: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d.max(1e-300)).collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.mul_vec(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = norm2(&r) / norm_b;
        if res <= tol {
            return CgResult {
                x,
                iterations: it,
                residual: res,
                converged: true,
            };
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = norm2(&r) / norm_b;
    CgResult {
        x,
        iterations: max_iter,
        residual: res,
        converged: false,
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cyclic Jacobi eigen decomposition for small dense symmetric matrices.
/// Returns eigenvalues ascending with matching eigenvector columns.
pub fn jacobi_eigen(a_in: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a_in.len();
    let mut a: Vec<Vec<f64>> = a_in.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + frobenius(&a)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i][i].partial_cmp(&a[j][j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| a[i][i]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&c| (0..n).map(|r| v[r][c]).collect())
        .collect();
    (values, vectors)
}

fn frobenius(a: &[Vec<f64>]) -> f64 {
    a.iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}

/// Symmetric tridiagonal pencil `(T, diag(d))`: `diag` is the main diagonal
/// of `T`, `off[i]` couples `i` and `i+1`, and `d > 0`.
pub struct TridiagPencil<'a> {
    pub diag: &'a [f64],
    pub off: &'a [f64],
    pub weight: &'a [f64],
}

impl TridiagPencil<'_> {
    /// Number of pencil eigenvalues strictly below `s` (Sturm count via the
    /// LDL^T recurrence of `T - s·diag(d)`).
    fn count_below(&self, s: f64) -> usize {
        let n = self.diag.len();
        let mut count = 0;
        let mut t = self.diag[0] - s * self.weight[0];
        if t < 0.0 {
            count += 1;
        }
        for i in 1..n {
            let denom = if t == 0.0 { 1e-300 } else { t };
            t = self.diag[i] - s * self.weight[i] - self.off[i - 1] * self.off[i - 1] / denom;
            if t < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = (if i > 0 { self.off[i - 1].abs() } else { 0.0 })
                + (if i + 1 < n { self.off[i].abs() } else { 0.0 });
            lo = lo.min((self.diag[i] - r) / self.weight[i]);
            hi = hi.max((self.diag[i] + r) / self.weight[i]);
        }
        (lo, hi)
    }

    /// `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn smallest(&self) -> f64 {
        self.eigenvalue(0)
    }

    pub fn largest(&self) -> f64 {
        self.eigenvalue(self.diag.len() - 1)
    }

    /// Eigenvector for an isolated eigenvalue by one round of shifted
    /// inverse iteration (tridiagonal LU with partial pivoting).
    pub fn eigenvector(&self, mu: f64) -> Vec<f64> {
        let n = self.diag.len();
        let shift = mu - 1e-10 * (1.0 + mu.abs());
        let mut x = vec![1.0; n];
        for pass in 0..3 {
            x = self.solve_shifted(shift, &x);
            let nrm = norm2(&x);
            for v in &mut x {
                *v /= nrm;
            }
            if pass > 0 {
                break;
            }
        }
        x
    }

    /// Solve `(T - s·diag(d)) x = b`.
    fn solve_shifted(&self, s: f64, b: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let shifted: Vec<f64> = (0..n).map(|i| self.diag[i] - s * self.weight[i]).collect();
        solve_tridiag_pivoting(&shifted, self.off, b)
    }
}

/// Solve a symmetric tridiagonal system `(diag, off)` by LU with partial
/// pivoting (the shifted matrix may be indefinite).
fn solve_tridiag_pivoting(diag: &[f64], off: &[f64], b: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut low = vec![0.0; n]; // subdiagonal of working rows
    let mut mid: Vec<f64> = diag.to_vec();
    let mut up1 = vec![0.0; n];
    let mut up2 = vec![0.0; n];
    for i in 0..n - 1 {
        up1[i] = off[i];
        low[i + 1] = off[i];
    }
    let mut x = b.to_vec();
    for i in 0..n - 1 {
        if low[i + 1].abs() > mid[i].abs() {
            // swap rows i and i+1; row i spans columns (i, i+1, i+2),
            // row i+1 spans (i, i+1, i+2) after the swap
            let (m_i, u1_i, u2_i) = (mid[i], up1[i], up2[i]);
            mid[i] = low[i + 1];
            up1[i] = mid[i + 1];
            up2[i] = up1[i + 1];
            low[i + 1] = m_i;
            mid[i + 1] = u1_i;
            up1[i + 1] = u2_i;
            x.swap(i, i + 1);
        }
        let piv = if mid[i] == 0.0 { 1e-300 } else { mid[i] };
        let m = low[i + 1] / piv;
        low[i + 1] = 0.0;
        mid[i + 1] -= m * up1[i];
        if i + 2 < n {
            up1[i + 1] -= m * up2[i];
        }
        x[i + 1] -= m * x[i];
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        if i + 1 < n {
            s -= up1[i] * x[i + 1];
        }
        if i + 2 < n {
            s -= up2[i] * x[i + 2];
        }
        let piv = if mid[i] == 0.0 { 1e-300 } else { mid[i] };
        x[i] = s / piv;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, &t)
    }

    #[test]
    fn banded_cholesky_solves() {
        let a = laplacian_1d(50);
        let chol = BandedCholesky::factor(&a).unwrap();
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = chol.solve(&b);
        let r = a.mul_vec_alloc(&x);
        let err: f64 = r.iter().zip(&b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "residual {err}");
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 1, -1.0)]);
        assert!(BandedCholesky::factor(&a).is_err());
    }

    #[test]
    fn pcg_matches_cholesky() {
        let a = laplacian_1d(80);
        let b: Vec<f64> = (0..80).map(|i| (i as f64 * 0.11).cos()).collect();
        let chol = BandedCholesky::factor(&a).unwrap();
        let xd = chol.solve(&b);
        let res = pcg(&a, &b, 1e-12, 10_000);
        assert!(res.converged);
        let err: f64 = res
            .x
            .iter()
            .zip(&xd)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "err {err}");
    }

    #[test]
    fn jacobi_eigen_2x2() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let (vals, _) = jacobi_eigen(&a);
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn tridiag_pencil_against_jacobi() {
        // random-ish symmetric tridiagonal with weights
        let n = 12;
        let diag: Vec<f64> = (0..n).map(|i| 2.0 + (i as f64 * 0.71).sin()).collect();
        let off: Vec<f64> = (0..n - 1).map(|i| -0.8 + 0.1 * (i as f64).cos()).collect();
        let w: Vec<f64> = (0..n).map(|i| 1.0 + 0.4 * (i as f64 * 0.3).sin()).collect();
        // dense reference: D^{-1/2} T D^{-1/2}
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            dense[i][i] = diag[i] / w[i];
            if i + 1 < n {
                let v = off[i] / (w[i] * w[i + 1]).sqrt();
                dense[i][i + 1] = v;
                dense[i + 1][i] = v;
            }
        }
        let (vals, _) = jacobi_eigen(&dense);
        let pencil = TridiagPencil {
            diag: &diag,
            off: &off,
            weight: &w,
        };
        assert!((pencil.smallest() - vals[0]).abs() < 1e-10);
        assert!((pencil.largest() - vals[n - 1]).abs() < 1e-10);
        assert!((pencil.eigenvalue(3) - vals[3]).abs() < 1e-10);
    }

    #[test]
    fn tridiag_eigenvector_residual() {
        let n = 30;
        let diag: Vec<f64> = vec![2.0; n];
        let off: Vec<f64> = vec![-1.0; n - 1];
        let w: Vec<f64> = vec![1.0; n];
        let pencil = TridiagPencil {
            diag: &diag,
            off: &off,
            weight: &w,
        };
        let mu = pencil.smallest();
        let v = pencil.eigenvector(mu);
        // residual ||T v - mu v||
        let mut worst = 0.0f64;
        for i in 0..n {
            let mut s = diag[i] * v[i] - mu * v[i];
            if i > 0 {
                s += off[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                s += off[i] * v[i + 1];
            }
            worst = worst.max(s.abs());
        }
        assert!(worst < 1e-8, "residual {worst}");
    }
}
