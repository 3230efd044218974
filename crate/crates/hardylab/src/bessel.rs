//! Bessel functions of the first kind, orders 0 and 1, with zero finding.
//!
//! Power series below `|x| = 12`, Hankel asymptotic expansion above. The
//! series region covers every argument the grids produce (`z_{0,1} · R`),
//! so the zeros carry full double precision; the asymptotic branch is good
//! to roughly 1e-9 at the switch point and improves with `x`.

use std::f64::consts::{FRAC_PI_4, PI};

const SERIES_SWITCH: f64 = 12.0;

/// `J_0(x)`.
pub fn j0(x: f64) -> f64 {
    let x = x.abs();
    if x < SERIES_SWITCH {
        j0_series(x)
    } else {
        hankel(0, x)
    }
}

/// `J_1(x)`. Odd in `x`.
pub fn j1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax < SERIES_SWITCH {
        j1_series(ax)
    } else {
        hankel(1, ax)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

fn j0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..200u32 {
        let m = f64::from(m);
        term *= -q / (m * m);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1.0) {
            break;
        }
    }
    sum
}

fn j1_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..200u32 {
        let m = f64::from(m);
        term *= -q / (m * (m + 1.0));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1.0) {
            break;
        }
    }
    sum * 0.5 * x
}

/// Hankel large-argument form `sqrt(2/(πx)) (P cos ω - Q sin ω)`,
/// `ω = x - νπ/2 - π/4`, truncated where the asymptotic terms bottom out.
fn hankel(nu: u32, x: f64) -> f64 {
    let four_nu2 = f64::from(4 * nu * nu);
    let mut t = 1.0; // a_k / x^k
    let mut p = 1.0;
    let mut q = 0.0;
    let mut prev = f64::INFINITY;
    for k in 1..=12u32 {
        let kf = f64::from(k);
        let odd = 2.0 * kf - 1.0;
        t *= (four_nu2 - odd * odd) / (8.0 * kf * x);
        if t.abs() >= prev {
            break; // divergent tail reached
        }
        prev = t.abs();
        // sign pattern (-1)^floor(k/2) applied to alternating P/Q slots
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 1 {
            q += sign * t;
        } else {
            p += sign * t;
        }
    }
    let omega = x - f64::from(nu) * PI / 2.0 - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * omega.cos() - q * omega.sin())
}

/// First positive zero of `J_0`, `z_{0,1} ≈ 2.404826`.
pub fn j0_first_zero() -> f64 {
    bisect_zero(j0, 2.0, 3.0)
}

/// First positive zero of `J_1`, `z_{1,1} ≈ 3.831706`.
pub fn j1_first_zero() -> f64 {
    bisect_zero(j1, 3.0, 4.5)
}

/// Bisection on a bracketing interval. The callers guarantee a sign change.
fn bisect_zero(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    debug_assert!(flo * f(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) * flo >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
