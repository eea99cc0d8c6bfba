//! Test-only reference solutions.
#![allow(dead_code)]

use num_complex::Complex64;

/// Scalar `ψ'' = U(x) ψ` on `[x_l, x_r]`, with `U = u_inf` outside and
/// `u_inf = −k²` (k > 0). Returns origin-referenced `(R, T)` for a unit wave
/// `e^{ikx}` incident from the left.
///
/// Piecewise-constant potential sampled at cell midpoints, propagated exactly
/// cell by cell from the right, with the state renormalised as it grows. Two
/// resolutions are combined by Richardson extrapolation (the scheme is second
/// order in the cell width).
pub fn scalar_rt(u: &dyn Fn(f64) -> f64, k: f64, x_l: f64, x_r: f64, cells: usize) -> (Complex64, Complex64) {
    let (r1, t1) = scalar_rt_once(u, k, x_l, x_r, cells);
    let (r2, t2) = scalar_rt_once(u, k, x_l, x_r, 2 * cells);
    ((4.0 * r2 - r1) / 3.0, (4.0 * t2 - t1) / 3.0)
}

pub fn scalar_probabilities(u: &dyn Fn(f64) -> f64, k: f64, x_l: f64, x_r: f64, cells: usize) -> (f64, f64) {
    let (r, t) = scalar_rt(u, k, x_l, x_r, cells);
    (r.norm_sqr(), t.norm_sqr())
}

fn scalar_rt_once(u: &dyn Fn(f64) -> f64, k: f64, x_l: f64, x_r: f64, cells: usize) -> (Complex64, Complex64) {
    let i = Complex64::new(0.0, 1.0);
    let h = (x_r - x_l) / cells as f64;
    let mut psi = (i * k * x_r).exp();
    let mut dpsi = i * k * psi;
    // true state = exp(log_scale) · (psi, dpsi)
    let mut log_scale = 0.0;
    for c in (0..cells).rev() {
        let mid = x_l + (c as f64 + 0.5) * h;
        let kappa = Complex64::new(u(mid), 0.0).sqrt();
        let (ch, sh_over) = if kappa.norm() * h < 1e-8 {
            (Complex64::new(1.0, 0.0), Complex64::new(h, 0.0))
        } else {
            ((kappa * h).cosh(), (kappa * h).sinh() / kappa)
        };
        let sh_times = (kappa * h).sinh() * kappa;
        let p = ch * psi - sh_over * dpsi;
        let d = -sh_times * psi + ch * dpsi;
        psi = p;
        dpsi = d;
        let norm = psi.norm().max(dpsi.norm() / k);
        if norm > 1e100 || norm < 1e-100 {
            psi /= norm;
            dpsi /= norm;
            log_scale += norm.ln();
        }
    }
    let a = (psi + dpsi / (i * k)) * (-i * k * x_l).exp() * 0.5;
    let b = (psi - dpsi / (i * k)) * (i * k * x_l).exp() * 0.5;
    let t = (-log_scale).exp() / a;
    (b / a, t)
}

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

#[cfg(test)]
mod checks {
    use super::*;

    #[test]
    fn square_barrier_closed_form() {
        // rectangular barrier of height V0 (in units of k²) and width a
        let k = 1.0;
        let v0 = 0.5f64;
        let a = 3.0;
        let u = move |x: f64| if (0.0..a).contains(&x) { v0 - k * k } else { -k * k };
        let (_, t) = scalar_probabilities(&u, k, -1.0, a + 1.0, 4000);
        let q = (k * k - v0).sqrt();
        let s = (q * a).sin();
        let want = 1.0 / (1.0 + v0 * v0 * s * s / (4.0 * k * k * q * q));
        assert!((t - want).abs() < 1e-9, "{t} vs {want}");
    }
}
