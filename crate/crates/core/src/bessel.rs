//! Bessel functions of the first kind `J_ν` of real order `ν ≥ 0` and their
//! positive zeros.
//!
//! Three evaluation routes: the power series for small arguments, Miller's
//! backward recurrence for moderate arguments and Hankel's asymptotic
//! expansion for large arguments. Each route returns the pair `(J_ν, J_{ν+1})`.

use crate::error::{LabError, Result};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

const SERIES_LIMIT: f64 = 6.0;

fn hankel_threshold(nu: f64) -> f64 {
    let mu = 4.0 * (nu + 1.0) * (nu + 1.0);
    (40.0f64).max(1.5 * mu)
}

/// `(J_ν(z), J_{ν+1}(z))` for `ν ≥ 0`, `z ≥ 0`.
pub fn bessel_j_pair(nu: f64, z: f64) -> (f64, f64) {
    debug_assert!(nu >= 0.0 && z >= 0.0);
    if z == 0.0 {
        return (if nu == 0.0 { 1.0 } else { 0.0 }, 0.0);
    }
    if z <= SERIES_LIMIT {
        (series(nu, z), series(nu + 1.0, z))
    } else if z >= hankel_threshold(nu) {
        (hankel(nu, z), hankel(nu + 1.0, z))
    } else {
        miller_pair(nu, z)
    }
}

pub fn bessel_j(nu: f64, z: f64) -> f64 {
    bessel_j_pair(nu, z).0
}

/// Power series `Σ (−1)^k (z/2)^{2k+ν} / (k! Γ(k+ν+1))`.
pub fn series(nu: f64, z: f64) -> f64 {
    if z == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    let half = 0.5 * z;
    let prefactor = (nu * half.ln() - ln_gamma(nu + 1.0)).exp();
    let q = -half * half;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * (kf + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    prefactor * sum
}

/// Hankel asymptotic expansion for large `z`.
pub fn hankel(nu: f64, z: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        a *= (mu - odd * odd) / (kf * 8.0 * z);
        if a.abs() > last {
            break;
        }
        last = a.abs();
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
        if a.abs() < 1e-17 {
            break;
        }
    }
    let chi = z - (0.5 * nu + 0.25) * PI;
    (2.0 / (PI * z)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Miller's backward recurrence normalized by
/// `(z/2)^μ = Σ_k (μ+2k) Γ(μ+k)/k! · J_{μ+2k}(z)` with `μ = ν − ⌊ν⌋`.
pub fn miller_pair(nu: f64, z: f64) -> (f64, f64) {
    let n = nu.floor() as usize;
    let mu = nu - n as f64;
    let top = (n as f64 + 1.0).max(z);
    let mut start = (top + 30.0 + 6.0 * top.cbrt()) as usize;
    if start % 2 == 1 {
        start += 1;
    }
    let mut f_next = 0.0;
    let mut f = 1e-300;
    let mut jn = 0.0;
    let mut jn1 = 0.0;
    let mut norm = 0.0;
    // Normalization weights d_m for index 2m.
    let weights: Vec<f64> = {
        let mut w = Vec::with_capacity(start / 2 + 1);
        w.push(1.0);
        let mut prod = 1.0;
        for m in 1..=start / 2 {
            let mf = m as f64;
            if m > 1 {
                prod *= (mu + mf - 1.0) / mf;
            }
            w.push((mu + 2.0 * mf) * prod);
        }
        w
    };
    for k in (0..=start).rev() {
        if k == n {
            jn = f;
        }
        if k == n + 1 {
            jn1 = f;
        }
        if k % 2 == 0 {
            norm += weights[k / 2] * f;
        }
        if k == 0 {
            break;
        }
        let f_prev = 2.0 * (mu + k as f64) / z * f - f_next;
        f_next = f;
        f = f_prev;
        if f.abs() > 1e250 {
            let s = 1e-250;
            f *= s;
            f_next *= s;
            jn *= s;
            jn1 *= s;
            norm *= s;
        }
    }
    let scale = (mu * (0.5 * z).ln() - ln_gamma(mu + 1.0)).exp() / norm;
    (jn * scale, jn1 * scale)
}

/// McMahon's large-`n` expansion of the `n`-th positive zero of `J_ν`.
pub fn mcmahon_guess(nu: f64, n: usize) -> f64 {
    let beta = (n as f64 + 0.5 * nu - 0.25) * PI;
    let mu = 4.0 * nu * nu;
    let e = 8.0 * beta;
    beta - (mu - 1.0) / e - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * e.powi(3))
}

/// First `count` positive zeros of `J_ν`, located by a sign-change scan and
/// refined by bisection to full precision.
pub fn bessel_zeros(nu: f64, count: usize) -> Result<Vec<f64>> {
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(LabError::BesselZero(format!("order {nu} not supported")));
    }
    let j = |z: f64| bessel_j(nu, z);
    let mut zeros = Vec::with_capacity(count);
    let step = 0.1;
    let mut lo = nu.max(1e-3);
    let mut flo = j(lo);
    for n in 1..=count {
        let limit = mcmahon_guess(nu, n).max(lo) + 10.0 + nu;
        let mut hi = lo + step;
        let mut fhi = j(hi);
        while flo * fhi > 0.0 {
            lo = hi;
            flo = fhi;
            hi += step;
            if hi > limit {
                return Err(LabError::BesselZero(format!(
                    "no sign change found for zero {n} of J_{nu} below {limit}"
                )));
            }
            fhi = j(hi);
        }
        let (mut a, mut b, mut fa) = (lo, hi, flo);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let fm = j(m);
            if fm == 0.0 {
                a = m;
                b = m;
                break;
            }
            if fa * fm < 0.0 {
                b = m;
            } else {
                a = m;
                fa = fm;
            }
        }
        let root = 0.5 * (a + b);
        zeros.push(root);
        lo = root + 2.5;
        flo = j(lo);
    }
    Ok(zeros)
}
