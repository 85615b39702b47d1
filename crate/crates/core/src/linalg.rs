//! Small dense symmetric linear algebra and a tridiagonal pencil solver.

use crate::error::{LabError, Result};
use nalgebra::{DMatrix, DVector};

/// Solve `A x = b` for symmetric positive definite `A`, after symmetric
/// diagonal equilibration (graded systems span hundreds of decades).
pub fn cholesky_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.nrows();
    let err = || LabError::NotPositiveDefinite(format!("{n}x{n} system"));
    let s: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    if s.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(err());
    }
    let s: Vec<f64> = s.iter().map(|d| 1.0 / d.sqrt()).collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| a[(i, j)] * s[i] * s[j]);
    let rhs = DVector::from_fn(n, |i, _| b[i] * s[i]);
    let z = scaled.cholesky().ok_or_else(err)?.solve(&rhs);
    Ok(DVector::from_fn(n, |i, _| z[i] * s[i]))
}

/// Positive definiteness test after symmetric diagonal scaling to unit diagonal.
pub fn is_positive_definite(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    let mut s = DMatrix::zeros(n, n);
    let d: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    if d.iter().any(|&x| !(x > 0.0)) {
        return false;
    }
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] = a[(i, j)] / (d[i].sqrt() * d[j].sqrt());
        }
    }
    s.cholesky().is_some()
}

/// Estimate of the 2-norm condition number of a symmetric positive definite matrix.
pub fn spd_condition(a: &DMatrix<f64>) -> f64 {
    let (vals, _) = jacobi_eigen(a);
    let lo = vals.first().copied().unwrap_or(0.0);
    let hi = vals.last().copied().unwrap_or(0.0);
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
/// Returns eigenvalues ascending with eigenvectors as matching columns.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let diag: f64 = (0..n).map(|i| m[(i, i)] * m[(i, i)]).sum();
        if off <= 1e-32 * diag || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).unwrap());
    let vals = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &v.column(i));
    }
    (vals, vecs)
}

/// One-sided Jacobi SVD of a square (or tall) matrix `b`.
/// Returns singular values ascending and the right singular vectors as columns.
/// Small singular values are resolved to absolute accuracy `~ eps·‖b‖`.
pub fn jacobi_svd(b: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (rows, n) = b.shape();
    let mut u = b.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for k in 0..rows {
                    alpha += u[(k, p)] * u[(k, p)];
                    beta += u[(k, q)] * u[(k, q)];
                    gamma += u[(k, p)] * u[(k, q)];
                }
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..rows {
                    let up = u[(k, p)];
                    let uq = u[(k, q)];
                    u[(k, p)] = c * up - s * uq;
                    u[(k, q)] = s * up + c * uq;
                }
                for k in 0..n {
                    let vp = v[(k, p)];
                    let vq = v[(k, q)];
                    v[(k, p)] = c * vp - s * vq;
                    v[(k, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sig: Vec<f64> = (0..n).map(|j| u.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sig[i].partial_cmp(&sig[j]).unwrap());
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &v.column(i));
    }
    (order.iter().map(|&i| sig[i]).collect(), vecs)
}

/// Smallest `s ≥ floor` with `s·A − B` positive definite, by bisection on `ln s`.
/// `A` must be positive definite. Returns the upper end of the final bracket,
/// so the returned value always passes the definiteness test.
pub fn pencil_threshold(a: &DMatrix<f64>, b: &DMatrix<f64>, floor: f64) -> Result<f64> {
    let test = |s: f64| is_positive_definite(&(a * s - b));
    if test(floor) {
        return Ok(floor);
    }
    let mut lo = floor.ln();
    let mut hi = lo + 1.0;
    let mut tries = 0;
    while !test(hi.exp()) {
        lo = hi;
        hi += 2.0 * (hi - floor.ln()).max(1.0);
        tries += 1;
        if tries > 60 || hi > 700.0 {
            return Err(LabError::Overflow(
                "pencil threshold exceeds double range".into(),
            ));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo < 1e-13 * hi.abs().max(1.0) {
            break;
        }
        if test(mid.exp()) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi.exp())
}

/// Symmetric tridiagonal pencil `(K, M)`: diagonals and first off-diagonals.
#[derive(Debug, Clone)]
pub struct TridiagonalPencil {
    pub k_diag: Vec<f64>,
    pub k_off: Vec<f64>,
    pub m_diag: Vec<f64>,
    pub m_off: Vec<f64>,
}

impl TridiagonalPencil {
    pub fn dim(&self) -> usize {
        self.k_diag.len()
    }

    /// Number of generalized eigenvalues strictly below `sigma` (Sylvester inertia of `K − σM`).
    pub fn count_below(&self, sigma: f64) -> usize {
        let n = self.dim();
        let mut count = 0;
        let mut d = self.k_diag[0] - sigma * self.m_diag[0];
        let tiny = 1e-300;
        if d < 0.0 {
            count += 1;
        }
        for i in 1..n {
            let e = self.k_off[i - 1] - sigma * self.m_off[i - 1];
            let dd = if d == 0.0 { tiny } else { d };
            d = self.k_diag[i] - sigma * self.m_diag[i] - e * e / dd;
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// `y = K x` and `y = M x`.
    pub fn apply(&self, x: &[f64], use_mass: bool) -> Vec<f64> {
        let (d, o) = if use_mass {
            (&self.m_diag, &self.m_off)
        } else {
            (&self.k_diag, &self.k_off)
        };
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = d[i] * x[i];
            if i > 0 {
                s += o[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += o[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    /// Solve `(K − σM) x = r` by Gaussian elimination with partial pivoting.
    pub fn solve_shifted(&self, sigma: f64, r: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let sub: Vec<f64> = (0..n.saturating_sub(1))
            .map(|i| self.k_off[i] - sigma * self.m_off[i])
            .collect();
        let mut dl = sub.clone();
        let mut d: Vec<f64> = (0..n)
            .map(|i| self.k_diag[i] - sigma * self.m_diag[i])
            .collect();
        let mut du = sub;
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut b = r.to_vec();
        let scale = d.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = 1e-18 * scale;
                }
                let f = dl[i] / d[i];
                dl[i] = f;
                d[i + 1] -= f * du[i];
                b[i + 1] -= f * b[i];
                if i + 2 < n {
                    du2[i] = 0.0;
                }
            } else {
                let f = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = f;
                let tmp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = tmp - f * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -f * du[i + 1];
                }
                b.swap(i, i + 1);
                b[i + 1] -= f * b[i];
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = 1e-18 * scale;
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = b[i];
            if i + 1 < n {
                s -= du[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= du2[i] * x[i + 2];
            }
            x[i] = s / d[i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_spd(n: usize) -> DMatrix<f64> {
        let b = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.4);
        b.transpose() * &b + DMatrix::identity(n, n) * 0.1
    }

    #[test]
    fn jacobi_eigen_reconstructs() {
        let a = sample_spd(7);
        let (vals, vecs) = jacobi_eigen(&a);
        let rec =
            &vecs * DMatrix::from_diagonal(&DVector::from_vec(vals.clone())) * vecs.transpose();
        assert!((rec - &a).norm() < 1e-12);
        assert!(vals.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn svd_squares_match_gram_eigenvalues() {
        let b = DMatrix::from_fn(9, 5, |i, j| {
            ((i + 1) as f64).powi(j as i32 % 3) / (1.0 + (i * j) as f64)
        });
        let (sig, _) = jacobi_svd(&b);
        let (vals, _) = jacobi_eigen(&(b.transpose() * &b));
        for (s, v) in sig.iter().zip(&vals) {
            assert!((s * s - v).abs() < 1e-10 * vals.last().unwrap());
        }
    }

    #[test]
    fn svd_resolves_tiny_singular_value() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-9, 1e-14]));
        let (sig, _) = jacobi_svd(&d);
        assert!((sig[0] - 1e-14).abs() < 1e-28);
    }

    #[test]
    fn pencil_threshold_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5]));
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        let s = pencil_threshold(&a, &b, 1e-12).unwrap();
        assert!((s - 6.0).abs() < 1e-10 && s >= 6.0);
    }

    #[test]
    fn tridiagonal_solve_and_count() {
        let p = TridiagonalPencil {
            k_diag: vec![2.0; 6],
            k_off: vec![-1.0; 5],
            m_diag: vec![1.0; 6],
            m_off: vec![0.0; 5],
        };
        // Eigenvalues of the discrete Laplacian: 2 - 2cos(kπ/7).
        let ev: Vec<f64> = (1..=6)
            .map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / 7.0).cos())
            .collect();
        assert_eq!(p.count_below(ev[2] + 1e-9), 3);
        assert_eq!(p.count_below(ev[2] - 1e-9), 2);
        let r = vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.0];
        let x = p.solve_shifted(1.3, &r);
        let kx = p.apply(&x, false);
        let mx = p.apply(&x, true);
        for i in 0..6 {
            assert!((kx[i] - 1.3 * mx[i] - r[i]).abs() < 1e-12);
        }
    }
}
