//! P1 finite elements for `∫ x^α u′v′ = λ ∫ u v` on the mesh `x_i = (i/N)^g`.
//!
//! Stiffness entries use the exact element integral `∫ x^α`, the mass matrix is
//! the consistent P1 mass. Eigenvalues come from inertia counts of `K − σM`
//! (bisection), eigenvectors from inverse iteration.

use super::{Backend, DegenerateOperator, GalerkinData, Provenance, SpectralModel};
use crate::error::{LabError, Result};
use crate::linalg::TridiagonalPencil;

/// Mesh grading exponent. `2/(2−α)` resolves the weight; for `α < 1` the
/// eigenfunctions behave like `x^{1−α}` at 0 and the energy error of the first
/// element is `O(h₁^{1−α})`, so the grading is raised to `2/(1−α)` (capped)
/// to keep second-order eigenvalue convergence.
pub fn mesh_grading(op: &DegenerateOperator) -> f64 {
    let base = op.grading();
    if op.is_strongly_degenerate() {
        base
    } else {
        base.max(2.0 / (1.0 - op.alpha())).min(40.0)
    }
}

pub fn build_galerkin_model(
    op: DegenerateOperator,
    mesh_size: usize,
    j_max: usize,
) -> Result<SpectralModel> {
    if j_max == 0 {
        return Err(LabError::InvalidArgument("J_max must be at least 1".into()));
    }
    if mesh_size < 4 * j_max {
        return Err(LabError::InvalidArgument(format!(
            "mesh size {mesh_size} must be at least 4·J_max = {}",
            4 * j_max
        )));
    }
    let alpha = op.alpha();
    let g = mesh_grading(&op);
    // Nodes below this are merged into the first element so `x^{α+1}` stays representable.
    let smallest = 1e-280f64.powf(1.0 / (alpha + 1.0));
    let mut nodes: Vec<f64> = vec![0.0];
    nodes.extend(
        (1..=mesh_size)
            .map(|i| (i as f64 / mesh_size as f64).powf(g))
            .filter(|&x| x >= smallest),
    );
    *nodes.last_mut().unwrap() = 1.0;
    let n_el = nodes.len() - 1;

    let stiff: Vec<f64> = nodes
        .windows(2)
        .map(|w| {
            let h = w[1] - w[0];
            (w[1].powf(alpha + 1.0) - w[0].powf(alpha + 1.0)) / ((alpha + 1.0) * h * h)
        })
        .collect();
    let len: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();

    // Global nodes 0..=n_el; unknowns exclude node n_el, and node 0 when α < 1.
    let first = if op.is_strongly_degenerate() { 0 } else { 1 };
    let last = n_el - 1;
    let dim = last - first + 1;
    let mut pencil = TridiagonalPencil {
        k_diag: vec![0.0; dim],
        k_off: vec![0.0; dim.saturating_sub(1)],
        m_diag: vec![0.0; dim],
        m_off: vec![0.0; dim.saturating_sub(1)],
    };
    for e in 0..n_el {
        let (a, b) = (e, e + 1);
        for (node, other) in [(a, b), (b, a)] {
            if node < first || node > last {
                continue;
            }
            let r = node - first;
            pencil.k_diag[r] += stiff[e];
            pencil.m_diag[r] += len[e] / 3.0;
            if other >= first && other <= last && other > node {
                pencil.k_off[r] = -stiff[e];
                pencil.m_off[r] = len[e] / 6.0;
            }
        }
    }

    let lambdas = eigenvalues_by_bisection(&pencil, j_max)?;
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(j_max);
    let mut residuals = Vec::with_capacity(j_max);
    for (k, &lam) in lambdas.iter().enumerate() {
        let v = inverse_iteration(&pencil, lam, k, &vectors)?;
        let kv = pencil.apply(&v, false);
        let mv = pencil.apply(&v, true);
        let res: f64 = kv
            .iter()
            .zip(&mv)
            .map(|(a, b)| (a - lam * b).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = kv.iter().map(|a| a * a).sum::<f64>().sqrt();
        residuals.push(res / scale);
        vectors.push(v);
    }

    let mut values = Vec::with_capacity(j_max);
    let mut slopes = Vec::with_capacity(j_max);
    for (v, &lam) in vectors.iter_mut().zip(&lambdas) {
        let mut full = vec![0.0; n_el + 1];
        full[first..=last].copy_from_slice(v);
        // Consistent boundary flux: residual of the unconstrained equation at x = 1.
        let e = n_el - 1;
        let mut slope = -stiff[e] * full[e] - lam * len[e] / 6.0 * full[e];
        if slope > 0.0 {
            full.iter_mut().for_each(|c| *c = -*c);
            slope = -slope;
        }
        values.push(full);
        slopes.push(slope);
    }

    let data = GalerkinData {
        nodes,
        values,
        slopes,
        residuals,
        mesh_size,
        grading: g,
    };
    Ok(SpectralModel::from_parts(
        op,
        lambdas,
        Provenance::Galerkin,
        Backend::Galerkin(data),
    ))
}

fn eigenvalues_by_bisection(p: &TridiagonalPencil, count: usize) -> Result<Vec<f64>> {
    if count > p.dim() {
        return Err(LabError::EigenSolve(format!(
            "requested {count} eigenvalues from a pencil of size {}",
            p.dim()
        )));
    }
    let mut hi = 1.0;
    while p.count_below(hi) < count {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(LabError::EigenSolve(
                "no upper bracket for the spectrum".into(),
            ));
        }
    }
    let mut out = Vec::with_capacity(count);
    let mut lo_prev = 0.0;
    for k in 1..=count {
        let (mut lo, mut up) = (lo_prev, hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + up);
            if mid <= lo || mid >= up || up - lo <= 4e-16 * up {
                break;
            }
            if p.count_below(mid) >= k {
                up = mid;
            } else {
                lo = mid;
            }
        }
        let lam = 0.5 * (lo + up);
        if !(lam > 0.0) {
            return Err(LabError::EigenSolve(format!(
                "eigenvalue {k} is not positive ({lam})"
            )));
        }
        out.push(lam);
        lo_prev = lo;
    }
    Ok(out)
}

fn m_dot(p: &TridiagonalPencil, a: &[f64], b: &[f64]) -> f64 {
    p.apply(a, true).iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inverse_iteration(
    p: &TridiagonalPencil,
    lam: f64,
    k: usize,
    previous: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let n = p.dim();
    let shift = lam * (1.0 - 1e-13);
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.1 * (((i * 7919 + k * 104_729) % 1000) as f64 / 1000.0))
        .collect();
    let mut last_res = f64::INFINITY;
    for _ in 0..8 {
        let rhs = p.apply(&v, true);
        let mut w = p.solve_shifted(shift, &rhs);
        for u in previous {
            let c = m_dot(p, &w, u);
            w.iter_mut().zip(u).for_each(|(x, y)| *x -= c * y);
        }
        let norm = m_dot(p, &w, &w).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(LabError::EigenSolve(format!(
                "inverse iteration broke down for mode {}",
                k + 1
            )));
        }
        w.iter_mut().for_each(|x| *x /= norm);
        let kv = p.apply(&w, false);
        let mv = p.apply(&w, true);
        let res = kv
            .iter()
            .zip(&mv)
            .map(|(a, b)| (a - lam * b).powi(2))
            .sum::<f64>()
            .sqrt()
            / kv.iter().map(|a| a * a).sum::<f64>().sqrt();
        v = w;
        if res < 1e-12 || res >= 0.5 * last_res {
            last_res = res;
            break;
        }
        last_res = res;
    }
    if last_res > 1e-6 {
        return Err(LabError::EigenSolve(format!(
            "mode {} residual {last_res:e} after inverse iteration",
            k + 1
        )));
    }
    Ok(v)
}

impl GalerkinData {
    fn locate(&self, x: f64) -> usize {
        let i = self.nodes.partition_point(|&n| n <= x);
        i.clamp(1, self.nodes.len() - 1) - 1
    }

    pub(crate) fn value(&self, j: usize, x: f64) -> f64 {
        let e = self.locate(x);
        let (a, b) = (self.nodes[e], self.nodes[e + 1]);
        let t = ((x - a) / (b - a)).clamp(0.0, 1.0);
        let v = &self.values[j];
        v[e] * (1.0 - t) + v[e + 1] * t
    }

    pub(crate) fn derivative(&self, j: usize, x: f64) -> f64 {
        let e = self.locate(x);
        let v = &self.values[j];
        (v[e + 1] - v[e]) / (self.nodes[e + 1] - self.nodes[e])
    }
}
