//! Small dense helpers on top of nalgebra: nullspaces, rank, subspace angles.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::lie::CMatrix;

/// Relative singular-value cutoff used for ranks and nullspaces.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

fn pad_rows<T: nalgebra::ComplexField>(m: &DMatrix<T>) -> DMatrix<T> {
    if m.nrows() >= m.ncols() {
        m.clone()
    } else {
        let mut p = DMatrix::zeros(m.ncols(), m.ncols());
        p.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
        p
    }
}

/// Orthonormal basis of `ker m`, singular values below `rel_tol * sigma_max` count as zero.
pub fn nullspace_complex(m: &CMatrix, rel_tol: f64) -> Vec<DVector<Complex64>> {
    let n = m.ncols();
    if n == 0 {
        return Vec::new();
    }
    let svd = pad_rows(m).svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = rel_tol * smax.max(f64::MIN_POSITIVE);
    (0..n)
        .filter(|&k| svd.singular_values[k] <= cut)
        .map(|k| v_t.row(k).adjoint())
        .collect()
}

pub fn nullspace_real(m: &DMatrix<f64>, rel_tol: f64) -> Vec<DVector<f64>> {
    let n = m.ncols();
    if n == 0 {
        return Vec::new();
    }
    let svd = pad_rows(m).svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = rel_tol * smax.max(f64::MIN_POSITIVE);
    (0..n)
        .filter(|&k| svd.singular_values[k] <= cut)
        .map(|k| v_t.row(k).transpose())
        .collect()
}

pub fn rank_complex(m: &CMatrix, rel_tol: f64) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

pub fn singular_values_real(m: &DMatrix<f64>) -> DVector<f64> {
    m.clone().svd(false, false).singular_values
}

/// Stack column vectors into a matrix.
pub fn columns_complex(cols: &[DVector<Complex64>], nrows: usize) -> CMatrix {
    let mut m = CMatrix::zeros(nrows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

/// Gram-Schmidt (twice) on complex columns, dropping near-dependent ones.
pub fn orthonormalize(cols: &[DVector<Complex64>], tol: f64) -> Vec<DVector<Complex64>> {
    let mut out: Vec<DVector<Complex64>> = Vec::new();
    for v in cols {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let p = q.dotc(&w);
                w -= q * p;
            }
        }
        let n = w.norm();
        if n > tol * v.norm().max(1.0) {
            out.push(w / Complex64::new(n, 0.0));
        }
    }
    out
}

/// Sine of the largest principal angle between the column spans of two
/// matrices with orthonormal columns and equal rank.
pub fn max_subspace_sine(a: &CMatrix, b: &CMatrix) -> f64 {
    if a.ncols() != b.ncols() {
        return 1.0;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    let residual = a - b * (b.adjoint() * a);
    let s1 = residual.svd(false, false).singular_values.iter().cloned().fold(0.0, f64::max);
    let residual = b - a * (a.adjoint() * b);
    let s2 = residual.svd(false, false).singular_values.iter().cloned().fold(0.0, f64::max);
    s1.max(s2).min(1.0)
}

/// Minimum-norm least-squares solve through an SVD with relative cutoff.
pub fn lstsq_complex(m: &CMatrix, rhs: &DVector<Complex64>, rel_tol: f64) -> DVector<Complex64> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = (rel_tol * smax).max(f64::MIN_POSITIVE);
    svd.solve(rhs, eps).unwrap_or_else(|_| DVector::zeros(m.ncols()))
}

pub fn lstsq_real(m: &DMatrix<f64>, rhs: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = (rel_tol * smax).max(f64::MIN_POSITIVE);
    svd.solve(rhs, eps).unwrap_or_else(|_| DVector::zeros(m.ncols()))
}
