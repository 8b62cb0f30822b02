//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

/// Relative singular-value cutoff used for numerical rank decisions.
pub const RANK_RTOL: f64 = 1e-9;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest absolute entry of `m - mᵀ`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues sorted ascending.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Result of factoring a symmetric positive definite matrix spectrally.
#[derive(Debug)]
pub struct SpdRoots {
    pub sqrt: DMatrix<f64>,
    pub inv_sqrt: DMatrix<f64>,
    pub logdet: f64,
}

/// Square root, inverse square root and log-determinant of a symmetric
/// matrix. Fails with an orthonormal basis of the (numerical) kernel when
/// the smallest eigenvalue is at most `guard` times the largest one.
pub fn spd_roots(m: &DMatrix<f64>, guard: f64) -> Result<SpdRoots, DMatrix<f64>> {
    let n = m.nrows();
    let (values, vectors) = sym_eigen(m);
    let top = values.last().copied().unwrap_or(0.0);
    let floor = guard * top.max(0.0);
    let small: Vec<usize> = (0..n)
        .filter(|&k| !(values[k] > floor) || !(top > 0.0))
        .collect();
    if !small.is_empty() {
        let kernel = DMatrix::from_fn(n, small.len(), |r, c| vectors[(r, small[c])]);
        return Err(kernel);
    }
    let mut sqrt = DMatrix::zeros(n, n);
    let mut inv_sqrt = DMatrix::zeros(n, n);
    let mut logdet = 0.0;
    for k in 0..n {
        let col = vectors.column(k);
        let outer = col * col.transpose();
        let s = values[k].sqrt();
        sqrt += &outer * s;
        inv_sqrt += &outer / s;
        logdet += values[k].ln();
    }
    Ok(SpdRoots {
        sqrt,
        inv_sqrt,
        logdet,
    })
}

/// log det of a symmetric positive definite matrix via Cholesky, `None`
/// when the factorization fails.
pub fn logdet_spd(m: &DMatrix<f64>) -> Option<f64> {
    if m.nrows() == 0 {
        return Some(0.0);
    }
    let chol = symmetrize(m).cholesky()?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for k in 0..m.nrows() {
        let d = l[(k, k)];
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        acc += 2.0 * d.ln();
    }
    Some(acc)
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = symmetrize(m).cholesky()?;
    Some(symmetrize(&chol.inverse()))
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Numerical rank with singular values below `rtol * σ_max` treated as zero.
pub fn rank(m: &DMatrix<f64>, rtol: f64) -> usize {
    let sv = singular_values(m);
    let top = sv.first().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return 0;
    }
    sv.iter().filter(|&&s| s > rtol * top).count()
}

/// Orthonormal basis of the column space of `m` (numerical rank cut).
pub fn column_basis(m: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let rows = m.nrows();
    if rows == 0 || m.ncols() == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| top > 0.0 && svd.singular_values[k] > rtol * top)
        .collect();
    DMatrix::from_fn(rows, keep.len(), |r, c| u[(r, keep[c])])
}

/// Dimension of the right null space, with the same rank convention.
pub fn nullity(m: &DMatrix<f64>, rtol: f64) -> usize {
    m.ncols() - rank(m, rtol)
}

/// Spectral condition number ‖A‖·‖A⁻¹‖, infinite for singular input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.iter().any(|x| !x.is_finite()) {
        return f64::INFINITY;
    }
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Trace inner product ⟨X, Y⟩ = tr(Xᵀ Y).
pub fn trace_inner(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    x.iter().zip(y.iter()).map(|(a, b)| a * b).sum()
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigen(m).0.first().copied().unwrap_or(f64::INFINITY)
}
