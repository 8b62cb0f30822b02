//! Reference computations written directly from the definitions, sharing
//! nothing with the library beyond the datum types.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;

use quiver_capacity::quiver::{GroupElement, QuiverDatum, Representation};

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Sources and sinks with their dims and |σ|, and arrows as index pairs.
pub struct Flat {
    pub src: Vec<(usize, usize)>,
    pub snk: Vec<(usize, usize)>,
    pub arrows: Vec<(usize, usize, DMatrix<f64>)>,
}

pub fn flatten(d: &QuiverDatum) -> Flat {
    let q = &d.quiver;
    Flat {
        src: q
            .sources
            .iter()
            .map(|v| (d.dims.get(v), d.weight.get(v).unsigned_abs() as usize))
            .collect(),
        snk: q
            .sinks
            .iter()
            .map(|w| (d.dims.get(w), d.weight.get(w).unsigned_abs() as usize))
            .collect(),
        arrows: q
            .arrows
            .iter()
            .map(|a| {
                (
                    q.sources.iter().position(|v| *v == a.tail).unwrap(),
                    q.sinks.iter().position(|w| *w == a.head).unwrap(),
                    d.rep.get(&a.id).unwrap().clone(),
                )
            })
            .collect(),
    }
}

/// Offsets of every replicated copy, in vertex order.
fn copies(side: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut at = 0;
    side.iter()
        .map(|&(dim, s)| {
            (0..s)
                .map(|_| {
                    let o = at;
                    at += dim;
                    o
                })
                .collect()
        })
        .collect()
}

/// Every nonzero Kraus operator: `V(a)` placed at sink copy `q`, source copy `r`.
pub fn kraus(d: &QuiverDatum) -> Vec<DMatrix<f64>> {
    let f = flatten(d);
    let n: usize = f.src.iter().map(|(d, s)| d * s).sum();
    let (rows, cols) = (copies(&f.snk), copies(&f.src));
    let mut out = Vec::new();
    for (i, j, v) in &f.arrows {
        for &ro in &rows[*j] {
            for &co in &cols[*i] {
                let mut k = DMatrix::zeros(n, n);
                k.view_mut((ro, co), v.shape()).copy_from(v);
                out.push(k);
            }
        }
    }
    out
}

pub fn t_dense(ks: &[DMatrix<f64>], x: &DMatrix<f64>) -> DMatrix<f64> {
    ks.iter().fold(DMatrix::zeros(x.nrows(), x.ncols()), |acc, k| acc + k.transpose() * x * k)
}

pub fn t_adjoint_dense(ks: &[DMatrix<f64>], y: &DMatrix<f64>) -> DMatrix<f64> {
    ks.iter().fold(DMatrix::zeros(y.nrows(), y.ncols()), |acc, k| acc + k * y * k.transpose())
}

pub fn n_total(d: &QuiverDatum) -> usize {
    let f = flatten(d);
    f.src.iter().map(|(d, s)| d * s).sum()
}

/// `‖T(I) − I‖² + ‖T*(I) − I‖²` from the Kraus operators.
pub fn ds_dense(d: &QuiverDatum) -> f64 {
    let ks = kraus(d);
    let n = n_total(d);
    let id = DMatrix::identity(n, n);
    (t_dense(&ks, &id) - &id).norm_squared() + (t_adjoint_dense(&ks, &id) - &id).norm_squared()
}

fn logdet(m: &DMatrix<f64>) -> Option<f64> {
    let c = m.clone().cholesky()?;
    Some(c.l().diagonal().iter().map(|x| 2.0 * x.ln()).sum())
}

/// `M_i = Σ_j σ₋(w_j) Σ_a V(a)ᵀ Y_j V(a)`.
pub fn m_blocks(d: &QuiverDatum, y: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let f = flatten(d);
    let mut m: Vec<DMatrix<f64>> = f.src.iter().map(|&(dim, _)| DMatrix::zeros(dim, dim)).collect();
    for (i, j, v) in &f.arrows {
        m[*i] += v.transpose() * &y[*j] * v * f.snk[*j].1 as f64;
    }
    m
}

/// `log D(V, σ; Y) = Σ σ₊ log det M_i − Σ σ₋ log det Y_j`.
pub fn log_objective(d: &QuiverDatum, y: &[DMatrix<f64>]) -> Option<f64> {
    let f = flatten(d);
    let mut total = 0.0;
    for (i, m) in m_blocks(d, y).iter().enumerate() {
        total += f.src[i].1 as f64 * logdet(m)?;
    }
    for (j, yj) in y.iter().enumerate() {
        total -= f.snk[j].1 as f64 * logdet(yj)?;
    }
    Some(total)
}

pub fn objective(d: &QuiverDatum, y: &[DMatrix<f64>]) -> f64 {
    log_objective(d, y).map_or(0.0, f64::exp)
}

/// `Σ_j ‖Σ_i σ₊ Σ_a V M_i⁻¹ Vᵀ − Y_j⁻¹‖ / ‖Y_j⁻¹‖`.
pub fn residual(d: &QuiverDatum, y: &[DMatrix<f64>]) -> f64 {
    let f = flatten(d);
    let inv: Vec<DMatrix<f64>> = m_blocks(d, y).into_iter().map(|m| m.try_inverse().unwrap()).collect();
    let mut s: Vec<DMatrix<f64>> = f.snk.iter().map(|&(dim, _)| DMatrix::zeros(dim, dim)).collect();
    for (i, j, v) in &f.arrows {
        s[*j] += v * &inv[*i] * v.transpose() * f.src[*i].1 as f64;
    }
    s.iter()
        .zip(y)
        .map(|(sj, yj)| {
            let yi = yj.clone().try_inverse().unwrap();
            (sj - &yi).norm() / yi.norm()
        })
        .sum()
}

/// `V(a) ↦ A(head)·V(a)·A(tail)⁻¹`.
pub fn act(g: &GroupElement, d: &QuiverDatum) -> Representation {
    let mut rep = Representation::default();
    for a in &d.quiver.arrows {
        let tail_inv = g.0[&a.tail].clone().try_inverse().unwrap();
        rep.insert(&a.id, &g.0[&a.head] * d.rep.get(&a.id).unwrap() * tail_inv);
    }
    rep
}

/// `Σ σ(x) log |det A(x)|`.
pub fn log_abs_character(g: &GroupElement, d: &QuiverDatum) -> f64 {
    g.0.iter()
        .map(|(x, a)| d.weight.get(x) as f64 * a.determinant().abs().ln())
        .sum()
}

pub fn random_sym<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0));
    (&a + a.transpose()) * 0.5
}

pub fn random_spd<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.5
}

/// Symmetric square root by eigendecomposition.
pub fn sqrt_spd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = m.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(f64::sqrt));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

/// Rank by singular values relative to the largest.
pub fn rank(m: &DMatrix<f64>, rtol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.max();
    if top <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rtol * top).count()
}

/// Number of singular values above `tol`.
pub fn rank_abs(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    m.clone().svd(false, false).singular_values.iter().filter(|&&s| s > tol).count()
}
