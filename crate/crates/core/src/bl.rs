//! Brascamp-Lieb constants of quiver data `(V, p)`.
//!
//! With `ω` the least common denominator of `p`, the weight `σ_p` is `ω` on
//! sources and `−ω·p_j` on sinks, and
//! `BL_Q(V, p) = (ω^{−N}·D_Q(V, σ_p))^{−1/(2ω)}` (`+∞` when the capacity
//! vanishes).

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::quiver::{
    log_abs_character, weight_from_exponents, BipartiteQuiver, DimVector, ExponentTuple, GroupElement, QuiverDatum,
    Representation, Weight,
};
use crate::scaling::{run_scaling, semistable_from, Decision, ScalingConfig, ScalingReport, ScalingStatus};

#[derive(Clone, Debug, PartialEq)]
pub struct BLDatum {
    pub quiver: BipartiteQuiver,
    pub dims: DimVector,
    pub rep: Representation,
    pub exponents: ExponentTuple,
}

impl BLDatum {
    pub fn omega(&self) -> i64 {
        self.exponents.omega()
    }

    /// `σ_p`, after the exact check `Σ d(v_i) = Σ p_j d(w_j)`.
    pub fn sigma_p(&self) -> Result<Weight> {
        weight_from_exponents(&self.exponents, &self.quiver, &self.dims)
    }

    /// The quiver datum `(V, σ_p)`.
    pub fn to_quiver_datum(&self) -> Result<QuiverDatum> {
        Ok(QuiverDatum::new(
            self.quiver.clone(),
            self.dims.clone(),
            self.sigma_p()?,
            self.rep.clone(),
        ))
    }

    fn arrow_data(&self) -> Result<(Vec<usize>, Vec<usize>, Vec<(usize, usize)>, Vec<DMatrix<f64>>)> {
        let layout = self.to_quiver_datum()?.layout()?;
        let mats = self.to_quiver_datum()?.matrices()?;
        Ok((layout.source_dims, layout.sink_dims, layout.arrow_ends, mats))
    }
}

/// A value in `[0, +∞]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    Infinity,
}

impl ExtendedReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(x) => Some(x),
            ExtendedReal::Infinity => None,
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(x) => write!(f, "{x}"),
            ExtendedReal::Infinity => f.write_str("inf"),
        }
    }
}

/// `(ω^{−N}·D)^{−1/(2ω)}` evaluated in log-space, `+∞` for `D = 0`.
pub fn bl_from_capacity(d: f64, omega: i64, n_total: usize) -> ExtendedReal {
    if !(d > 0.0) {
        return ExtendedReal::Infinity;
    }
    let w = omega as f64;
    ExtendedReal::Finite((-(d.ln() - n_total as f64 * w.ln()) / (2.0 * w)).exp())
}

/// `Ã(v_i) = A(v_i)`, `Ã(w_j) = ω^{−1/2}A(w_j)`.
pub fn tilde(a: &GroupElement, quiver: &BipartiteQuiver, omega: i64) -> GroupElement {
    rescale_sinks(a, quiver, (omega as f64).sqrt().recip())
}

/// Inverse of [`tilde`].
pub fn untilde(a: &GroupElement, quiver: &BipartiteQuiver, omega: i64) -> GroupElement {
    rescale_sinks(a, quiver, (omega as f64).sqrt())
}

fn rescale_sinks(a: &GroupElement, quiver: &BipartiteQuiver, c: f64) -> GroupElement {
    let mut out = a.clone();
    for w in &quiver.sinks {
        if let Some(block) = out.0.get_mut(w) {
            *block *= c;
        }
    }
    out
}

/// `log |χ_p(A)|`, the character of `σ_p`.
pub fn log_abs_chi_p(a: &GroupElement, bld: &BLDatum) -> Result<f64> {
    log_abs_character(a, &bld.sigma_p()?)
}

#[derive(Clone, Debug)]
pub struct BLReport {
    /// `None` when the scaling run was indeterminate.
    pub bl: Option<ExtendedReal>,
    /// Value from the character upper bound, always available.
    pub bl_estimate: ExtendedReal,
    pub feasible: Decision,
    pub capacity: Option<f64>,
    pub omega: i64,
    pub n_total: usize,
    /// Whether the input already satisfies the geometric BL equations.
    pub geometric_bl: bool,
    /// `|χ_p(A)|^{−1/ω}` for `A` the rescaled scaling output.
    pub character_bl: Option<f64>,
    /// Relative gap between the two routes.
    pub route_gap: Option<f64>,
    /// Whether the rescaled scaling output makes `A·V` geometric BL.
    pub limit_is_geometric_bl: Option<bool>,
    pub scaling: ScalingReport,
}

pub const GEOMETRIC_TOL: f64 = 1e-10;

pub fn bl_constant(bld: &BLDatum, cfg: &ScalingConfig) -> Result<BLReport> {
    let datum = bld.to_quiver_datum()?;
    let omega = bld.omega();
    let n_total = datum.n_total();
    let report = run_scaling(&datum, cfg)?;
    let bl = report.capacity.map(|d| bl_from_capacity(d, omega, n_total));
    let bl_estimate = bl_from_capacity(report.capacity_estimate, omega, n_total);

    let (mut character_bl, mut route_gap, mut limit_geo) = (None, None, None);
    if report.status == ScalingStatus::Converged {
        let a_bl = untilde(&report.a, &bld.quiver, omega);
        let log_chi = log_abs_chi_p(&a_bl, bld)?;
        let value = (-log_chi / omega as f64).exp();
        if let Some(ExtendedReal::Finite(b)) = bl {
            route_gap = Some((b - value).abs() / b);
        }
        character_bl = Some(value);
        let moved = crate::quiver::act(&a_bl, &bld.quiver, &bld.rep)?;
        limit_geo = Some(is_geometric_bl(
            &BLDatum {
                rep: moved,
                ..bld.clone()
            },
            1e-6,
        )?);
    }
    Ok(BLReport {
        bl,
        bl_estimate,
        feasible: semistable_from(&report),
        capacity: report.capacity,
        omega,
        n_total,
        geometric_bl: is_geometric_bl(bld, GEOMETRIC_TOL)?,
        character_bl,
        route_gap,
        limit_is_geometric_bl: limit_geo,
        scaling: report,
    })
}

/// `Σ_j p_j Σ_a V(a)ᵀV(a) = I` at every source and `Σ_i Σ_a V(a)V(a)ᵀ = I`
/// at every sink, each within Frobenius distance `tol`.
pub fn is_geometric_bl(bld: &BLDatum, tol: f64) -> Result<bool> {
    let (sd, kd, ends, mats) = bld.arrow_data()?;
    let p = bld.exponents.as_f64();
    let mut left: Vec<DMatrix<f64>> = sd.iter().map(|&d| DMatrix::zeros(d, d)).collect();
    let mut right: Vec<DMatrix<f64>> = kd.iter().map(|&d| DMatrix::zeros(d, d)).collect();
    for (v, &(i, j)) in mats.iter().zip(&ends) {
        left[i] += (v.transpose() * v) * p[j];
        right[j] += v * v.transpose();
    }
    Ok(left
        .iter()
        .chain(&right)
        .all(|m| (m - DMatrix::<f64>::identity(m.nrows(), m.nrows())).norm() <= tol))
}

/// `V` is `p`-semi-stable, decided through the scaling run on `(V, σ_p)`.
pub fn feasibility(bld: &BLDatum, cfg: &ScalingConfig) -> Result<Decision> {
    Ok(semistable_from(&run_scaling(&bld.to_quiver_datum()?, cfg)?))
}

/// `M̂_i = Σ_j p_j Σ_a V(a)ᵀ Y_j V(a)`.
fn m_hat(bld: &BLDatum, y: &[DMatrix<f64>]) -> Result<(Vec<DMatrix<f64>>, Vec<(usize, usize)>, Vec<DMatrix<f64>>)> {
    let (sd, kd, ends, mats) = bld.arrow_data()?;
    if y.len() != kd.len() || y.iter().zip(&kd).any(|(m, &d)| m.shape() != (d, d)) {
        return Err(Error::Shape("Gram tuple does not match the sink dimensions".into()));
    }
    let p = bld.exponents.as_f64();
    let mut out: Vec<DMatrix<f64>> = sd.iter().map(|&d| DMatrix::zeros(d, d)).collect();
    for (v, &(i, j)) in mats.iter().zip(&ends) {
        out[i] += (v.transpose() * &y[j] * v) * p[j];
    }
    Ok((out, ends, mats))
}

/// `(Π det(Y_j)^{p_j} / Π det M̂_i)^{1/2}`; `+∞` when some `M̂_i` is singular.
pub fn bl_objective(bld: &BLDatum, y: &[DMatrix<f64>]) -> Result<ExtendedReal> {
    let (ms, _, _) = m_hat(bld, y)?;
    let p = bld.exponents.as_f64();
    let mut log = 0.0;
    for (j, yj) in y.iter().enumerate() {
        log += p[j] * linalg::logdet_spd(yj).ok_or_else(|| Error::Shape(format!("Y_{} is not positive definite", j + 1)))?;
    }
    for m in &ms {
        match linalg::logdet_spd(m) {
            Some(l) => log -= l,
            None => return Ok(ExtendedReal::Infinity),
        }
    }
    Ok(ExtendedReal::Finite((0.5 * log).exp()))
}

/// `Σ_j ‖Σ_i Σ_a V M̂_i⁻¹ Vᵀ − Y_j⁻¹‖_F / ‖Y_j⁻¹‖_F`, the stationarity
/// defect of the BL supremum.
pub fn bl_stationarity_residual(bld: &BLDatum, y: &[DMatrix<f64>]) -> Result<f64> {
    let (ms, ends, mats) = m_hat(bld, y)?;
    let inv = ms
        .iter()
        .enumerate()
        .map(|(i, m)| {
            linalg::spd_inverse(m).ok_or_else(|| Error::Singular {
                vertex: bld.quiver.sources[i].clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pulled: Vec<DMatrix<f64>> = y.iter().map(|m| DMatrix::zeros(m.nrows(), m.nrows())).collect();
    for (v, &(i, j)) in mats.iter().zip(&ends) {
        pulled[j] += v * &inv[i] * v.transpose();
    }
    let mut total = 0.0;
    for (j, s) in pulled.iter().enumerate() {
        let y_inv = linalg::spd_inverse(&y[j]).ok_or_else(|| Error::Shape(format!("Y_{} is not positive definite", j + 1)))?;
        total += (s - &y_inv).norm() / y_inv.norm();
    }
    Ok(total)
}
