//! The determinantal objective `D_Q(V, σ; Y)` over tuples of positive
//! definite matrices, its fixed-point minimization and gaussian extremisers.

use log::debug;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::quiver::{direct_sum, DimVector, Layout, QuiverDatum, Representation};
use crate::scaling::{run_scaling, ScalingConfig, ScalingReport, ScalingStatus};

/// Numerator blocks with log-determinant below this count as singular.
pub const LOGDET_FLOOR: f64 = -700.0;

/// One positive definite `Y_j` per sink, in sink order.
#[derive(Clone, Debug, PartialEq)]
pub struct GramTuple(pub Vec<DMatrix<f64>>);

impl GramTuple {
    pub fn identities(layout: &Layout) -> Self {
        Self(layout.sink_dims.iter().map(|&d| DMatrix::identity(d, d)).collect())
    }

    /// Checks shapes against the sink dimensions and positive definiteness.
    pub fn new(mats: Vec<DMatrix<f64>>, layout: &Layout) -> Result<Self> {
        if mats.len() != layout.n_sinks() {
            return Err(Error::Shape(format!(
                "{} matrices given for {} sinks",
                mats.len(),
                layout.n_sinks()
            )));
        }
        for (j, (y, &d)) in mats.iter().zip(&layout.sink_dims).enumerate() {
            if y.shape() != (d, d) {
                return Err(Error::Shape(format!("Y_{} must be {d}x{d}", j + 1)));
            }
            if linalg::logdet_spd(y).is_none() {
                return Err(Error::Shape(format!("Y_{} is not positive definite", j + 1)));
            }
        }
        Ok(Self(mats.into_iter().map(|y| linalg::symmetrize(&y)).collect()))
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self(self.0.iter().map(|y| y * t).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `M_i = Σ_j σ₋(w_j) Σ_a V(a)ᵀ Y_j V(a)`.
pub fn m_matrices(layout: &Layout, mats: &[DMatrix<f64>], y: &GramTuple) -> Vec<DMatrix<f64>> {
    let mut out: Vec<DMatrix<f64>> = layout.source_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
    for (k, v) in mats.iter().enumerate() {
        let (i, j) = layout.arrow_ends[k];
        out[i] += (v.transpose() * &y.0[j] * v) * layout.sigma_minus[j] as f64;
    }
    out.into_iter().map(|m| linalg::symmetrize(&m)).collect()
}

/// `Σ_i σ₊(v_i) Σ_a V(a) M_i⁻¹ V(a)ᵀ` for each sink.
fn pulled_back(layout: &Layout, mats: &[DMatrix<f64>], m_inv: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let mut out: Vec<DMatrix<f64>> = layout.sink_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
    for (k, v) in mats.iter().enumerate() {
        let (i, j) = layout.arrow_ends[k];
        out[j] += (v * &m_inv[i] * v.transpose()) * layout.sigma_plus[i] as f64;
    }
    out.into_iter().map(|m| linalg::symmetrize(&m)).collect()
}

fn log_objective_parts(layout: &Layout, mats: &[DMatrix<f64>], y: &GramTuple) -> Result<Option<f64>> {
    check_shapes(layout, y)?;
    let mut acc = 0.0;
    for (i, m) in m_matrices(layout, mats, y).iter().enumerate() {
        match linalg::logdet_spd(m) {
            Some(l) if l >= LOGDET_FLOOR => acc += layout.sigma_plus[i] as f64 * l,
            _ => return Ok(None),
        }
    }
    for (j, yj) in y.0.iter().enumerate() {
        let l = linalg::logdet_spd(yj).ok_or_else(|| Error::Shape(format!("Y_{} is not positive definite", j + 1)))?;
        acc -= layout.sigma_minus[j] as f64 * l;
    }
    Ok(Some(acc))
}

fn check_shapes(layout: &Layout, y: &GramTuple) -> Result<()> {
    if y.len() != layout.n_sinks() || y.0.iter().zip(&layout.sink_dims).any(|(m, &d)| m.shape() != (d, d)) {
        return Err(Error::Shape("Gram tuple does not match the sink dimensions".into()));
    }
    Ok(())
}

/// `log D_Q(V, σ; Y)`, or `None` when a numerator block is singular.
pub fn log_objective(datum: &QuiverDatum, y: &GramTuple) -> Result<Option<f64>> {
    log_objective_parts(&datum.layout()?, &datum.matrices()?, y)
}

/// `Π_i det(M_i)^{σ₊(v_i)} / Π_j det(Y_j)^{σ₋(w_j)}`; 0 when some `M_i` is
/// numerically singular.
pub fn objective(datum: &QuiverDatum, y: &GramTuple) -> Result<f64> {
    Ok(log_objective(datum, y)?.map_or(0.0, f64::exp))
}

struct Step {
    next: GramTuple,
    residual: f64,
}

fn step_parts(layout: &Layout, mats: &[DMatrix<f64>], y: &GramTuple) -> Result<Step> {
    check_shapes(layout, y)?;
    let ms = m_matrices(layout, mats, y);
    let mut m_inv = Vec::with_capacity(ms.len());
    for (i, m) in ms.iter().enumerate() {
        m_inv.push(linalg::spd_inverse(m).ok_or_else(|| Error::Singular {
            vertex: format!("source #{}", i + 1),
        })?);
    }
    let pulled = pulled_back(layout, mats, &m_inv);
    let mut next = Vec::with_capacity(pulled.len());
    let mut residual = 0.0;
    for (j, s) in pulled.iter().enumerate() {
        let y_inv = linalg::spd_inverse(&y.0[j]).ok_or_else(|| Error::Shape(format!("Y_{} is not positive definite", j + 1)))?;
        residual += (s - &y_inv).norm() / y_inv.norm();
        next.push(linalg::spd_inverse(s).ok_or_else(|| Error::Singular {
            vertex: format!("sink #{}", j + 1),
        })?);
    }
    Ok(Step {
        next: GramTuple(next),
        residual,
    })
}

/// `Y′_j = (Σ_i σ₊(v_i) Σ_a V(a) M_i⁻¹ V(a)ᵀ)⁻¹`.
pub fn fixed_point_step(datum: &QuiverDatum, y: &GramTuple) -> Result<GramTuple> {
    Ok(step_parts(&datum.layout()?, &datum.matrices()?, y)?.next)
}

/// `Σ_j ‖Σ_i σ₊ Σ_a V M_i⁻¹ Vᵀ − Y_j⁻¹‖_F / ‖Y_j⁻¹‖_F`.
pub fn stationarity_residual(datum: &QuiverDatum, y: &GramTuple) -> Result<f64> {
    Ok(step_parts(&datum.layout()?, &datum.matrices()?, y)?.residual)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Scaling,
    FixedPoint,
    BruteForce,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Scaling => "scaling",
            Method::FixedPoint => "fixed_point",
            Method::BruteForce => "brute_force",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CapacityEstimate {
    pub value: f64,
    pub method: Method,
    /// Present only when `residual` is below the extremiser tolerance.
    pub extremiser: Option<GramTuple>,
    /// Stationarity residual at the final `Y`; `+∞` when undefined.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedPointConfig {
    pub max_iter: usize,
    /// Stop when the relative objective change drops below this.
    pub tol_rel: f64,
    /// Stop when the stationarity residual drops below this.
    pub tol_residual: f64,
    pub extremiser_tol: f64,
    pub floor: f64,
    /// Consecutive iterations below `floor` that declare capacity 0.
    pub floor_streak: usize,
    pub max_backtracks: usize,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            max_iter: 100_000,
            tol_rel: 1e-15,
            tol_residual: 1e-11,
            extremiser_tol: 1e-6,
            floor: 1e-30,
            floor_streak: 50,
            max_backtracks: 40,
        }
    }
}

/// Rescale so that `Σ σ₋(w_j) log det Y_j = 0`; the objective is unchanged.
fn normalize(layout: &Layout, y: GramTuple) -> GramTuple {
    let total: f64 = y
        .0
        .iter()
        .zip(&layout.sigma_minus)
        .map(|(m, &s)| s as f64 * linalg::logdet_spd(m).unwrap_or(0.0))
        .sum();
    let t = (-total / layout.n_total as f64).exp();
    if t.is_finite() && t > 0.0 {
        y.scaled(t)
    } else {
        y
    }
}

fn zero_estimate(iterations: usize) -> CapacityEstimate {
    CapacityEstimate {
        value: 0.0,
        method: Method::FixedPoint,
        extremiser: None,
        residual: f64::INFINITY,
        iterations,
    }
}

/// Minimizes `D_Q(V, σ; ·)` by fixed-point iteration from the identities,
/// falling back to damped steps `(1−t)Y + tY′` when a full step would
/// increase the objective.
pub fn minimize_y(datum: &QuiverDatum, cfg: &FixedPointConfig) -> Result<CapacityEstimate> {
    let layout = datum.layout()?;
    let mats = datum.matrices()?;
    let log_floor = cfg.floor.ln();
    let mut y = GramTuple::identities(&layout);
    let Some(mut current) = log_objective_parts(&layout, &mats, &y)? else {
        return Ok(zero_estimate(0));
    };
    let mut below = 0usize;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        let step = match step_parts(&layout, &mats, &y) {
            Ok(s) => s,
            Err(Error::Singular { .. }) => return Ok(zero_estimate(iterations)),
            Err(e) => return Err(e),
        };
        residual = step.residual;
        if residual <= cfg.tol_residual {
            break;
        }
        iterations += 1;
        let full = normalize(&layout, step.next);
        let mut accepted = None;
        if let Some(v) = log_objective_parts(&layout, &mats, &full)? {
            if v <= current + 1e-13 * current.abs().max(1.0) {
                accepted = Some((full.clone(), v));
            }
        }
        if accepted.is_none() {
            let mut t = 0.5;
            for _ in 0..cfg.max_backtracks {
                let mixed = GramTuple(y.0.iter().zip(&full.0).map(|(a, b)| a * (1.0 - t) + b * t).collect());
                if let Some(v) = log_objective_parts(&layout, &mats, &mixed)? {
                    if v <= current {
                        accepted = Some((normalize(&layout, mixed), v));
                        break;
                    }
                }
                t *= 0.5;
            }
        }
        let Some((next, value)) = accepted else {
            debug!("fixed point: no descent step after {iterations} iterations");
            break;
        };
        let change = (current - value).abs() / current.abs().max(1.0);
        y = next;
        current = value;
        if current < log_floor {
            below += 1;
            if below >= cfg.floor_streak {
                return Ok(zero_estimate(iterations));
            }
        } else {
            below = 0;
        }
        if change < cfg.tol_rel {
            residual = step_parts(&layout, &mats, &y).map(|s| s.residual).unwrap_or(f64::INFINITY);
            break;
        }
    }
    debug!("fixed point: {iterations} iterations, residual {residual:e}");
    Ok(CapacityEstimate {
        value: current.exp(),
        method: Method::FixedPoint,
        extremiser: (residual < cfg.extremiser_tol).then(|| y.clone()),
        residual,
        iterations,
    })
}

/// `Y_j = A(w_j)ᵀ A(w_j)` from a converged scaling run.
pub fn extremiser_from_scaling(datum: &QuiverDatum, report: &ScalingReport) -> Result<GramTuple> {
    if report.status != ScalingStatus::Converged {
        return Err(Error::NotConverged(report.status.as_str().into()));
    }
    let mats = datum
        .quiver
        .sinks
        .iter()
        .map(|w| {
            report
                .a
                .get(w)
                .map(|a| linalg::symmetrize(&(a.transpose() * a)))
                .ok_or_else(|| Error::Shape(format!("scaling report has no block at {w}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GramTuple(mats))
}

/// Scaling tolerance used before extracting an extremiser. The stationarity
/// residual of `A(w)ᵀA(w)` is of order `√ds`, so the capacity tolerance
/// alone leaves it near `1e−6`.
pub const EXTREMISER_TOL_DS: f64 = 1e-20;

/// A converged run suitable for [`extremiser_from_scaling`]: first with
/// `tol_ds` tightened to [`EXTREMISER_TOL_DS`], then with `cfg` as given if
/// the tightened run does not converge.
pub fn scaling_for_extremiser(datum: &QuiverDatum, cfg: &ScalingConfig) -> Result<ScalingReport> {
    let tight = ScalingConfig {
        tol_ds: cfg.tol_ds.min(EXTREMISER_TOL_DS),
        ..cfg.clone()
    };
    let r = run_scaling(datum, &tight)?;
    if r.status == ScalingStatus::Converged || r.status.is_zero() {
        return Ok(r);
    }
    run_scaling(datum, cfg)
}

/// Capacity read off a scaling report: the converged value, 0 for zero
/// decisions, then the extrapolated character, then the upper bound.
pub fn capacity_value(report: &ScalingReport) -> f64 {
    report
        .capacity
        .or(report.capacity_extrapolated)
        .unwrap_or(report.capacity_estimate)
}

#[derive(Clone, Debug)]
pub struct FactorizationReport {
    pub full: ScalingReport,
    pub first: ScalingReport,
    pub second: ScalingReport,
    pub d_full: f64,
    pub d_first: f64,
    pub d_second: f64,
    /// `|D(V) − D(V₁)D(V₂)| / max(D(V₁)D(V₂), floor)`.
    pub gap: f64,
}

fn block(m: &DMatrix<f64>, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> DMatrix<f64> {
    m.view((rows.start, cols.start), (rows.len(), cols.len())).into_owned()
}

/// Splits `V = (V₁ X; 0 V₂)` along `d₁` and compares `D(V)` with
/// `D(V₁)·D(V₂)`. Requires `σ·d₁ = 0` and a vanishing lower-left block.
pub fn factorization_check(datum: &QuiverDatum, d1: &DimVector, cfg: &ScalingConfig, floor: f64) -> Result<FactorizationReport> {
    let lhs = datum.weight.dot(d1);
    if lhs != 0 {
        return Err(Error::Orthogonality {
            lhs: lhs.to_string(),
            rhs: "0".into(),
        });
    }
    let mut d2 = DimVector::default();
    for v in datum.quiver.vertices() {
        let (full, first) = (datum.dims.get(v), d1.get(v));
        if first > full {
            return Err(Error::Shape(format!("block dimension {first} at {v} exceeds {full}")));
        }
        d2.0.insert(v.clone(), full - first);
    }
    let mut v1 = Representation::default();
    let mut v2 = Representation::default();
    let mut x = Representation::default();
    for a in &datum.quiver.arrows {
        let m = datum
            .rep
            .get(&a.id)
            .ok_or_else(|| Error::Shape(format!("no matrix for arrow {}", a.id)))?;
        let (h1, t1) = (d1.get(&a.head), d1.get(&a.tail));
        let (h, t) = (datum.dims.get(&a.head), datum.dims.get(&a.tail));
        let lower = block(m, h1..h, 0..t1);
        if lower.amax() > 1e-14 * m.amax().max(1.0) {
            return Err(Error::Shape(format!(
                "matrix for arrow {} is not block upper-triangular along the given split",
                a.id
            )));
        }
        v1.insert(&a.id, block(m, 0..h1, 0..t1));
        v2.insert(&a.id, block(m, h1..h, t1..t));
        x.insert(&a.id, block(m, 0..h1, t1..t));
    }
    debug_assert_eq!(
        direct_sum(&datum.quiver, d1, &v1, &d2, &v2, Some(&x)).map(|r| r.1).ok().as_ref(),
        Some(&datum.rep)
    );
    let first = QuiverDatum {
        dims: d1.clone(),
        rep: v1,
        ..datum.clone()
    };
    let second = QuiverDatum {
        dims: d2,
        rep: v2,
        ..datum.clone()
    };
    let sub_cfg = |d: &QuiverDatum| {
        // an empty block has N = 0 and no threshold of its own
        let mut c = cfg.clone();
        if d.n_total() == 0 {
            c.positivity_threshold = Some(c.threshold(datum.n_total()));
        }
        c
    };
    let full = run_scaling(datum, cfg)?;
    let r1 = run_scaling(&first, &sub_cfg(&first))?;
    let r2 = run_scaling(&second, &sub_cfg(&second))?;
    let (d_full, d_first, d_second) = (capacity_value(&full), capacity_value(&r1), capacity_value(&r2));
    let product = d_first * d_second;
    Ok(FactorizationReport {
        gap: (d_full - product).abs() / product.max(floor),
        full,
        first: r1,
        second: r2,
        d_full,
        d_first,
        d_second,
    })
}
