//! Alternating operator scaling for quiver data.
//!
//! Each round normalizes the source marginals `L_i` and then the sink
//! marginals `R_j` by inverse square roots, accumulating the change of base
//! `A` and `log |χ_σ(A)|`. At a doubly stochastic limit the capacity is
//! `χ_σ(A)²`.

use log::debug;
use nalgebra::{DMatrix, DVector};

use crate::blowup::BlOperator;
use crate::error::{Error, Result};
use crate::linalg::{self, RANK_RTOL};
use crate::quiver::{BipartiteQuiver, GroupElement, Layout, QuiverDatum, Representation};

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingConfig {
    pub tol_ds: f64,
    pub max_iter: usize,
    /// `None` means `1/(N(N+1))`.
    pub positivity_threshold: Option<f64>,
    pub singular_guard: f64,
    pub seed: u64,
    /// Largest `‖A‖·‖A⁻¹‖` accepted as a credible polystability certificate.
    pub cond_cap: f64,
    /// Conditioning and drift are sampled every this many rounds.
    pub check_every: usize,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            tol_ds: 1e-12,
            max_iter: 100_000,
            positivity_threshold: None,
            singular_guard: 1e-13,
            seed: 0,
            cond_cap: 1e8,
            check_every: 16,
        }
    }
}

impl ScalingConfig {
    pub fn threshold(&self, n_total: usize) -> f64 {
        self.positivity_threshold
            .unwrap_or(1.0 / (n_total as f64 * (n_total as f64 + 1.0)))
    }

    pub fn check(&self, n_total: usize) -> Result<()> {
        let t = self.threshold(n_total);
        if !(self.tol_ds > 0.0) || !(self.tol_ds < t) {
            return Err(Error::Config(format!(
                "tol_ds = {:e} must be positive and below the positivity threshold {:e}",
                self.tol_ds, t
            )));
        }
        if self.check_every == 0 {
            return Err(Error::Config("check_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// `L_i = Σ_j σ₋(w_j) Σ_a V(a)ᵀV(a)`.
pub(crate) fn source_marginals(layout: &Layout, mats: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let mut out: Vec<DMatrix<f64>> = layout.source_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
    for (k, v) in mats.iter().enumerate() {
        let (i, j) = layout.arrow_ends[k];
        out[i] += (v.transpose() * v) * layout.sigma_minus[j] as f64;
    }
    out
}

/// `R_j = Σ_i σ₊(v_i) Σ_a V(a)V(a)ᵀ`.
pub(crate) fn sink_marginals(layout: &Layout, mats: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let mut out: Vec<DMatrix<f64>> = layout.sink_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
    for (k, v) in mats.iter().enumerate() {
        let (i, j) = layout.arrow_ends[k];
        out[j] += (v * v.transpose()) * layout.sigma_plus[i] as f64;
    }
    out
}

fn distance_to_identity(ms: &[DMatrix<f64>], weights: &[usize]) -> f64 {
    ms.iter()
        .zip(weights)
        .map(|(m, &w)| {
            let n = m.nrows();
            w as f64 * (m - DMatrix::<f64>::identity(n, n)).norm_squared()
        })
        .sum()
}

fn ds_of(layout: &Layout, mats: &[DMatrix<f64>]) -> f64 {
    distance_to_identity(&source_marginals(layout, mats), &layout.sigma_plus)
        + distance_to_identity(&sink_marginals(layout, mats), &layout.sigma_minus)
}

/// Doubly stochastic distance `Σ σ₊‖L_i − I‖²_F + Σ σ₋‖R_j − I‖²_F`.
pub fn ds_distance(datum: &QuiverDatum) -> Result<f64> {
    Ok(ds_of(&datum.layout()?, &datum.matrices()?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Source,
    Sink,
}

/// A marginal that could not be inverted. `kernel` is an orthonormal basis
/// of its numerical kernel in the current coordinates.
#[derive(Clone, Debug)]
pub struct SingularBlock {
    pub side: Side,
    pub index: usize,
    pub vertex: String,
    pub kernel: DMatrix<f64>,
}

/// Scaling iterate: the current representation `A·V`, the accumulated
/// group element and `log |χ_σ(A)|`.
#[derive(Clone, Debug)]
pub struct ScalingState {
    quiver: BipartiteQuiver,
    layout: Layout,
    original: Vec<DMatrix<f64>>,
    mats: Vec<DMatrix<f64>>,
    a_sources: Vec<DMatrix<f64>>,
    a_sinks: Vec<DMatrix<f64>>,
    pub logabs_character: f64,
    pub iteration: usize,
    pub ds: f64,
}

impl ScalingState {
    pub fn new(datum: &QuiverDatum) -> Result<Self> {
        let layout = datum.layout()?;
        let mats = datum.matrices()?;
        let ds = ds_of(&layout, &mats);
        Ok(Self {
            quiver: datum.quiver.clone(),
            a_sources: layout.source_dims.iter().map(|&d| DMatrix::identity(d, d)).collect(),
            a_sinks: layout.sink_dims.iter().map(|&d| DMatrix::identity(d, d)).collect(),
            original: mats.clone(),
            mats,
            layout,
            logabs_character: 0.0,
            iteration: 0,
            ds,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.mats
    }

    pub fn rep(&self) -> Representation {
        Representation(
            self.quiver
                .arrows
                .iter()
                .zip(&self.mats)
                .map(|(a, m)| (a.id.clone(), m.clone()))
                .collect(),
        )
    }

    pub fn group_element(&self) -> GroupElement {
        let mut g = GroupElement(Default::default());
        for (v, a) in self.quiver.sources.iter().zip(&self.a_sources) {
            g.0.insert(v.clone(), a.clone());
        }
        for (w, a) in self.quiver.sinks.iter().zip(&self.a_sinks) {
            g.0.insert(w.clone(), a.clone());
        }
        g
    }

    pub fn source_block(&self, i: usize) -> &DMatrix<f64> {
        &self.a_sources[i]
    }

    pub fn sink_block(&self, j: usize) -> &DMatrix<f64> {
        &self.a_sinks[j]
    }

    pub fn source_marginals(&self) -> Vec<DMatrix<f64>> {
        source_marginals(&self.layout, &self.mats)
    }

    pub fn sink_marginals(&self) -> Vec<DMatrix<f64>> {
        sink_marginals(&self.layout, &self.mats)
    }

    fn refresh_ds(&mut self) {
        self.ds = ds_of(&self.layout, &self.mats);
    }

    /// Largest `‖act(A, V) − A·V‖_F / ‖V(a)‖_F` over arrows, i.e. how far the
    /// incrementally updated matrices have drifted from the accumulated `A`.
    pub fn drift(&self) -> f64 {
        let mut worst = 0.0f64;
        let inverses: Vec<Option<DMatrix<f64>>> =
            self.a_sources.iter().map(|a| a.clone().try_inverse()).collect();
        for (k, v) in self.original.iter().enumerate() {
            let (i, j) = self.layout.arrow_ends[k];
            let Some(inv) = &inverses[i] else {
                return f64::INFINITY;
            };
            let expected = &self.a_sinks[j] * v * inv;
            let scale = expected.norm().max(self.mats[k].norm()).max(f64::MIN_POSITIVE);
            worst = worst.max((expected - &self.mats[k]).norm() / scale);
        }
        worst
    }

    /// Whether every entry of `A` and of `A·V` is a finite float.
    pub fn is_finite(&self) -> bool {
        self.a_sources
            .iter()
            .chain(&self.a_sinks)
            .chain(&self.mats)
            .all(|m| m.iter().all(|x| x.is_finite()))
    }

    /// Largest blockwise condition number of `A`.
    pub fn condition(&self) -> f64 {
        self.a_sources
            .iter()
            .chain(&self.a_sinks)
            .map(linalg::condition_number)
            .fold(1.0, f64::max)
    }
}

/// `V(a) ← V(a)·L_{ta}^{−1/2}`, `A(v_i) ← L_i^{1/2}A(v_i)`.
pub fn source_normalize(state: &mut ScalingState, guard: f64) -> std::result::Result<(), SingularBlock> {
    let ls = state.source_marginals();
    let mut inv = Vec::with_capacity(ls.len());
    let mut logdet = 0.0;
    for (i, l) in ls.iter().enumerate() {
        match linalg::spd_roots(l, guard) {
            Ok(r) => {
                logdet += state.layout.sigma_plus[i] as f64 * 0.5 * r.logdet;
                state.a_sources[i] = &r.sqrt * &state.a_sources[i];
                inv.push(r.inv_sqrt);
            }
            Err(kernel) => {
                return Err(SingularBlock {
                    side: Side::Source,
                    index: i,
                    vertex: state.quiver.sources[i].clone(),
                    kernel,
                })
            }
        }
    }
    for (k, v) in state.mats.iter_mut().enumerate() {
        let (i, _) = state.layout.arrow_ends[k];
        *v = &*v * &inv[i];
    }
    state.logabs_character += logdet;
    state.refresh_ds();
    Ok(())
}

/// `V(a) ← R_{ha}^{−1/2}V(a)`, `A(w_j) ← R_j^{−1/2}A(w_j)`.
pub fn sink_normalize(state: &mut ScalingState, guard: f64) -> std::result::Result<(), SingularBlock> {
    let rs = state.sink_marginals();
    let mut inv = Vec::with_capacity(rs.len());
    let mut logdet = 0.0;
    for (j, r) in rs.iter().enumerate() {
        match linalg::spd_roots(r, guard) {
            Ok(roots) => {
                logdet += state.layout.sigma_minus[j] as f64 * 0.5 * roots.logdet;
                state.a_sinks[j] = &roots.inv_sqrt * &state.a_sinks[j];
                inv.push(roots.inv_sqrt);
            }
            Err(kernel) => {
                return Err(SingularBlock {
                    side: Side::Sink,
                    index: j,
                    vertex: state.quiver.sinks[j].clone(),
                    kernel,
                })
            }
        }
    }
    for (k, v) in state.mats.iter_mut().enumerate() {
        let (_, j) = state.layout.arrow_ends[k];
        *v = &inv[j] * &*v;
    }
    state.logabs_character += logdet;
    state.refresh_ds();
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WitnessOrigin {
    /// Kernel of a singular source marginal.
    SourceKernel,
    /// Cokernel of a singular sink marginal.
    SinkCokernel,
    /// Found by [`rank_witness_search`].
    RankSearch,
}

/// Subspaces `U_i ≤ ℝ^{d(v_i)}` (original coordinates, orthonormal columns)
/// violating `Σ σ₊ dim U_i ≤ Σ_j σ₋ dim(Σ_{i,a} V(a)U_i)`.
#[derive(Clone, Debug)]
pub struct SubspaceWitness {
    pub origin: WitnessOrigin,
    pub vertex: Option<String>,
    /// Kernel (source case) or cokernel (sink case) basis at `vertex`.
    pub basis: Option<DMatrix<f64>>,
    pub subspaces: Vec<(String, DMatrix<f64>)>,
    pub lhs: usize,
    pub rhs: usize,
    /// `lhs > rhs` re-checked on the original datum.
    pub verified: bool,
}

/// `(Σ σ₊ dim U_i, Σ σ₋ dim Σ V(a)U_i)`. Image dimensions are ranks of the
/// blocks of `T*(X)` for `X` the replicated projectors, cut at
/// `RANK_RTOL · λ_max(T*(I))`.
pub fn subspace_dimensions(op: &BlOperator, subspaces: &[DMatrix<f64>]) -> (usize, usize) {
    let layout = op.layout();
    let lhs = subspaces
        .iter()
        .zip(&layout.sigma_plus)
        .map(|(u, s)| s * linalg::rank(u, RANK_RTOL))
        .sum();
    let projectors: Vec<DMatrix<f64>> = subspaces.iter().map(|u| u * u.transpose()).collect();
    let full: Vec<DMatrix<f64>> = layout.source_dims.iter().map(|&d| DMatrix::identity(d, d)).collect();
    let scale: f64 = op
        .sink_images(&full)
        .iter()
        .map(|m| linalg::sym_eigen(m).0.last().copied().unwrap_or(0.0))
        .fold(0.0, f64::max);
    let rhs = op
        .sink_images(&projectors)
        .iter()
        .zip(&layout.sigma_minus)
        .map(|(m, s)| {
            let (values, _) = linalg::sym_eigen(m);
            s * values.iter().filter(|&&x| scale > 0.0 && x > RANK_RTOL * scale).count()
        })
        .sum();
    (lhs, rhs)
}

fn orthonormal(m: &DMatrix<f64>) -> DMatrix<f64> {
    linalg::column_basis(m, RANK_RTOL)
}

fn witness_from_singular(datum: &QuiverDatum, state: &ScalingState, sb: &SingularBlock) -> Result<SubspaceWitness> {
    let op = BlOperator::new(datum)?;
    let layout = op.layout();
    let (subspaces, basis, origin) = match sb.side {
        Side::Source => {
            let inv = state.a_sources[sb.index]
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::Singular { vertex: sb.vertex.clone() })?;
            let basis = orthonormal(&(inv * &sb.kernel));
            let subspaces: Vec<DMatrix<f64>> = layout
                .source_dims
                .iter()
                .enumerate()
                .map(|(i, &d)| if i == sb.index { basis.clone() } else { DMatrix::zeros(d, 0) })
                .collect();
            (subspaces, basis, WitnessOrigin::SourceKernel)
        }
        Side::Sink => {
            let basis = orthonormal(&(state.a_sinks[sb.index].transpose() * &sb.kernel));
            let subspaces = layout.source_dims.iter().map(|&d| DMatrix::identity(d, d)).collect();
            (subspaces, basis, WitnessOrigin::SinkCokernel)
        }
    };
    let (lhs, rhs) = subspace_dimensions(&op, &subspaces);
    Ok(SubspaceWitness {
        origin,
        vertex: Some(sb.vertex.clone()),
        basis: Some(basis),
        subspaces: datum.quiver.sources.iter().cloned().zip(subspaces).collect(),
        lhs,
        rhs,
        verified: lhs > rhs,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalingStatus {
    /// `ds ≤ tol_ds`: capacity `χ_σ(A)² > 0`.
    Converged,
    /// A marginal became singular: capacity 0, witness attached.
    ZeroWitness,
    /// Budget exhausted with `ds` above the positivity threshold: capacity 0.
    ZeroThreshold,
    /// Budget exhausted between `tol_ds` and the threshold, or non-finite.
    Indeterminate,
}

impl ScalingStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ScalingStatus::Converged => "converged",
            ScalingStatus::ZeroWitness => "zero_witness",
            ScalingStatus::ZeroThreshold => "zero_threshold",
            ScalingStatus::Indeterminate => "indeterminate",
        }
    }

    pub fn is_zero(self) -> bool {
        matches!(self, ScalingStatus::ZeroWitness | ScalingStatus::ZeroThreshold)
    }
}

#[derive(Clone, Debug)]
pub struct ScalingReport {
    pub status: ScalingStatus,
    pub converged: bool,
    pub ds_final: f64,
    /// Smallest `ds` seen along the run.
    pub ds_min: f64,
    /// `Some(χ_σ(A)²)` when converged, `Some(0)` for zero decisions.
    pub capacity: Option<f64>,
    /// `exp(2·log|χ_σ(A)|)`, an upper bound on the capacity after any sink step.
    pub capacity_estimate: f64,
    /// Richardson extrapolation `2·log χ(K) − log χ(K/2)` of the character
    /// after an exhausted budget of `K` rounds. On semi-stable but not
    /// polystable data `log χ` approaches its limit like `1/k`, and this
    /// removes the leading term. Not an upper bound.
    pub capacity_extrapolated: Option<f64>,
    pub logabs_character: f64,
    pub a: GroupElement,
    pub rep: Representation,
    pub witness: Option<SubspaceWitness>,
    pub iterations: usize,
    /// `ds` after every full round (entry 0 is the input).
    pub ds_trace: Vec<f64>,
    pub max_condition: f64,
    pub max_drift: f64,
    pub threshold: f64,
}

fn report(state: &ScalingState, status: ScalingStatus, witness: Option<SubspaceWitness>, trace: Vec<f64>, max_condition: f64, max_drift: f64, threshold: f64) -> ScalingReport {
    report_with(state, status, witness, trace, max_condition, max_drift, threshold, None)
}

#[allow(clippy::too_many_arguments)]
fn report_with(
    state: &ScalingState,
    status: ScalingStatus,
    witness: Option<SubspaceWitness>,
    trace: Vec<f64>,
    max_condition: f64,
    max_drift: f64,
    threshold: f64,
    extrapolated: Option<f64>,
) -> ScalingReport {
    let estimate = (2.0 * state.logabs_character).exp();
    let capacity = match status {
        ScalingStatus::Converged => Some(estimate),
        ScalingStatus::ZeroWitness | ScalingStatus::ZeroThreshold => Some(0.0),
        ScalingStatus::Indeterminate => None,
    };
    ScalingReport {
        status,
        converged: status == ScalingStatus::Converged,
        ds_final: state.ds,
        ds_min: trace.iter().copied().fold(state.ds, f64::min),
        capacity,
        capacity_estimate: estimate,
        capacity_extrapolated: extrapolated,
        logabs_character: state.logabs_character,
        a: state.group_element(),
        rep: state.rep(),
        witness,
        iterations: state.iteration,
        ds_trace: trace,
        max_condition,
        max_drift,
        threshold,
    }
}

/// Runs the solver and also returns the final iterate.
pub fn run_scaling_with_state(datum: &QuiverDatum, cfg: &ScalingConfig) -> Result<(ScalingReport, ScalingState)> {
    let mut state = ScalingState::new(datum)?;
    let threshold = cfg.threshold(state.layout.n_total);
    cfg.check(state.layout.n_total)?;
    let mut trace = vec![state.ds];
    let mut max_condition = 1.0f64;
    let mut max_drift = 0.0f64;
    let guard = cfg.singular_guard;

    let checkpoint = |state: &ScalingState, mc: &mut f64, md: &mut f64| {
        *mc = mc.max(state.condition());
        *md = md.max(state.drift());
    };

    if state.ds <= cfg.tol_ds {
        return Ok((report(&state, ScalingStatus::Converged, None, trace, 1.0, 0.0, threshold), state));
    }
    let mut status = ScalingStatus::Indeterminate;
    let half = cfg.max_iter / 2;
    let mut half_log = None;
    while state.iteration < cfg.max_iter {
        state.iteration += 1;
        if let Err(sb) = source_normalize(&mut state, guard) {
            let w = witness_from_singular(datum, &state, &sb)?;
            debug!("singular source marginal at {} after {} rounds", sb.vertex, state.iteration);
            checkpoint(&state, &mut max_condition, &mut max_drift);
            return Ok((report(&state, ScalingStatus::ZeroWitness, Some(w), trace, max_condition, max_drift, threshold), state));
        }
        if state.ds <= cfg.tol_ds {
            status = ScalingStatus::Converged;
            break;
        }
        if let Err(sb) = sink_normalize(&mut state, guard) {
            let w = witness_from_singular(datum, &state, &sb)?;
            debug!("singular sink marginal at {} after {} rounds", sb.vertex, state.iteration);
            checkpoint(&state, &mut max_condition, &mut max_drift);
            return Ok((report(&state, ScalingStatus::ZeroWitness, Some(w), trace, max_condition, max_drift, threshold), state));
        }
        trace.push(state.ds);
        if state.iteration == half {
            half_log = Some(state.logabs_character);
        }
        if !state.ds.is_finite() || !state.logabs_character.is_finite() || !state.is_finite() {
            debug!("iterate left the floats after {} rounds", state.iteration);
            break;
        }
        if state.ds <= cfg.tol_ds {
            status = ScalingStatus::Converged;
            break;
        }
        if state.iteration % cfg.check_every == 0 {
            checkpoint(&state, &mut max_condition, &mut max_drift);
        }
    }
    checkpoint(&state, &mut max_condition, &mut max_drift);

    let exhausted_log = (state.iteration == cfg.max_iter).then_some(state.logabs_character);
    let mut witness = None;
    if status != ScalingStatus::Converged && state.ds.is_finite() && state.is_finite() {
        // one more source half-step, kept only if it helps
        let mut probe = state.clone();
        if source_normalize(&mut probe, guard).is_ok() && probe.ds < state.ds {
            state = probe;
            if state.ds <= cfg.tol_ds {
                status = ScalingStatus::Converged;
            }
        }
        if status != ScalingStatus::Converged {
            let best = trace.iter().copied().fold(state.ds, f64::min);
            if best > threshold {
                status = ScalingStatus::ZeroThreshold;
                witness = kernel_witness(datum, &state)?;
            }
        }
    }
    debug!(
        "scaling finished: {} after {} rounds, ds = {:e}",
        status.as_str(),
        state.iteration,
        state.ds
    );
    let extrapolated = match (status, half_log, exhausted_log) {
        (ScalingStatus::Indeterminate, Some(h), Some(k)) => Some((2.0 * (2.0 * k - h)).exp()),
        _ => None,
    };
    Ok((
        report_with(&state, status, witness, trace, max_condition, max_drift, threshold, extrapolated),
        state,
    ))
}

pub fn run_scaling(datum: &QuiverDatum, cfg: &ScalingConfig) -> Result<ScalingReport> {
    Ok(run_scaling_with_state(datum, cfg)?.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Yes,
    No,
    Indeterminate,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Yes => "yes",
            Decision::No => "no",
            Decision::Indeterminate => "indeterminate",
        }
    }
}

/// Semi-stability from the scaling outcome. An indeterminate run whose
/// smallest `ds` fell below the positivity threshold counts as positive.
pub fn semistable_from(report: &ScalingReport) -> Decision {
    match report.status {
        ScalingStatus::Converged => Decision::Yes,
        ScalingStatus::ZeroWitness | ScalingStatus::ZeroThreshold => Decision::No,
        ScalingStatus::Indeterminate if report.ds_min <= report.threshold => Decision::Yes,
        ScalingStatus::Indeterminate => Decision::Indeterminate,
    }
}

/// Heuristic: converged with `A` conditioned below `cond_cap` along the run.
pub fn polystable_from(report: &ScalingReport, cfg: &ScalingConfig) -> Decision {
    match report.status {
        ScalingStatus::Converged if report.max_condition <= cfg.cond_cap => Decision::Yes,
        ScalingStatus::ZeroWitness | ScalingStatus::ZeroThreshold => Decision::No,
        _ => Decision::Indeterminate,
    }
}

pub fn decide_semistable(datum: &QuiverDatum, cfg: &ScalingConfig) -> Result<(Decision, ScalingReport)> {
    let r = run_scaling(datum, cfg)?;
    Ok((semistable_from(&r), r))
}

pub fn decide_polystable(datum: &QuiverDatum, cfg: &ScalingConfig) -> Result<(Decision, ScalingReport)> {
    let r = run_scaling(datum, cfg)?;
    Ok((polystable_from(&r, cfg), r))
}

/// Certificate `X ⪰ 0` with `rank X > rank T*(X)`.
#[derive(Clone, Debug)]
pub struct RankWitness {
    pub x: DMatrix<f64>,
    pub rank_x: usize,
    pub rank_image: usize,
    pub subspaces: Vec<DMatrix<f64>>,
}

const COORDINATE_CANDIDATE_CAP: usize = 4096;

fn replicated_projector(layout: &Layout, subspaces: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n = layout.n_total;
    let mut x = DMatrix::zeros(n, n);
    let mut offset = 0;
    for (i, u) in subspaces.iter().enumerate() {
        let d = layout.source_dims[i];
        let p = u * u.transpose();
        for _ in 0..layout.sigma_plus[i] {
            x.view_mut((offset, offset), (d, d)).copy_from(&p);
            offset += d;
        }
    }
    x
}

fn rank_check(op: &BlOperator, subspaces: Vec<DMatrix<f64>>) -> Result<Option<RankWitness>> {
    let x = replicated_projector(op.layout(), &subspaces);
    let image = op.apply_adjoint(&x)?;
    let scale = linalg::sym_eigen(&op.apply_adjoint(&DMatrix::identity(x.nrows(), x.ncols()))?)
        .0
        .last()
        .copied()
        .unwrap_or(0.0);
    let rank_x = linalg::rank(&x, RANK_RTOL);
    let rank_image = if scale > 0.0 {
        linalg::sym_eigen(&image).0.iter().filter(|&&v| v > RANK_RTOL * scale).count()
    } else {
        0
    };
    Ok((rank_x > rank_image).then_some(RankWitness {
        x,
        rank_x,
        rank_image,
        subspaces,
    }))
}

fn coordinate_subspace(d: usize, mask: usize) -> DMatrix<f64> {
    let cols: Vec<usize> = (0..d).filter(|k| mask >> k & 1 == 1).collect();
    DMatrix::from_fn(d, cols.len(), |r, c| if r == cols[c] { 1.0 } else { 0.0 })
}

/// Searches projectors onto coordinate subspaces (replicated over the
/// `I⁺_i` blocks) and subspaces spanned by the least-scaled directions of a
/// scaling run for a violation of `rank X ≤ rank T*(X)`.
pub fn rank_witness_search(datum: &QuiverDatum, cfg: &ScalingConfig) -> Result<Option<RankWitness>> {
    let op = BlOperator::new(datum)?;
    let layout = op.layout().clone();

    let radix: Vec<usize> = layout.source_dims.iter().map(|&d| 1usize << d).collect();
    let total = radix.iter().try_fold(1usize, |acc, &r| acc.checked_mul(r));
    let count = total.unwrap_or(usize::MAX).min(COORDINATE_CANDIDATE_CAP);
    for code in (1..count).rev() {
        let mut rest = code;
        let subspaces: Vec<DMatrix<f64>> = layout
            .source_dims
            .iter()
            .zip(&radix)
            .map(|(&d, &r)| {
                let mask = rest % r;
                rest /= r;
                coordinate_subspace(d, mask)
            })
            .collect();
        if let Some(w) = rank_check(&op, subspaces)? {
            return Ok(Some(w));
        }
    }

    let (_, state) = run_scaling_with_state(datum, cfg)?;
    if let Some(w) = kernel_candidates(&op, &state)? {
        return Ok(Some(w));
    }
    Ok(None)
}

/// Prefixes of the eigenvectors of the final `L_i`, sorted by eigenvalue
/// across all sources and pulled back through `A(v_i)⁻¹`.
fn kernel_candidates(op: &BlOperator, state: &ScalingState) -> Result<Option<RankWitness>> {
    let layout = op.layout();
    let mut pairs: Vec<(f64, usize, DVector<f64>)> = Vec::new();
    for (i, l) in state.source_marginals().iter().enumerate() {
        let Some(inv) = state.a_sources[i].clone().try_inverse() else {
            continue;
        };
        let (values, vectors) = linalg::sym_eigen(l);
        for (k, val) in values.iter().enumerate() {
            pairs.push((*val, i, &inv * vectors.column(k)));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total = pairs.len();
    for len in 1..total {
        let mut cols: Vec<Vec<DVector<f64>>> = vec![Vec::new(); layout.n_sources()];
        for (_, i, v) in &pairs[..len] {
            cols[*i].push(v.clone());
        }
        let subspaces: Vec<DMatrix<f64>> = cols
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if c.is_empty() {
                    DMatrix::zeros(layout.source_dims[i], 0)
                } else {
                    orthonormal(&DMatrix::from_columns(c))
                }
            })
            .collect();
        if let Some(w) = rank_check(op, subspaces)? {
            return Ok(Some(w));
        }
    }
    Ok(None)
}

fn kernel_witness(datum: &QuiverDatum, state: &ScalingState) -> Result<Option<SubspaceWitness>> {
    let op = BlOperator::new(datum)?;
    Ok(kernel_candidates(&op, state)?.map(|w| {
        let (lhs, rhs) = subspace_dimensions(&op, &w.subspaces);
        SubspaceWitness {
            origin: WitnessOrigin::RankSearch,
            vertex: None,
            basis: None,
            subspaces: datum.quiver.sources.iter().cloned().zip(w.subspaces).collect(),
            lhs,
            rhs,
            verified: lhs > rhs,
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn ds_examples() {
        assert!(ds_distance(&fixtures::hoelder()).unwrap() < 1e-28);
        assert_eq!(ds_distance(&fixtures::kronecker(2.0)).unwrap(), 18.0);
        let z = fixtures::zero_rep();
        assert_eq!(ds_distance(&z).unwrap(), 2.0 * z.n_total() as f64);
    }

    #[test]
    fn kronecker_hand_trace() {
        let mut s = ScalingState::new(&fixtures::kronecker(2.0)).unwrap();
        source_normalize(&mut s, 1e-13).unwrap();
        assert!((s.matrices()[0][(0, 0)] - 1.0).abs() < 1e-15);
        assert!((s.source_block(0)[(0, 0)] - 2.0).abs() < 1e-15);
        assert!((s.logabs_character - 2f64.ln()).abs() < 1e-15);
        sink_normalize(&mut s, 1e-13).unwrap();
        assert!((s.matrices()[0][(0, 0)] - 1.0).abs() < 1e-15);
        assert!((s.sink_block(0)[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kronecker_capacity() {
        let r = run_scaling(&fixtures::kronecker(2.0), &ScalingConfig::default()).unwrap();
        assert_eq!(r.status, ScalingStatus::Converged);
        assert!(close(r.capacity.unwrap(), 4.0, 1e-14));
        assert!((r.a.get("v").unwrap()[(0, 0)] - 2.0).abs() < 1e-14);
        assert!((r.a.get("w").unwrap()[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn geometric_is_fixed() {
        for d in fixtures::geometric_data() {
            let r = run_scaling(&d, &ScalingConfig::default()).unwrap();
            assert_eq!(r.iterations, 0);
            assert_eq!(r.capacity, Some(1.0));
            let mut s = ScalingState::new(&d).unwrap();
            source_normalize(&mut s, 1e-13).unwrap();
            sink_normalize(&mut s, 1e-13).unwrap();
            for (a, b) in s.matrices().iter().zip(d.matrices().unwrap()) {
                assert!((a - b).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn zero_rep_gives_witness() {
        let d = fixtures::zero_rep();
        let mut s = ScalingState::new(&d).unwrap();
        let sb = source_normalize(&mut s, 1e-13).unwrap_err();
        assert_eq!(sb.kernel.ncols(), 2);
        let r = run_scaling(&d, &ScalingConfig::default()).unwrap();
        assert_eq!(r.status, ScalingStatus::ZeroWitness);
        assert_eq!(r.capacity, Some(0.0));
        let w = r.witness.unwrap();
        assert!(w.verified);
        assert_eq!((w.lhs, w.rhs), (2, 0));
    }

    #[test]
    fn sink_receiving_zero_is_singular() {
        // w2 only receives a zero arrow; the source marginal stays invertible
        let mut d = fixtures::star_with_gap();
        d.rep.insert("c", DMatrix::zeros(1, 1));
        d.rep.insert("b", DMatrix::from_element(1, 1, 2.0));
        let mut s = ScalingState::new(&d).unwrap();
        source_normalize(&mut s, 1e-13).unwrap();
        let sb = sink_normalize(&mut s, 1e-13).unwrap_err();
        assert_eq!(sb.vertex, "w2");
        let r = run_scaling(&d, &ScalingConfig::default()).unwrap();
        let w = r.witness.unwrap();
        assert_eq!(w.origin, WitnessOrigin::SinkCokernel);
        assert!(w.verified);
        let mut d2 = fixtures::common_kernel();
        d2.rep.insert("a2", DMatrix::zeros(1, 2));
        d2.rep.insert("a1", DMatrix::from_row_slice(1, 2, &[1.0, 1.0]));
        let r = run_scaling(&d2, &ScalingConfig::default()).unwrap();
        assert!(r.status.is_zero());
        assert!(r.witness.unwrap().verified);
    }

    #[test]
    fn rank_deficient_pair_decisions() {
        let d = fixtures::rank_deficient_pair();
        let (dec, r) = decide_semistable(&d, &ScalingConfig::default()).unwrap();
        assert_eq!(dec, Decision::No);
        let w = r.witness.unwrap();
        assert_eq!(w.origin, WitnessOrigin::SourceKernel);
        let basis = w.basis.unwrap();
        assert!(basis[(0, 0)].abs() < 1e-12 && (basis[(1, 0)].abs() - 1.0).abs() < 1e-12);
        assert_eq!((w.lhs, w.rhs), (1, 0));
        let rw = rank_witness_search(&d, &ScalingConfig::default()).unwrap().unwrap();
        assert!(rw.rank_x > rw.rank_image);
    }

    #[test]
    fn geometric_has_no_rank_witness() {
        for d in fixtures::geometric_data() {
            assert!(rank_witness_search(&d, &ScalingConfig::default()).unwrap().is_none());
            assert_eq!(decide_polystable(&d, &ScalingConfig::default()).unwrap().0, Decision::Yes);
        }
    }

    #[test]
    fn zero_rep_rank_witness_is_identity_rank() {
        let d = fixtures::zero_rep();
        let rw = rank_witness_search(&d, &ScalingConfig::default()).unwrap().unwrap();
        assert_eq!(rw.rank_image, 0);
        assert!(rw.rank_x >= 1);
    }

    #[test]
    fn config_rejects_inverted_tolerances() {
        let cfg = ScalingConfig {
            tol_ds: 1.0,
            ..Default::default()
        };
        assert!(run_scaling(&fixtures::kronecker(2.0), &cfg).is_err());
    }
}
