//! Bipartite quivers, their real representations and the change-of-base
//! group acting on them.

mod exponents;
mod reduce;

pub use exponents::{weight_from_exponents, ExponentTuple};
pub use reduce::{bipartite_reduce, AcyclicQuiver, ReduceOptions, DEFAULT_PATH_CAP};

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arrow {
    pub id: String,
    pub tail: String,
    pub head: String,
}

impl Arrow {
    pub fn new(id: &str, tail: &str, head: &str) -> Self {
        Self {
            id: id.to_owned(),
            tail: tail.to_owned(),
            head: head.to_owned(),
        }
    }
}

/// A quiver whose vertices split into sources `v_1..v_n` and sinks
/// `w_1..w_m`, with every arrow going from a source to a sink. Parallel
/// arrows are allowed; their input order fixes the Kraus indexing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteQuiver {
    pub sources: Vec<String>,
    pub sinks: Vec<String>,
    pub arrows: Vec<Arrow>,
}

impl BipartiteQuiver {
    pub fn new(sources: &[&str], sinks: &[&str], arrows: &[(&str, &str, &str)]) -> Self {
        Self {
            sources: sources.iter().map(|s| s.to_string()).collect(),
            sinks: sinks.iter().map(|s| s.to_string()).collect(),
            arrows: arrows.iter().map(|(id, t, h)| Arrow::new(id, t, h)).collect(),
        }
    }

    pub fn source_index(&self, id: &str) -> Option<usize> {
        self.sources.iter().position(|s| s == id)
    }

    pub fn sink_index(&self, id: &str) -> Option<usize> {
        self.sinks.iter().position(|s| s == id)
    }

    pub fn vertices(&self) -> impl Iterator<Item = &String> {
        self.sources.iter().chain(self.sinks.iter())
    }

    /// Connectivity of the underlying undirected graph.
    pub fn is_connected(&self) -> bool {
        let verts: Vec<&String> = self.vertices().collect();
        if verts.is_empty() {
            return false;
        }
        let index: BTreeMap<&str, usize> =
            verts.iter().enumerate().map(|(k, v)| (v.as_str(), k)).collect();
        let mut parent: Vec<usize> = (0..verts.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for a in &self.arrows {
            if let (Some(&t), Some(&h)) = (index.get(a.tail.as_str()), index.get(a.head.as_str())) {
                let (rt, rh) = (find(&mut parent, t), find(&mut parent, h));
                parent[rt] = rh;
            }
        }
        let root = find(&mut parent, 0);
        (0..verts.len()).all(|k| find(&mut parent, k) == root)
    }
}

/// Dimension vector `d`: vertex id to positive dimension.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimVector(pub BTreeMap<String, usize>);

impl DimVector {
    pub fn from_pairs(pairs: &[(&str, usize)]) -> Self {
        Self(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }

    pub fn get(&self, id: &str) -> usize {
        self.0.get(id).copied().unwrap_or(0)
    }

    /// Componentwise sum.
    pub fn add(&self, other: &DimVector) -> DimVector {
        let keys: BTreeSet<&String> = self.0.keys().chain(other.0.keys()).collect();
        DimVector(
            keys.into_iter()
                .map(|k| (k.clone(), self.get(k) + other.get(k)))
                .collect(),
        )
    }
}

/// Integral weight `σ`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Weight(pub BTreeMap<String, i64>);

impl Weight {
    pub fn from_pairs(pairs: &[(&str, i64)]) -> Self {
        Self(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }

    pub fn get(&self, id: &str) -> i64 {
        self.0.get(id).copied().unwrap_or(0)
    }

    /// σ·d in exact integer arithmetic.
    pub fn dot(&self, dims: &DimVector) -> i64 {
        self.0.iter().map(|(k, s)| s * dims.get(k) as i64).sum()
    }
}

/// Matrices `V(a)` of shape `d(head) × d(tail)`, keyed by arrow id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Representation(pub BTreeMap<String, DMatrix<f64>>);

impl Representation {
    pub fn get(&self, arrow: &str) -> Option<&DMatrix<f64>> {
        self.0.get(arrow)
    }

    pub fn insert(&mut self, arrow: &str, m: DMatrix<f64>) {
        self.0.insert(arrow.to_owned(), m);
    }

    pub fn scaled(&self, c: f64) -> Representation {
        Representation(self.0.iter().map(|(k, m)| (k.clone(), m * c)).collect())
    }

    /// Zero representation of the given shape.
    pub fn zeros(quiver: &BipartiteQuiver, dims: &DimVector) -> Representation {
        Representation(
            quiver
                .arrows
                .iter()
                .map(|a| (a.id.clone(), DMatrix::zeros(dims.get(&a.head), dims.get(&a.tail))))
                .collect(),
        )
    }

    pub fn norm(&self) -> f64 {
        self.0.values().map(|m| m.norm_squared()).sum::<f64>().sqrt()
    }
}

/// A quiver datum `(V, σ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuiverDatum {
    pub quiver: BipartiteQuiver,
    pub dims: DimVector,
    pub weight: Weight,
    pub rep: Representation,
}

/// Flat index view of a valid datum used by the numerical kernels.
#[derive(Clone, Debug)]
pub struct Layout {
    pub source_dims: Vec<usize>,
    pub sink_dims: Vec<usize>,
    pub sigma_plus: Vec<usize>,
    pub sigma_minus: Vec<usize>,
    /// `(source index, sink index)` of each arrow, in quiver arrow order.
    pub arrow_ends: Vec<(usize, usize)>,
    pub n_total: usize,
}

impl Layout {
    pub fn n_sources(&self) -> usize {
        self.source_dims.len()
    }

    pub fn n_sinks(&self) -> usize {
        self.sink_dims.len()
    }
}

impl QuiverDatum {
    pub fn new(quiver: BipartiteQuiver, dims: DimVector, weight: Weight, rep: Representation) -> Self {
        Self {
            quiver,
            dims,
            weight,
            rep,
        }
    }

    /// Fails with the list of violations if the datum is not valid.
    pub fn validated(self) -> Result<Self> {
        let report = validate_datum(&self);
        if report.is_valid() {
            Ok(self)
        } else {
            Err(Error::Invalid(report.violations))
        }
    }

    /// `N = Σ σ₊(v_i) d(v_i)`.
    pub fn n_total(&self) -> usize {
        self.quiver
            .sources
            .iter()
            .map(|v| self.weight.get(v).max(0) as usize * self.dims.get(v))
            .sum()
    }

    pub fn layout(&self) -> Result<Layout> {
        let q = &self.quiver;
        let mut sigma_plus = Vec::with_capacity(q.sources.len());
        for v in &q.sources {
            let s = self.weight.get(v);
            if s <= 0 {
                return Err(Error::WeightSign(format!("σ({v}) = {s} is not positive")));
            }
            sigma_plus.push(s as usize);
        }
        let mut sigma_minus = Vec::with_capacity(q.sinks.len());
        for w in &q.sinks {
            let s = self.weight.get(w);
            if s >= 0 {
                return Err(Error::WeightSign(format!("σ({w}) = {s} is not negative")));
            }
            sigma_minus.push((-s) as usize);
        }
        let mut arrow_ends = Vec::with_capacity(q.arrows.len());
        for a in &q.arrows {
            let i = q
                .source_index(&a.tail)
                .ok_or_else(|| Error::Shape(format!("arrow {} has tail {} which is not a source", a.id, a.tail)))?;
            let j = q
                .sink_index(&a.head)
                .ok_or_else(|| Error::Shape(format!("arrow {} has head {} which is not a sink", a.id, a.head)))?;
            arrow_ends.push((i, j));
        }
        let source_dims: Vec<usize> = q.sources.iter().map(|v| self.dims.get(v)).collect();
        let sink_dims: Vec<usize> = q.sinks.iter().map(|w| self.dims.get(w)).collect();
        let n_total = source_dims.iter().zip(&sigma_plus).map(|(d, s)| d * s).sum();
        Ok(Layout {
            source_dims,
            sink_dims,
            sigma_plus,
            sigma_minus,
            arrow_ends,
            n_total,
        })
    }

    /// Arrow matrices in quiver arrow order.
    pub fn matrices(&self) -> Result<Vec<DMatrix<f64>>> {
        self.quiver
            .arrows
            .iter()
            .map(|a| {
                self.rep
                    .get(&a.id)
                    .cloned()
                    .ok_or_else(|| Error::Shape(format!("no matrix for arrow {}", a.id)))
            })
            .collect()
    }

    /// Same quiver, dims and weight with new arrow matrices (arrow order).
    pub fn with_matrices(&self, mats: Vec<DMatrix<f64>>) -> QuiverDatum {
        let rep = Representation(
            self.quiver
                .arrows
                .iter()
                .zip(mats)
                .map(|(a, m)| (a.id.clone(), m))
                .collect(),
        );
        QuiverDatum {
            rep,
            ..self.clone()
        }
    }

    pub fn with_rep(&self, rep: Representation) -> QuiverDatum {
        QuiverDatum {
            rep,
            ..self.clone()
        }
    }
}

/// List of violated invariants; empty means valid.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, msg: String) {
        self.violations.push(msg);
    }
}

pub fn validate_datum(datum: &QuiverDatum) -> ValidationReport {
    let mut report = ValidationReport::default();
    let q = &datum.quiver;

    if q.sources.is_empty() {
        report.push("quiver has no source vertices".into());
    }
    if q.sinks.is_empty() {
        report.push("quiver has no sink vertices".into());
    }
    let mut seen = BTreeSet::new();
    for v in q.vertices() {
        if !seen.insert(v.as_str()) {
            report.push(format!("duplicate vertex id {v}"));
        }
    }
    let mut arrow_ids = BTreeSet::new();
    for a in &q.arrows {
        if !arrow_ids.insert(a.id.as_str()) {
            report.push(format!("duplicate arrow id {}", a.id));
        }
        let tail_ok = q.source_index(&a.tail).is_some();
        let head_ok = q.sink_index(&a.head).is_some();
        if !tail_ok || !head_ok {
            if seen.contains(a.tail.as_str()) && seen.contains(a.head.as_str()) {
                report.push(format!(
                    "not bipartite: arrow {} goes {} -> {} instead of source -> sink",
                    a.id, a.tail, a.head
                ));
            } else {
                report.push(format!("arrow {} references an unknown vertex", a.id));
            }
        }
    }
    if !q.sources.is_empty() && !q.sinks.is_empty() && !q.is_connected() {
        report.push("underlying graph of the quiver is not connected".into());
    }

    for v in q.vertices() {
        match datum.dims.0.get(v) {
            None => report.push(format!("missing dimension for vertex {v}")),
            Some(0) => report.push(format!("dimension of vertex {v} must be at least 1")),
            Some(_) => {}
        }
        if !datum.weight.0.contains_key(v) {
            report.push(format!("missing weight for vertex {v}"));
        }
    }
    for k in datum.dims.0.keys() {
        if !seen.contains(k.as_str()) {
            report.push(format!("dimension given for unknown vertex {k}"));
        }
    }
    for k in datum.weight.0.keys() {
        if !seen.contains(k.as_str()) {
            report.push(format!("weight given for unknown vertex {k}"));
        }
    }
    for v in &q.sources {
        let s = datum.weight.get(v);
        if datum.weight.0.contains_key(v) && s <= 0 {
            report.push(format!("σ must be positive on sources: σ({v}) = {s}"));
        }
    }
    for w in &q.sinks {
        let s = datum.weight.get(w);
        if datum.weight.0.contains_key(w) && s >= 0 {
            report.push(format!("σ must be negative on sinks: σ({w}) = {s}"));
        }
    }
    let dot = datum.weight.dot(&datum.dims);
    if dot != 0 {
        report.push(format!("σ·d ≠ 0 (σ·d = {dot})"));
    }

    for a in &q.arrows {
        match datum.rep.get(&a.id) {
            None => report.push(format!("missing matrix for arrow {}", a.id)),
            Some(m) => {
                let (r, c) = (datum.dims.get(&a.head), datum.dims.get(&a.tail));
                if m.nrows() != r || m.ncols() != c {
                    report.push(format!(
                        "matrix for arrow {} has shape {}x{}, expected {}x{}",
                        a.id,
                        m.nrows(),
                        m.ncols(),
                        r,
                        c
                    ));
                }
                if m.iter().any(|x| !x.is_finite()) {
                    report.push(format!("matrix for arrow {} has non-finite entries", a.id));
                }
            }
        }
    }
    for k in datum.rep.0.keys() {
        if !arrow_ids.contains(k.as_str()) {
            report.push(format!("matrix given for unknown arrow {k}"));
        }
    }
    report
}

/// Element `A = (A(x))` of the change-of-base group `GL(d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement(pub BTreeMap<String, DMatrix<f64>>);

impl GroupElement {
    pub fn identity(quiver: &BipartiteQuiver, dims: &DimVector) -> Self {
        Self(
            quiver
                .vertices()
                .map(|v| (v.clone(), DMatrix::identity(dims.get(v), dims.get(v))))
                .collect(),
        )
    }

    pub fn get(&self, vertex: &str) -> Option<&DMatrix<f64>> {
        self.0.get(vertex)
    }

    /// Blockwise product `self · other`.
    pub fn compose(&self, other: &GroupElement) -> Result<GroupElement> {
        let mut out = BTreeMap::new();
        for (k, a) in &self.0 {
            let b = other
                .0
                .get(k)
                .ok_or_else(|| Error::Shape(format!("vertex {k} missing in second factor")))?;
            if a.ncols() != b.nrows() {
                return Err(Error::Shape(format!("block size mismatch at vertex {k}")));
            }
            out.insert(k.clone(), a * b);
        }
        Ok(GroupElement(out))
    }

    /// Largest blockwise condition number.
    pub fn condition_number(&self) -> f64 {
        self.0
            .values()
            .map(linalg::condition_number)
            .fold(1.0, f64::max)
    }
}

/// `(A·V)(a) = A(ha) · V(a) · A(ta)⁻¹`.
pub fn act(a: &GroupElement, quiver: &BipartiteQuiver, rep: &Representation) -> Result<Representation> {
    let mut inverses: BTreeMap<&str, DMatrix<f64>> = BTreeMap::new();
    for v in &quiver.sources {
        let block = a
            .get(v)
            .ok_or_else(|| Error::Shape(format!("group element has no block at {v}")))?;
        let inv = block
            .clone()
            .try_inverse()
            .filter(|m| m.iter().all(|x| x.is_finite()))
            .ok_or_else(|| Error::Singular { vertex: v.clone() })?;
        inverses.insert(v.as_str(), inv);
    }
    let mut out = Representation::default();
    for arrow in &quiver.arrows {
        let v = rep
            .get(&arrow.id)
            .ok_or_else(|| Error::Shape(format!("no matrix for arrow {}", arrow.id)))?;
        let head = a
            .get(&arrow.head)
            .ok_or_else(|| Error::Shape(format!("group element has no block at {}", arrow.head)))?;
        let tail_inv = &inverses[arrow.tail.as_str()];
        if head.ncols() != v.nrows() || tail_inv.nrows() != v.ncols() {
            return Err(Error::Shape(format!("block sizes do not match arrow {}", arrow.id)));
        }
        out.insert(&arrow.id, head * v * tail_inv);
    }
    Ok(out)
}

/// `χ_σ(A) = Π_x det(A(x))^{σ(x)}`.
pub fn character(a: &GroupElement, weight: &Weight) -> Result<f64> {
    let mut acc = 1.0;
    for (v, &s) in &weight.0 {
        let block = a
            .get(v)
            .ok_or_else(|| Error::Shape(format!("group element has no block at {v}")))?;
        let det = block.determinant();
        if det == 0.0 && s < 0 {
            return Err(Error::Singular { vertex: v.clone() });
        }
        acc *= det.powi(s as i32);
    }
    Ok(acc)
}

/// `log |χ_σ(A)|`, computed blockwise to avoid overflow.
pub fn log_abs_character(a: &GroupElement, weight: &Weight) -> Result<f64> {
    let mut acc = 0.0;
    for (v, &s) in &weight.0 {
        let block = a
            .get(v)
            .ok_or_else(|| Error::Shape(format!("group element has no block at {v}")))?;
        let det = block.determinant();
        if det == 0.0 && s != 0 {
            return Err(Error::Singular { vertex: v.clone() });
        }
        if s != 0 {
            acc += s as f64 * det.abs().ln();
        }
    }
    Ok(acc)
}

/// Dimension of `End_Q(V) = {E : E(ha) V(a) = V(a) E(ta) ∀a}`.
pub fn endomorphism_dim(quiver: &BipartiteQuiver, dims: &DimVector, rep: &Representation) -> Result<usize> {
    let verts: Vec<&String> = quiver.vertices().collect();
    let mut offset = BTreeMap::new();
    let mut unknowns = 0;
    for v in &verts {
        offset.insert(v.as_str(), unknowns);
        unknowns += dims.get(v) * dims.get(v);
    }
    let equations: usize = quiver
        .arrows
        .iter()
        .map(|a| dims.get(&a.head) * dims.get(&a.tail))
        .sum();
    if equations == 0 {
        return Ok(unknowns);
    }
    let mut system = DMatrix::zeros(equations, unknowns);
    let mut row = 0;
    for a in &quiver.arrows {
        let v = rep
            .get(&a.id)
            .ok_or_else(|| Error::Shape(format!("no matrix for arrow {}", a.id)))?;
        let (dh, dt) = (dims.get(&a.head), dims.get(&a.tail));
        if v.shape() != (dh, dt) {
            return Err(Error::Shape(format!("matrix for arrow {} has wrong shape", a.id)));
        }
        // column-major vec: vec(E_h V) = (Vᵀ ⊗ I) vec(E_h), vec(V E_t) = (I ⊗ V) vec(E_t)
        let left = v.transpose().kronecker(&DMatrix::<f64>::identity(dh, dh));
        let right = DMatrix::<f64>::identity(dt, dt).kronecker(v);
        let (oh, ot) = (offset[a.head.as_str()], offset[a.tail.as_str()]);
        for r in 0..dh * dt {
            for c in 0..dh * dh {
                system[(row + r, oh + c)] += left[(r, c)];
            }
            for c in 0..dt * dt {
                system[(row + r, ot + c)] -= right[(r, c)];
            }
        }
        row += dh * dt;
    }
    Ok(linalg::nullity(&system, linalg::RANK_RTOL))
}

/// Block upper-triangular representation `V(a) = (V₁(a) X(a); 0 V₂(a))`.
pub fn direct_sum(
    quiver: &BipartiteQuiver,
    d1: &DimVector,
    v1: &Representation,
    d2: &DimVector,
    v2: &Representation,
    offdiag: Option<&Representation>,
) -> Result<(DimVector, Representation)> {
    let dims = d1.add(d2);
    let mut out = Representation::default();
    for a in &quiver.arrows {
        let (h1, t1) = (d1.get(&a.head), d1.get(&a.tail));
        let (h2, t2) = (d2.get(&a.head), d2.get(&a.tail));
        let m1 = v1
            .get(&a.id)
            .ok_or_else(|| Error::Shape(format!("first summand has no matrix for arrow {}", a.id)))?;
        let m2 = v2
            .get(&a.id)
            .ok_or_else(|| Error::Shape(format!("second summand has no matrix for arrow {}", a.id)))?;
        if m1.shape() != (h1, t1) || m2.shape() != (h2, t2) {
            return Err(Error::Shape(format!("summand shapes do not match arrow {}", a.id)));
        }
        let mut m = DMatrix::zeros(h1 + h2, t1 + t2);
        m.view_mut((0, 0), (h1, t1)).copy_from(m1);
        m.view_mut((h1, t1), (h2, t2)).copy_from(m2);
        if let Some(x) = offdiag.and_then(|x| x.get(&a.id)) {
            if x.shape() != (h1, t2) {
                return Err(Error::Shape(format!(
                    "off-diagonal block for arrow {} has shape {}x{}, expected {}x{}",
                    a.id,
                    x.nrows(),
                    x.ncols(),
                    h1,
                    t2
                )));
            }
            m.view_mut((0, t1), (h1, t2)).copy_from(x);
        }
        out.insert(&a.id, m);
    }
    Ok((dims, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    fn kronecker(value: f64, sigma_w: i64) -> QuiverDatum {
        let q = BipartiteQuiver::new(&["v"], &["w"], &[("a", "v", "w")]);
        let mut rep = Representation::default();
        rep.insert("a", m(1, 1, &[value]));
        QuiverDatum::new(
            q,
            DimVector::from_pairs(&[("v", 1), ("w", 1)]),
            Weight::from_pairs(&[("v", 1), ("w", sigma_w)]),
            rep,
        )
    }

    #[test]
    fn kronecker_is_valid() {
        assert!(validate_datum(&kronecker(2.0, -1)).is_valid());
    }

    #[test]
    fn unbalanced_weight_is_reported() {
        let r = validate_datum(&kronecker(2.0, -2));
        assert_eq!(r.violations.len(), 1);
        assert!(r.violations[0].contains("σ·d ≠ 0"));
    }

    #[test]
    fn arrow_into_source_is_not_bipartite() {
        let mut d = kronecker(2.0, -1);
        d.quiver.arrows[0] = Arrow::new("a", "w", "v");
        let r = validate_datum(&d);
        assert!(r.violations.iter().any(|v| v.contains("not bipartite")), "{r:?}");
    }

    #[test]
    fn disconnected_and_misshapen_are_reported() {
        let q = BipartiteQuiver::new(&["v", "u"], &["w", "x"], &[("a", "v", "w"), ("b", "u", "x")]);
        let mut rep = Representation::default();
        rep.insert("a", m(1, 1, &[1.0]));
        rep.insert("b", m(2, 1, &[1.0, 0.0]));
        let d = QuiverDatum::new(
            q,
            DimVector::from_pairs(&[("v", 1), ("u", 1), ("w", 1), ("x", 1)]),
            Weight::from_pairs(&[("v", 1), ("u", 1), ("w", -1), ("x", -1)]),
            rep,
        );
        let r = validate_datum(&d);
        assert!(r.violations.iter().any(|v| v.contains("not connected")));
        assert!(r.violations.iter().any(|v| v.contains("arrow b has shape 2x1")));
    }

    #[test]
    fn act_on_kronecker() {
        let d = kronecker(5.0, -1);
        let mut a = GroupElement::identity(&d.quiver, &d.dims);
        a.0.insert("v".into(), m(1, 1, &[2.0]));
        let out = act(&a, &d.quiver, &d.rep).unwrap();
        assert_eq!(out.get("a").unwrap()[(0, 0)], 2.5);
        let same = act(&GroupElement::identity(&d.quiver, &d.dims), &d.quiver, &d.rep).unwrap();
        assert_eq!(same, d.rep);
    }

    #[test]
    fn act_rejects_singular_block() {
        let d = kronecker(5.0, -1);
        let mut a = GroupElement::identity(&d.quiver, &d.dims);
        a.0.insert("v".into(), m(1, 1, &[0.0]));
        assert!(matches!(act(&a, &d.quiver, &d.rep), Err(Error::Singular { .. })));
    }

    #[test]
    fn character_values() {
        let d = kronecker(5.0, -1);
        let mut a = GroupElement::identity(&d.quiver, &d.dims);
        assert_eq!(character(&a, &d.weight).unwrap(), 1.0);
        a.0.insert("v".into(), m(1, 1, &[2.0]));
        assert_eq!(character(&a, &d.weight).unwrap(), 2.0);
        assert!((log_abs_character(&a, &d.weight).unwrap() - 2f64.ln()).abs() < 1e-15);
        a.0.insert("w".into(), m(1, 1, &[0.0]));
        assert!(character(&a, &d.weight).is_err());
    }

    #[test]
    fn endomorphisms_of_kronecker() {
        let d = kronecker(1.0, -1);
        assert_eq!(endomorphism_dim(&d.quiver, &d.dims, &d.rep).unwrap(), 1);
        let (d2, vv) = direct_sum(&d.quiver, &d.dims, &d.rep, &d.dims, &d.rep, None).unwrap();
        assert_eq!(endomorphism_dim(&d.quiver, &d2, &vv).unwrap(), 4);
        let z = kronecker(0.0, -1);
        assert_eq!(endomorphism_dim(&z.quiver, &z.dims, &z.rep).unwrap(), 2);
    }

    #[test]
    fn direct_sum_blocks() {
        let d = kronecker(2.0, -1);
        let e = kronecker(3.0, -1);
        let (dims, rep) = direct_sum(&d.quiver, &d.dims, &d.rep, &e.dims, &e.rep, None).unwrap();
        assert_eq!(rep.get("a").unwrap(), &m(2, 2, &[2.0, 0.0, 0.0, 3.0]));
        assert_eq!(dims, DimVector::from_pairs(&[("v", 2), ("w", 2)]));
        let mut x = Representation::default();
        x.insert("a", m(1, 1, &[7.0]));
        let (_, rep) = direct_sum(&d.quiver, &d.dims, &d.rep, &e.dims, &e.rep, Some(&x)).unwrap();
        assert_eq!(rep.get("a").unwrap(), &m(2, 2, &[2.0, 7.0, 0.0, 3.0]));
        x.insert("a", m(2, 1, &[7.0, 1.0]));
        assert!(direct_sum(&d.quiver, &d.dims, &d.rep, &e.dims, &e.rep, Some(&x)).is_err());
    }

    #[test]
    fn n_total_is_balanced() {
        let d = kronecker(2.0, -1);
        assert_eq!(d.n_total(), 1);
        assert_eq!(d.layout().unwrap().n_total, 1);
    }
}
