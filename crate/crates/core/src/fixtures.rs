//! Built-in instances: hand-checkable data, geometric data and seeded
//! random generators shared by the self-test and the test suites.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DMatrix;
use rand::Rng;

use crate::bl::BLDatum;
use crate::quiver::{
    act, log_abs_character, BipartiteQuiver, DimVector, ExponentTuple, GroupElement, QuiverDatum, Representation,
    Weight,
};

fn m(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, data)
}

fn rotation(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    m(2, 2, &[c, -s, s, c])
}

fn datum(
    sources: &[(&str, usize, i64)],
    sinks: &[(&str, usize, i64)],
    arrows: &[(&str, &str, &str, DMatrix<f64>)],
) -> QuiverDatum {
    let src: Vec<&str> = sources.iter().map(|s| s.0).collect();
    let snk: Vec<&str> = sinks.iter().map(|s| s.0).collect();
    let arr: Vec<(&str, &str, &str)> = arrows.iter().map(|a| (a.0, a.1, a.2)).collect();
    let mut dims = DimVector::default();
    let mut weight = Weight::default();
    for &(id, d, s) in sources.iter().chain(sinks) {
        dims.0.insert(id.to_string(), d);
        weight.0.insert(id.to_string(), s);
    }
    let mut rep = Representation::default();
    for a in arrows {
        rep.insert(a.0, a.3.clone());
    }
    QuiverDatum::new(BipartiteQuiver::new(&src, &snk, &arr), dims, weight, rep)
}

/// `v → w`, `d = (1, 1)`, `σ = (1, −1)`, `V(a) = [value]`.
pub fn kronecker(value: f64) -> QuiverDatum {
    datum(&[("v", 1, 1)], &[("w", 1, -1)], &[("a", "v", "w", m(1, 1, &[value]))])
}

/// Single arrow between two 2-dimensional spaces carrying the zero matrix.
pub fn zero_rep() -> QuiverDatum {
    datum(&[("v", 2, 1)], &[("w", 2, -1)], &[("a", "v", "w", DMatrix::zeros(2, 2))])
}

/// `d = (2; 1)`, `σ = (1, −2)`, `V(a) = [1 0]`: `e₂` is killed.
pub fn rank_deficient_pair() -> QuiverDatum {
    datum(&[("v", 2, 1)], &[("w", 1, -2)], &[("a", "v", "w", m(1, 2, &[1.0, 0.0]))])
}

/// Two-subspace datum `d = (2; 1, 1)` with `V₁ = V₂ = [1 0]`.
pub fn common_kernel() -> QuiverDatum {
    datum(
        &[("v", 2, 1)],
        &[("w1", 1, -1), ("w2", 1, -1)],
        &[
            ("a1", "v", "w1", m(1, 2, &[1.0, 0.0])),
            ("a2", "v", "w2", m(1, 2, &[1.0, 0.0])),
        ],
    )
}

/// Two sources and two sinks with no arrow `v1 → w2`.
pub fn star_with_gap() -> QuiverDatum {
    datum(
        &[("v1", 1, 1), ("v2", 1, 1)],
        &[("w1", 1, -1), ("w2", 1, -1)],
        &[
            ("a", "v1", "w1", m(1, 1, &[1.0])),
            ("b", "v2", "w1", m(1, 1, &[2.0])),
            ("c", "v2", "w2", m(1, 1, &[3.0])),
        ],
    )
}

/// Coordinate rows of `ℝ³` on the 3-subspace quiver, `σ = (1; −1, −1, −1)`.
pub fn hoelder() -> QuiverDatum {
    datum(
        &[("v", 3, 1)],
        &[("w1", 1, -1), ("w2", 1, -1), ("w3", 1, -1)],
        &[
            ("a1", "v", "w1", m(1, 3, &[1.0, 0.0, 0.0])),
            ("a2", "v", "w2", m(1, 3, &[0.0, 1.0, 0.0])),
            ("a3", "v", "w3", m(1, 3, &[0.0, 0.0, 1.0])),
        ],
    )
}

/// `d = (2; 2, 2)`, `σ = (2; −1, −1)`, `V₁ = V₂ = (1/√2)·I`.
pub fn two_subspace_geometric() -> QuiverDatum {
    let half = DMatrix::identity(2, 2) * FRAC_1_SQRT_2;
    datum(
        &[("v", 2, 2)],
        &[("w1", 2, -1), ("w2", 2, -1)],
        &[("a1", "v", "w1", half.clone()), ("a2", "v", "w2", half)],
    )
}

/// `l` parallel arrows `v → w` carrying rotations scaled by `1/√l`.
pub fn generalized_kronecker(l: usize) -> QuiverDatum {
    let scale = 1.0 / (l as f64).sqrt();
    let ids: Vec<String> = (1..=l).map(|k| format!("a{k}")).collect();
    let arrows: Vec<(&str, &str, &str, DMatrix<f64>)> = ids
        .iter()
        .enumerate()
        .map(|(k, id)| (id.as_str(), "v", "w", rotation(0.7 * k as f64 + 0.2) * scale))
        .collect();
    datum(&[("v", 2, 1)], &[("w", 2, -1)], &arrows)
}

/// Tight frame of `k` unit directions in the plane (angles `jπ/k`), each
/// row scaled so that `Σ σ₋ VᵀV = I`; `σ = (k/2; −1, …)`.
pub fn planar_frame(k: usize) -> QuiverDatum {
    assert!(k.is_multiple_of(2), "frame size must be even");
    let s_plus = (k / 2) as i64;
    let scale = (2.0 / k as f64).sqrt();
    let ids: Vec<(String, String)> = (1..=k).map(|j| (format!("w{j}"), format!("a{j}"))).collect();
    let sinks: Vec<(&str, usize, i64)> = ids.iter().map(|(w, _)| (w.as_str(), 1, -1)).collect();
    let arrows: Vec<(&str, &str, &str, DMatrix<f64>)> = ids
        .iter()
        .enumerate()
        .map(|(j, (w, a))| {
            let t = j as f64 * PI / k as f64;
            (a.as_str(), "v", w.as_str(), m(1, 2, &[scale * t.cos(), scale * t.sin()]))
        })
        .collect();
    datum(&[("v", 2, s_plus)], &sinks, &arrows)
}

/// Complete bipartite quiver on two sources and two sinks of dimension 2,
/// `σ = (1, 1; −1, −1)`, arrows rotations scaled by `1/√2`.
pub fn square_geometric() -> QuiverDatum {
    let r = |t: f64| rotation(t) * FRAC_1_SQRT_2;
    datum(
        &[("v1", 2, 1), ("v2", 2, 1)],
        &[("w1", 2, -1), ("w2", 2, -1)],
        &[
            ("a11", "v1", "w1", r(0.3)),
            ("a12", "v1", "w2", r(1.1)),
            ("a21", "v2", "w1", r(-0.4)),
            ("a22", "v2", "w2", r(2.5)),
        ],
    )
}

/// Orthogonal change of base keeps a datum geometric.
pub fn rotated(d: &QuiverDatum, seed: f64) -> QuiverDatum {
    let mut g = GroupElement::identity(&d.quiver, &d.dims);
    for (k, (v, block)) in g.0.iter_mut().enumerate() {
        let n = d.dims.get(v);
        *block = orthogonal(n, seed + 0.37 * k as f64);
    }
    let rep = act(&g, &d.quiver, &d.rep).expect("orthogonal blocks are invertible");
    d.with_rep(rep)
}

/// Deterministic orthogonal matrix built from plane rotations.
fn orthogonal(n: usize, seed: f64) -> DMatrix<f64> {
    let mut q = DMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let t = seed * (1.0 + i as f64) + 0.61 * j as f64;
            let (s, c) = t.sin_cos();
            let mut g = DMatrix::identity(n, n);
            g[(i, i)] = c;
            g[(j, j)] = c;
            g[(i, j)] = -s;
            g[(j, i)] = s;
            q = g * q;
        }
    }
    q
}

/// Ten geometric data (doubly stochastic BL operators).
pub fn geometric_data() -> Vec<QuiverDatum> {
    vec![
        kronecker(1.0),
        two_subspace_geometric(),
        hoelder(),
        generalized_kronecker(3),
        planar_frame(4),
        planar_frame(6),
        square_geometric(),
        rotated(&two_subspace_geometric(), 0.9),
        rotated(&generalized_kronecker(2), 1.7),
        rotated(&square_geometric(), 0.4),
    ]
}

fn bl_from(d: QuiverDatum, p: &[&str]) -> BLDatum {
    BLDatum {
        quiver: d.quiver,
        dims: d.dims,
        rep: d.rep,
        exponents: ExponentTuple::parse(p).expect("literal exponents"),
    }
}

/// Hölder's inequality on `ℝ³`: coordinate rows with `p = (1, 1, 1)`.
pub fn hoelder_bl() -> BLDatum {
    bl_from(hoelder(), &["1", "1", "1"])
}

/// `V₁ = (1 0)`, `V₂ = (0 1)`, `V₃ = (1 1)/√2` with `p = (2/3, 2/3, 2/3)`.
pub fn rank_one_triple_bl() -> BLDatum {
    let d = datum(
        &[("v", 2, 3)],
        &[("w1", 1, -2), ("w2", 1, -2), ("w3", 1, -2)],
        &[
            ("a1", "v", "w1", m(1, 2, &[1.0, 0.0])),
            ("a2", "v", "w2", m(1, 2, &[0.0, 1.0])),
            ("a3", "v", "w3", m(1, 2, &[FRAC_1_SQRT_2, FRAC_1_SQRT_2])),
        ],
    );
    bl_from(d, &["2/3", "2/3", "2/3"])
}

pub fn zero_bl() -> BLDatum {
    bl_from(zero_rep(), &["1"])
}

pub fn common_kernel_bl() -> BLDatum {
    bl_from(common_kernel(), &["1", "1"])
}

/// Two sources and two sinks of dimension 5, all four arrows present,
/// `σ = (4, 4; −4, −4)`, so `N = 40`. Entries uniform in `[−2, 2]`.
pub fn large_square<R: Rng>(rng: &mut R) -> QuiverDatum {
    let mut r = || DMatrix::from_fn(5, 5, |_, _| rng.random_range(-2.0..=2.0));
    datum(
        &[("v1", 5, 4), ("v2", 5, 4)],
        &[("w1", 5, -4), ("w2", 5, -4)],
        &[
            ("a11", "v1", "w1", r()),
            ("a12", "v1", "w2", r()),
            ("a21", "v2", "w1", r()),
            ("a22", "v2", "w2", r()),
        ],
    )
}

/// Bounds for random instances.
#[derive(Clone, Copy, Debug)]
pub struct RandomSpec {
    pub max_sources: usize,
    pub max_sinks: usize,
    pub max_dim: usize,
    pub max_sigma: usize,
    pub max_n: usize,
    pub max_parallel: usize,
    pub entry_bound: f64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        Self {
            max_sources: 3,
            max_sinks: 3,
            max_dim: 3,
            max_sigma: 3,
            max_n: 12,
            max_parallel: 2,
            entry_bound: 2.0,
        }
    }
}

#[derive(Clone, Debug)]
struct Shape {
    sigma_plus: Vec<usize>,
    sigma_minus: Vec<usize>,
    /// multiplicity of arrows for each `(i, j)`
    arrows: Vec<Vec<usize>>,
}

impl Shape {
    fn connected(&self) -> bool {
        let n = self.sigma_plus.len();
        let m = self.sigma_minus.len();
        let mut parent: Vec<usize> = (0..n + m).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut x = x;
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for i in 0..n {
            for j in 0..m {
                if self.arrows[i][j] > 0 {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, n + j));
                    parent[a] = b;
                }
            }
        }
        let root = find(&mut parent, 0);
        (0..n + m).all(|x| find(&mut parent, x) == root)
    }
}

fn random_shape<R: Rng>(rng: &mut R, spec: &RandomSpec) -> Shape {
    loop {
        let n = rng.random_range(1..=spec.max_sources);
        let m = rng.random_range(1..=spec.max_sinks);
        let shape = Shape {
            sigma_plus: (0..n).map(|_| rng.random_range(1..=spec.max_sigma)).collect(),
            sigma_minus: (0..m).map(|_| rng.random_range(1..=spec.max_sigma)).collect(),
            arrows: (0..n)
                .map(|_| {
                    (0..m)
                        .map(|_| {
                            if rng.random_bool(0.25) {
                                0
                            } else {
                                rng.random_range(1..=spec.max_parallel)
                            }
                        })
                        .collect()
                })
                .collect(),
        };
        if shape.connected() {
            return shape;
        }
    }
}

/// Dimension vectors with `Σ σ₊ d(v) = Σ σ₋ d(w) ≤ max_n`, by rejection.
fn balanced_dims<R: Rng>(rng: &mut R, shape: &Shape, spec: &RandomSpec, tries: usize) -> Option<(Vec<usize>, Vec<usize>)> {
    for _ in 0..tries {
        let dv: Vec<usize> = shape.sigma_plus.iter().map(|_| rng.random_range(1..=spec.max_dim)).collect();
        let dw: Vec<usize> = shape.sigma_minus.iter().map(|_| rng.random_range(1..=spec.max_dim)).collect();
        let lhs: usize = dv.iter().zip(&shape.sigma_plus).map(|(d, s)| d * s).sum();
        let rhs: usize = dw.iter().zip(&shape.sigma_minus).map(|(d, s)| d * s).sum();
        if lhs == rhs && lhs <= spec.max_n {
            return Some((dv, dw));
        }
    }
    None
}

fn build<R: Rng>(rng: &mut R, shape: &Shape, dv: &[usize], dw: &[usize], bound: f64) -> QuiverDatum {
    let sources: Vec<String> = (1..=dv.len()).map(|i| format!("v{i}")).collect();
    let sinks: Vec<String> = (1..=dw.len()).map(|j| format!("w{j}")).collect();
    let mut dims = DimVector::default();
    let mut weight = Weight::default();
    for (i, v) in sources.iter().enumerate() {
        dims.0.insert(v.clone(), dv[i]);
        weight.0.insert(v.clone(), shape.sigma_plus[i] as i64);
    }
    for (j, w) in sinks.iter().enumerate() {
        dims.0.insert(w.clone(), dw[j]);
        weight.0.insert(w.clone(), -(shape.sigma_minus[j] as i64));
    }
    let mut arrows = Vec::new();
    let mut rep = Representation::default();
    for (i, v) in sources.iter().enumerate() {
        for (j, w) in sinks.iter().enumerate() {
            for k in 0..shape.arrows[i][j] {
                let id = format!("a{}{}{}", i + 1, j + 1, (b'a' + k as u8) as char);
                rep.insert(&id, DMatrix::from_fn(dw[j], dv[i], |_, _| rng.random_range(-bound..=bound)));
                arrows.push(crate::quiver::Arrow::new(&id, v, w));
            }
        }
    }
    QuiverDatum::new(
        BipartiteQuiver {
            sources,
            sinks,
            arrows,
        },
        dims,
        weight,
        rep,
    )
}

/// A random valid datum within `spec`. Semi-stability is not guaranteed.
pub fn random_datum<R: Rng>(rng: &mut R, spec: &RandomSpec) -> QuiverDatum {
    loop {
        let shape = random_shape(rng, spec);
        if let Some((dv, dw)) = balanced_dims(rng, &shape, spec, 64) {
            return build(rng, &shape, &dv, &dw, spec.entry_bound);
        }
    }
}

/// A block upper-triangular datum `(V₁ X; 0 V₂)` with `σ·d₁ = σ·d₂ = 0`,
/// returned together with `d₁`. Each block is bounded by `spec`.
pub fn random_block_triangular<R: Rng>(rng: &mut R, spec: &RandomSpec) -> (QuiverDatum, DimVector) {
    loop {
        let shape = random_shape(rng, spec);
        let Some((dv1, dw1)) = balanced_dims(rng, &shape, spec, 64) else {
            continue;
        };
        let Some((dv2, dw2)) = balanced_dims(rng, &shape, spec, 64) else {
            continue;
        };
        let b = spec.entry_bound;
        let v1 = build(rng, &shape, &dv1, &dw1, b);
        let v2 = build(rng, &shape, &dv2, &dw2, b);
        let mut x = Representation::default();
        for a in &v1.quiver.arrows {
            let (h1, t2) = (v1.dims.get(&a.head), v2.dims.get(&a.tail));
            x.insert(&a.id, DMatrix::from_fn(h1, t2, |_, _| rng.random_range(-b..=b)));
        }
        let (dims, rep) = crate::quiver::direct_sum(&v1.quiver, &v1.dims, &v1.rep, &v2.dims, &v2.rep, Some(&x))
            .expect("blocks built on the same quiver");
        let d1 = v1.dims.clone();
        return (
            QuiverDatum {
                dims,
                rep,
                ..v1
            },
            d1,
        );
    }
}

/// Random well-conditioned group element `I + 0.3·G` on every vertex.
pub fn random_group_element<R: Rng>(rng: &mut R, d: &QuiverDatum) -> GroupElement {
    let mut g = GroupElement::identity(&d.quiver, &d.dims);
    for block in g.0.values_mut() {
        let n = block.nrows();
        *block += DMatrix::from_fn(n, n, |_, _| 0.3 * rng.random_range(-1.0..=1.0));
    }
    g
}

/// Random element of `GL(d)_σ`: the first source block is rescaled so
/// that `|χ_σ| = 1`, and a sign flip fixes `χ_σ = 1` when possible.
pub fn random_character_free<R: Rng>(rng: &mut R, d: &QuiverDatum) -> GroupElement {
    let mut g = random_group_element(rng, d);
    let log_chi = log_abs_character(&g, &d.weight).expect("blocks near identity");
    let v0 = d.quiver.sources[0].clone();
    let s = d.weight.get(&v0) as f64;
    let dim = d.dims.get(&v0) as f64;
    let c = (-log_chi / (s * dim)).exp();
    let block = g.0.get_mut(&v0).expect("source block");
    *block *= c;
    g
}

/// A random member of a family whose generic member is semi-stable.
///
/// Even draws: `k` sources and `k` sinks of a common dimension, every pair
/// joined, one common weight. Any subrepresentation maps into each sink with
/// image at least as large as its largest source part, since the blocks are
/// invertible. Odd draws: `m > d` generic vectors in `ℝ^d` as rank-one maps,
/// `σ = (m; −d, …, −d)`; no nonzero subspace is killed by all of them.
pub fn random_generic_semistable<R: Rng>(rng: &mut R) -> QuiverDatum {
    let bound = 2.0;
    if rng.random_bool(0.5) {
        let k = rng.random_range(1..=2usize);
        let dim = rng.random_range(1..=3usize);
        let s = rng.random_range(1..=2i64);
        let shape = Shape {
            sigma_plus: vec![s as usize; k],
            sigma_minus: vec![s as usize; k],
            arrows: vec![vec![1; k]; k],
        };
        build(rng, &shape, &vec![dim; k], &vec![dim; k], bound)
    } else {
        let d = rng.random_range(2..=3usize);
        let m = rng.random_range(d + 1..=4usize);
        let shape = Shape {
            sigma_plus: vec![m],
            sigma_minus: vec![d; m],
            arrows: vec![vec![1; m]],
        };
        build(rng, &shape, &[d], &vec![1; m], bound)
    }
}
