//! The blow-up bookkeeping behind the Brascamp-Lieb operator `T_{V,σ}` and
//! its evaluation.
//!
//! An `N × N` matrix fed to `T` is read as an `M × M` block matrix whose
//! `q`-th diagonal block (for `q ∈ I⁻_j`) has size `d(w_j)`; the image is an
//! `M' × M'` block matrix with `d(v_i)`-sized blocks for `r ∈ I⁺_i`. The
//! adjoint swaps the two layouts.
//!
//! The structured evaluations only touch diagonal blocks and never build a
//! Kraus operator. [`BlOperator::kraus_dense`] materializes the Kraus
//! operators and is kept as the reference the structured path is tested
//! against.

use std::ops::Range;

use log::warn;
use nalgebra::{DMatrix, DMatrixView};

use crate::error::{Error, Result};
use crate::linalg;
use crate::quiver::{Layout, QuiverDatum};

const ASYMMETRY_WARN: f64 = 1e-10;

/// One element `(i, j, a, q, r)` of the index set `S`. `arrow` is `None`
/// for the placeholder `0_{ij}` used when there is no arrow `v_i → w_j`.
/// `q` and `r` are 0-based block indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KrausIndex {
    pub source: usize,
    pub sink: usize,
    pub arrow: Option<usize>,
    pub q: usize,
    pub r: usize,
}

/// Interval bookkeeping for the blow-up. Intervals are 0-based half-open,
/// so `I⁻_j = {Σ_{k<j} σ₋(w_k) + 1, …, Σ_{k≤j} σ₋(w_k)}` becomes
/// `i_minus[j] = Σ_{k<j} σ₋(w_k) .. Σ_{k≤j} σ₋(w_k)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSets {
    pub i_plus: Vec<Range<usize>>,
    pub i_minus: Vec<Range<usize>>,
    pub s: Vec<KrausIndex>,
    pub n_total: usize,
    /// `M = Σ σ₋(w_j)`, the number of block rows.
    pub m: usize,
    /// `M' = Σ σ₊(v_i)`, the number of block columns.
    pub m_prime: usize,
}

fn prefix_intervals(counts: &[usize]) -> Vec<Range<usize>> {
    let mut start = 0;
    counts
        .iter()
        .map(|&c| {
            let r = start..start + c;
            start += c;
            r
        })
        .collect()
}

impl IndexSets {
    pub fn new(layout: &Layout) -> Self {
        let i_plus = prefix_intervals(&layout.sigma_plus);
        let i_minus = prefix_intervals(&layout.sigma_minus);
        let mut s = Vec::new();
        for i in 0..layout.n_sources() {
            for j in 0..layout.n_sinks() {
                let arrows: Vec<Option<usize>> = {
                    let found: Vec<Option<usize>> = layout
                        .arrow_ends
                        .iter()
                        .enumerate()
                        .filter(|(_, &e)| e == (i, j))
                        .map(|(k, _)| Some(k))
                        .collect();
                    if found.is_empty() {
                        vec![None]
                    } else {
                        found
                    }
                };
                for a in arrows {
                    for q in i_minus[j].clone() {
                        for r in i_plus[i].clone() {
                            s.push(KrausIndex {
                                source: i,
                                sink: j,
                                arrow: a,
                                q,
                                r,
                            });
                        }
                    }
                }
            }
        }
        Self {
            m: layout.sigma_minus.iter().sum(),
            m_prime: layout.sigma_plus.iter().sum(),
            i_plus,
            i_minus,
            s,
            n_total: layout.n_total,
        }
    }
}

pub fn index_sets(datum: &QuiverDatum) -> Result<IndexSets> {
    Ok(IndexSets::new(&datum.layout()?))
}

/// An `N × N` matrix with an explicit block partition of rows and columns.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix {
    pub data: DMatrix<f64>,
    row_sizes: Vec<usize>,
    col_sizes: Vec<usize>,
    row_offsets: Vec<usize>,
    col_offsets: Vec<usize>,
}

fn offsets(sizes: &[usize]) -> Vec<usize> {
    let mut acc = 0;
    sizes
        .iter()
        .map(|&s| {
            let o = acc;
            acc += s;
            o
        })
        .collect()
}

impl BlockMatrix {
    pub fn zeros(row_sizes: Vec<usize>, col_sizes: Vec<usize>) -> Self {
        let rows = row_sizes.iter().sum();
        let cols = col_sizes.iter().sum();
        Self {
            data: DMatrix::zeros(rows, cols),
            row_offsets: offsets(&row_sizes),
            col_offsets: offsets(&col_sizes),
            row_sizes,
            col_sizes,
        }
    }

    pub fn block(&self, q: usize, r: usize) -> DMatrixView<'_, f64> {
        self.data.view(
            (self.row_offsets[q], self.col_offsets[r]),
            (self.row_sizes[q], self.col_sizes[r]),
        )
    }

    pub fn set_block(&mut self, q: usize, r: usize, value: &DMatrix<f64>) {
        self.data
            .view_mut(
                (self.row_offsets[q], self.col_offsets[r]),
                (self.row_sizes[q], self.col_sizes[r]),
            )
            .copy_from(value);
    }

    pub fn row_blocks(&self) -> usize {
        self.row_sizes.len()
    }

    pub fn col_blocks(&self) -> usize {
        self.col_sizes.len()
    }
}

/// The operator `T_{V,σ}` of a datum, evaluated blockwise.
#[derive(Clone, Debug)]
pub struct BlOperator {
    layout: Layout,
    mats: Vec<DMatrix<f64>>,
    sets: IndexSets,
    /// Block sizes of the sink-side layout (`q = 0..M`).
    sink_blocks: Vec<usize>,
    /// Block sizes of the source-side layout (`r = 0..M'`).
    source_blocks: Vec<usize>,
}

impl BlOperator {
    pub fn new(datum: &QuiverDatum) -> Result<Self> {
        let layout = datum.layout()?;
        let mats = datum.matrices()?;
        for (k, m) in mats.iter().enumerate() {
            let (i, j) = layout.arrow_ends[k];
            if m.shape() != (layout.sink_dims[j], layout.source_dims[i]) {
                return Err(Error::Shape(format!(
                    "matrix for arrow {} has wrong shape",
                    datum.quiver.arrows[k].id
                )));
            }
        }
        Ok(Self::from_parts(layout, mats))
    }

    pub fn from_parts(layout: Layout, mats: Vec<DMatrix<f64>>) -> Self {
        let sets = IndexSets::new(&layout);
        let sink_blocks = sets
            .i_minus
            .iter()
            .enumerate()
            .flat_map(|(j, r)| std::iter::repeat_n(layout.sink_dims[j], r.len()))
            .collect();
        let source_blocks = sets
            .i_plus
            .iter()
            .enumerate()
            .flat_map(|(i, r)| std::iter::repeat_n(layout.source_dims[i], r.len()))
            .collect();
        Self {
            layout,
            mats,
            sets,
            sink_blocks,
            source_blocks,
        }
    }

    pub fn index_sets(&self) -> &IndexSets {
        &self.sets
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn n_total(&self) -> usize {
        self.layout.n_total
    }

    fn checked_input(&self, x: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
        let n = self.layout.n_total;
        if x.shape() != (n, n) {
            return Err(Error::Shape(format!(
                "{what} expects a {n}x{n} matrix, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        let skew = linalg::asymmetry(x);
        if skew > ASYMMETRY_WARN {
            warn!("{what}: input asymmetric by {skew:e}, symmetrizing");
        }
        Ok(linalg::symmetrize(x))
    }

    /// `Σ_{q∈I⁻_j} X_qq` for every sink `j`.
    fn sink_sums(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut offset = 0;
        let mut sums = Vec::with_capacity(self.layout.n_sinks());
        for (j, range) in self.sets.i_minus.iter().enumerate() {
            let d = self.layout.sink_dims[j];
            let mut acc = DMatrix::zeros(d, d);
            for _ in range.clone() {
                acc += x.view((offset, offset), (d, d));
                offset += d;
            }
            sums.push(acc);
        }
        sums
    }

    /// `Σ_{r∈I⁺_i} X_rr` for every source `i`.
    fn source_sums(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut offset = 0;
        let mut sums = Vec::with_capacity(self.layout.n_sources());
        for (i, range) in self.sets.i_plus.iter().enumerate() {
            let d = self.layout.source_dims[i];
            let mut acc = DMatrix::zeros(d, d);
            for _ in range.clone() {
                acc += x.view((offset, offset), (d, d));
                offset += d;
            }
            sums.push(acc);
        }
        sums
    }

    /// Structured `T(X)`: block-diagonal with `(r,r)` block
    /// `Σ_j Σ_{a∈A_ij} V(a)ᵀ (Σ_{q∈I⁻_j} X_qq) V(a)` for `r ∈ I⁺_i`.
    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let x = self.checked_input(x, "apply_T")?;
        let sums = self.sink_sums(&x);
        let per_source = self.source_images(&sums);
        Ok(self.replicate(&per_source, &self.sets.i_plus))
    }

    /// Structured `T*(X)`: block-diagonal with `(q,q)` block
    /// `Σ_i Σ_{a∈A_ij} V(a) (Σ_{r∈I⁺_i} X_rr) V(a)ᵀ` for `q ∈ I⁻_j`.
    pub fn apply_adjoint(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let x = self.checked_input(x, "apply_T_adjoint")?;
        let sums = self.source_sums(&x);
        let per_sink = self.sink_images(&sums);
        Ok(self.replicate(&per_sink, &self.sets.i_minus))
    }

    /// `Σ_j Σ_a V(a)ᵀ S_j V(a)` for each source, in a fixed summation order.
    pub(crate) fn source_images(&self, sink_mats: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self
            .layout
            .source_dims
            .iter()
            .map(|&d| DMatrix::zeros(d, d))
            .collect();
        for (k, v) in self.mats.iter().enumerate() {
            let (i, j) = self.layout.arrow_ends[k];
            out[i] += v.transpose() * &sink_mats[j] * v;
        }
        out
    }

    /// `Σ_i Σ_a V(a) S_i V(a)ᵀ` for each sink.
    pub(crate) fn sink_images(&self, source_mats: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self
            .layout
            .sink_dims
            .iter()
            .map(|&d| DMatrix::zeros(d, d))
            .collect();
        for (k, v) in self.mats.iter().enumerate() {
            let (i, j) = self.layout.arrow_ends[k];
            out[j] += v * &source_mats[i] * v.transpose();
        }
        out
    }

    fn replicate(&self, blocks: &[DMatrix<f64>], ranges: &[Range<usize>]) -> DMatrix<f64> {
        let n = self.layout.n_total;
        let mut out = DMatrix::zeros(n, n);
        let mut offset = 0;
        for (b, range) in blocks.iter().zip(ranges) {
            let d = b.nrows();
            for _ in range.clone() {
                out.view_mut((offset, offset), (d, d)).copy_from(b);
                offset += d;
            }
        }
        out
    }

    /// Kraus operators `V^{i,j,a}_{q,r}`, one per element of `S` with a real
    /// arrow; placeholders `0_{ij}` are zero and omitted.
    pub fn kraus_dense(&self) -> Vec<(KrausIndex, BlockMatrix)> {
        self.sets
            .s
            .iter()
            .filter_map(|idx| {
                let a = idx.arrow?;
                let mut k = BlockMatrix::zeros(self.sink_blocks.clone(), self.source_blocks.clone());
                k.set_block(idx.q, idx.r, &self.mats[a]);
                Some((*idx, k))
            })
            .collect()
    }

    /// `Σ Kᵀ X K` over the dense Kraus operators.
    pub fn apply_dense(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let x = self.checked_input(x, "apply_T")?;
        let n = self.layout.n_total;
        let mut out = DMatrix::zeros(n, n);
        for (_, k) in self.kraus_dense() {
            out += k.data.transpose() * &x * &k.data;
        }
        Ok(out)
    }

    /// `Σ K X Kᵀ` over the dense Kraus operators.
    pub fn apply_adjoint_dense(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let x = self.checked_input(x, "apply_T_adjoint")?;
        let n = self.layout.n_total;
        let mut out = DMatrix::zeros(n, n);
        for (_, k) in self.kraus_dense() {
            out += &k.data * &x * k.data.transpose();
        }
        Ok(out)
    }
}

pub fn kraus_dense(datum: &QuiverDatum) -> Result<Vec<(KrausIndex, BlockMatrix)>> {
    Ok(BlOperator::new(datum)?.kraus_dense())
}

pub fn apply_t(datum: &QuiverDatum, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    BlOperator::new(datum)?.apply(x)
}

pub fn apply_t_adjoint(datum: &QuiverDatum, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    BlOperator::new(datum)?.apply_adjoint(x)
}
