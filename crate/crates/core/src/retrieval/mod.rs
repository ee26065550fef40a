//! Translation retrieval after alignment: nearest neighbours, CSLS, inverted
//! softmax, candidate lists and ranking features.
//!
//! Similarity blocks are computed tile by tile over source rows so the full
//! `n_source × n_target` matrix never exists at once. Each row's result only
//! depends on that row, so the tiling does not change any output.

mod candidates;
mod features;
mod neighborhoods;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

pub use candidates::{
    generate_candidates, read_candidates_tsv, top1_in_degree, write_candidates_tsv, Candidate, CandidateList,
    Criterion, Scoring,
};
pub use features::{extract_features, feature_names, write_feature_csv, FeatureVector};
pub use neighborhoods::{
    compute_neighborhood_stats, csls_score, isf_score, IsfPartition, NeighborhoodStats, NeighborhoodTable,
};

use crate::alignment::AlignmentMap;
use crate::embeddings::EmbeddingSpace;
use crate::error::{Error, Result};

/// Upper bound on similarity entries held by one tile.
const TILE_ENTRIES: usize = 1 << 22;

/// Cosine similarity; zero vectors are rejected.
pub fn cosine_sim(u: ArrayView1<'_, f64>, v: ArrayView1<'_, f64>) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", u.len(), v.len())));
    }
    let nu = u.dot(&u).sqrt();
    let nv = v.dot(&v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::invalid("cosine similarity of a zero vector"));
    }
    Ok((u.dot(&v) / (nu * nv)).clamp(-1.0, 1.0))
}

fn unit_rows(m: Array2<f64>) -> (Array2<f64>, Vec<bool>) {
    let mut m = m;
    let mut valid = Vec::with_capacity(m.nrows());
    for mut row in m.axis_iter_mut(Axis(0)) {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row /= norm;
            valid.push(true);
        } else {
            valid.push(false);
        }
    }
    (m, valid)
}

/// Mapped source and target vectors, both scaled to unit length, ready for
/// cosine retrieval.
#[derive(Debug, Clone)]
pub struct AlignedPair<'a> {
    pub source: &'a EmbeddingSpace,
    pub target: &'a EmbeddingSpace,
    mapped: Array2<f64>,
    target_unit: Array2<f64>,
    source_valid: Vec<bool>,
    target_valid: Vec<bool>,
    exclude_self: bool,
    tile_rows: usize,
}

impl<'a> AlignedPair<'a> {
    /// Words are left out of their own neighbourhoods when `source` and
    /// `target` are the same object.
    pub fn new(map: &AlignmentMap, source: &'a EmbeddingSpace, target: &'a EmbeddingSpace) -> Result<Self> {
        if target.dim() != map.dim() {
            return Err(Error::DimensionMismatch(format!(
                "map is {0}x{0} but target has {1} coordinates",
                map.dim(),
                target.dim()
            )));
        }
        let (mapped, source_valid) = unit_rows(map.apply(source)?);
        let (target_unit, target_valid) = unit_rows(target.vectors().clone());
        Ok(AlignedPair {
            source,
            target,
            mapped,
            target_unit,
            source_valid,
            target_valid,
            exclude_self: std::ptr::eq(source, target),
            tile_rows: 256,
        })
    }

    /// Overrides the number of source rows per tile.
    pub fn with_tile_rows(mut self, rows: usize) -> Self {
        self.tile_rows = rows.max(1);
        self
    }

    pub fn excludes_self(&self) -> bool {
        self.exclude_self
    }

    /// Unit-length mapped source vectors.
    pub fn mapped(&self) -> ArrayView2<'_, f64> {
        self.mapped.view()
    }

    /// Unit-length target vectors.
    pub fn target_unit(&self) -> ArrayView2<'_, f64> {
        self.target_unit.view()
    }

    pub fn source_valid(&self) -> &[bool] {
        &self.source_valid
    }

    pub fn target_valid(&self) -> &[bool] {
        &self.target_valid
    }

    /// Cosine between mapped source row `s` and target row `t`.
    pub fn cosine(&self, s: usize, t: usize) -> f64 {
        self.mapped.row(s).dot(&self.target_unit.row(t))
    }

    pub(crate) fn rows_per_tile(&self, width: usize) -> usize {
        self.tile_rows.min((TILE_ENTRIES / width.max(1)).max(1))
    }
}

/// Indices of the `k` largest values (ties to the lower index), best first.
pub(crate) fn top_k_indices(values: &[f64], k: usize, keep: impl Fn(usize) -> bool) -> Vec<(usize, f64)> {
    let mut items: Vec<(usize, f64)> = values.iter().copied().enumerate().filter(|&(j, _)| keep(j)).collect();
    let order = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    if k < items.len() {
        if k > 0 {
            items.select_nth_unstable_by(k - 1, order);
        }
        items.truncate(k);
    }
    items.sort_unstable_by(order);
    items
}
