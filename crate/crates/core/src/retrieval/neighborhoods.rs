use ndarray::{s, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use super::{cosine_sim, top_k_indices, AlignedPair};
use crate::alignment::AlignmentMap;
use crate::embeddings::EmbeddingSpace;
use crate::error::{Error, Result};

/// Mean similarity of every word to its `k` nearest neighbours in the other
/// space.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodStats {
    pub k: usize,
    /// `r_T(Wx_s)` for every source row.
    pub r_source: Vec<f64>,
    /// `r_S(y_t)` for every target row.
    pub r_target: Vec<f64>,
}

/// Sorted top-`k_max` neighbour similarities in both directions, from which
/// [`NeighborhoodStats`] for any `k ≤ k_max` are prefix means.
#[derive(Debug, Clone)]
pub struct NeighborhoodTable {
    k_max: usize,
    source: Array2<f64>,
    target: Array2<f64>,
}

fn top_k_rows(
    queries: ArrayView2<'_, f64>,
    query_valid: &[bool],
    keys: ArrayView2<'_, f64>,
    key_valid: &[bool],
    k: usize,
    exclude_self: bool,
    rows_per_tile: usize,
) -> Array2<f64> {
    let n = queries.nrows();
    let starts: Vec<usize> = (0..n).step_by(rows_per_tile.max(1)).collect();
    let tiles: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|&start| {
            let end = (start + rows_per_tile).min(n);
            let block = queries.slice(s![start..end, ..]).dot(&keys.t());
            let mut out = vec![0.0; (end - start) * k];
            for (r, row) in block.outer_iter().enumerate() {
                let i = start + r;
                if !query_valid[i] {
                    continue;
                }
                let values = row.as_slice().expect("dot output is contiguous");
                let top = top_k_indices(values, k, |j| key_valid[j] && !(exclude_self && j == i));
                for (slot, (_, v)) in out[r * k..(r + 1) * k].iter_mut().zip(top) {
                    *slot = v;
                }
            }
            out
        })
        .collect();
    Array2::from_shape_vec((n, k), tiles.concat()).expect("tiles cover every row")
}

impl NeighborhoodTable {
    pub fn compute(pair: &AlignedPair<'_>, k_max: usize) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::invalid("neighbourhood size must be at least 1"));
        }
        let own = usize::from(pair.excludes_self());
        let targets = pair.target_valid().iter().filter(|&&v| v).count();
        let sources = pair.source_valid().iter().filter(|&&v| v).count();
        let pool = targets.min(sources).saturating_sub(own);
        if k_max > pool {
            return Err(Error::invalid(format!(
                "neighbourhood size {k_max} exceeds the {pool} available neighbours"
            )));
        }
        let source = top_k_rows(
            pair.mapped(),
            pair.source_valid(),
            pair.target_unit(),
            pair.target_valid(),
            k_max,
            pair.excludes_self(),
            pair.rows_per_tile(pair.target.len()),
        );
        let target = top_k_rows(
            pair.target_unit(),
            pair.target_valid(),
            pair.mapped(),
            pair.source_valid(),
            k_max,
            pair.excludes_self(),
            pair.rows_per_tile(pair.source.len()),
        );
        Ok(NeighborhoodTable { k_max, source, target })
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn stats(&self, k: usize) -> Result<NeighborhoodStats> {
        if k == 0 || k > self.k_max {
            return Err(Error::invalid(format!(
                "neighbourhood size {k} outside 1..={}",
                self.k_max
            )));
        }
        let prefix_mean =
            |m: &Array2<f64>| -> Vec<f64> { m.outer_iter().map(|r| r.slice(s![..k]).sum() / k as f64).collect() };
        Ok(NeighborhoodStats {
            k,
            r_source: prefix_mean(&self.source),
            r_target: prefix_mean(&self.target),
        })
    }

    /// Stats for every `k` in `1..=k_max`.
    pub fn all_stats(&self) -> Vec<NeighborhoodStats> {
        (1..=self.k_max)
            .map(|k| self.stats(k).expect("k within range"))
            .collect()
    }
}

/// Exact top-`k` neighbourhood means in both directions.
pub fn compute_neighborhood_stats(
    map: &AlignmentMap,
    source: &EmbeddingSpace,
    target: &EmbeddingSpace,
    k: usize,
) -> Result<NeighborhoodStats> {
    let pair = AlignedPair::new(map, source, target)?;
    NeighborhoodTable::compute(&pair, k)?.stats(k)
}

/// `2·cos(Wx_s, y_t) − r_T(Wx_s) − r_S(y_t)`.
pub fn csls_score(
    x_mapped: ArrayView1<'_, f64>,
    y: ArrayView1<'_, f64>,
    source_row: usize,
    target_row: usize,
    stats: &NeighborhoodStats,
) -> Result<f64> {
    let r_t = stats
        .r_source
        .get(source_row)
        .ok_or_else(|| Error::invalid(format!("no neighbourhood stats for source row {source_row}")))?;
    let r_s = stats
        .r_target
        .get(target_row)
        .ok_or_else(|| Error::invalid(format!("no neighbourhood stats for target row {target_row}")))?;
    Ok(2.0 * cosine_sim(x_mapped, y)? - r_t - r_s)
}

/// Log partition functions of the inverted softmax: for every target `t`,
/// `log Σ_s exp(β·cos(Wx_s, y_t))` over all source words.
#[derive(Debug, Clone, PartialEq)]
pub struct IsfPartition {
    pub beta: f64,
    pub log_z: Vec<f64>,
}

impl IsfPartition {
    pub fn compute(pair: &AlignedPair<'_>, beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::invalid(format!(
                "inverted softmax temperature {beta} must be positive"
            )));
        }
        let targets = pair.target_unit();
        let mapped = pair.mapped();
        let valid = pair.source_valid();
        let n = targets.nrows();
        let step = pair.rows_per_tile(mapped.nrows());
        let starts: Vec<usize> = (0..n).step_by(step).collect();
        let log_z: Vec<f64> = starts
            .par_iter()
            .flat_map_iter(|&start| {
                let end = (start + step).min(n);
                let block = targets.slice(s![start..end, ..]).dot(&mapped.t());
                block
                    .outer_iter()
                    .map(|row| {
                        let scaled: Vec<f64> = row
                            .iter()
                            .zip(valid)
                            .filter(|(_, &ok)| ok)
                            .map(|(&c, _)| beta * c)
                            .collect();
                        let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        max + scaled.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        Ok(IsfPartition { beta, log_z })
    }
}

/// Inverted softmax: `exp(β·cos(x, y)) / Σ_s exp(β·cos(Wx_s, y))`, the
/// normalization running over source words for the fixed target `y`.
pub fn isf_score(
    x_mapped: ArrayView1<'_, f64>,
    y: ArrayView1<'_, f64>,
    target_row: usize,
    partition: &IsfPartition,
) -> Result<f64> {
    let log_z = partition
        .log_z
        .get(target_row)
        .ok_or_else(|| Error::invalid(format!("no partition value for target row {target_row}")))?;
    Ok((partition.beta * cosine_sim(x_mapped, y)? - log_z).exp())
}
