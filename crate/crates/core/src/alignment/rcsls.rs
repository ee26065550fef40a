//! Refinement of a map against the relaxed CSLS loss.
//!
//! For paired rows `(x_i, y_i)` and map `W` the loss is
//!
//! ```text
//! (1/n) Σ_i [ −2 (x_i W)·y_i
//!             + (1/k) Σ_{y_j ∈ N_Y(x_i W)} (x_i W)·y_j
//!             + (1/k) Σ_{x_j ∈ N_X(y_i)} (x_j W)·y_i ]
//! ```
//!
//! where the neighbourhoods are the `k` largest dot products over the whole
//! target (resp. mapped source) vocabulary. With the neighbourhoods held
//! fixed the loss is linear in `W`, which gives the subgradient used here.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use super::{AlignmentMap, Method};
use crate::embeddings::{EmbeddingSpace, Normalization};
use crate::error::{Error, Result};
use crate::linalg::{project_orthogonal, project_spectral_ball};
use crate::retrieval::top_k_indices;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Constraint {
    #[default]
    Orthogonal,
    /// Unit ball of the spectral norm.
    SpectralBall,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constraint::Orthogonal => "orthogonal",
            Constraint::SpectralBall => "spectral_ball",
        })
    }
}

impl FromStr for Constraint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orthogonal" => Ok(Constraint::Orthogonal),
            "spectral_ball" => Ok(Constraint::SpectralBall),
            other => Err(Error::invalid(format!("unknown constraint `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RcslsConfig {
    pub k_neighbors: usize,
    pub iterations: usize,
    pub step_size: f64,
    pub constraint: Constraint,
}

impl Default for RcslsConfig {
    fn default() -> Self {
        RcslsConfig {
            k_neighbors: 10,
            iterations: 50,
            step_size: 1.0,
            constraint: Constraint::Orthogonal,
        }
    }
}

/// Neighbour rows for every pair, frozen at one map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RcslsNeighborhoods {
    pub k: usize,
    /// `targets[i]`: rows of `Y` nearest to `x_i W`.
    pub targets: Vec<Vec<usize>>,
    /// `sources[i]`: rows of `X` whose images are nearest to `y_i`.
    pub sources: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct RcslsOutcome {
    /// Lowest-loss iterate.
    pub map: AlignmentMap,
    /// Loss at the start map, then after each step.
    pub losses: Vec<f64>,
    pub best_iteration: usize,
}

fn check(
    source: &EmbeddingSpace,
    target: &EmbeddingSpace,
    pairs: &[(usize, usize)],
    w: ArrayView2<'_, f64>,
    k: usize,
) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::invalid("RCSLS needs at least one pair"));
    }
    if source.dim() != target.dim() || w.dim() != (source.dim(), source.dim()) {
        return Err(Error::DimensionMismatch(format!(
            "source {}, target {}, map {:?}",
            source.dim(),
            target.dim(),
            w.dim()
        )));
    }
    let pool = source.len().min(target.len());
    if k == 0 || k >= pool {
        return Err(Error::invalid(format!("neighbourhood size {k} must lie in 1..{pool}")));
    }
    if let Some(&(s, t)) = pairs.iter().find(|&&(s, t)| s >= source.len() || t >= target.len()) {
        return Err(Error::invalid(format!("pair ({s}, {t}) out of range")));
    }
    Ok(())
}

fn top_rows(queries: &Array2<f64>, keys: &Array2<f64>, k: usize) -> Vec<Vec<usize>> {
    let sims = queries.dot(&keys.t());
    (0..sims.nrows())
        .into_par_iter()
        .map(|i| {
            let row = sims.row(i).to_vec();
            top_k_indices(&row, k, |_| true).into_iter().map(|(j, _)| j).collect()
        })
        .collect()
}

pub fn rcsls_neighborhoods(
    source: &EmbeddingSpace,
    target: &EmbeddingSpace,
    pairs: &[(usize, usize)],
    w: ArrayView2<'_, f64>,
    k: usize,
) -> Result<RcslsNeighborhoods> {
    check(source, target, pairs, w, k)?;
    let xs: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let xw = source.vectors().select(Axis(0), &xs).dot(&w);
    let yp = target.vectors().select(Axis(0), &ys);
    let mapped = source.vectors().dot(&w);
    Ok(RcslsNeighborhoods {
        k,
        targets: top_rows(&xw, target.vectors(), k),
        sources: top_rows(&yp, &mapped, k),
    })
}

fn neighbour_means(space: &Array2<f64>, sets: &[Vec<usize>]) -> Array2<f64> {
    let mut out = Array2::zeros((sets.len(), space.ncols()));
    for (mut row, set) in out.axis_iter_mut(Axis(0)).zip(sets) {
        for &j in set {
            row += &space.row(j);
        }
        row /= set.len() as f64;
    }
    out
}

/// Loss at `w` with the neighbourhoods held at `nbrs`.
pub fn rcsls_loss(
    source: &EmbeddingSpace,
    target: &EmbeddingSpace,
    pairs: &[(usize, usize)],
    w: ArrayView2<'_, f64>,
    nbrs: &RcslsNeighborhoods,
) -> Result<f64> {
    check(source, target, pairs, w, nbrs.k)?;
    let mapped = |r: usize| source.vector(r).dot(&w);
    let mut total = 0.0;
    for (i, &(s, t)) in pairs.iter().enumerate() {
        let xw = mapped(s);
        let y = target.vector(t);
        let fwd: f64 = nbrs.targets[i].iter().map(|&j| xw.dot(&target.vector(j))).sum();
        let bwd: f64 = nbrs.sources[i].iter().map(|&j| mapped(j).dot(&y)).sum();
        total += -2.0 * xw.dot(&y) + (fwd + bwd) / nbrs.k as f64;
    }
    Ok(total / pairs.len() as f64)
}

/// Gradient in `w` of [`rcsls_loss`] with the neighbourhoods fixed.
pub fn rcsls_gradient(
    source: &EmbeddingSpace,
    target: &EmbeddingSpace,
    pairs: &[(usize, usize)],
    w: ArrayView2<'_, f64>,
    nbrs: &RcslsNeighborhoods,
) -> Result<Array2<f64>> {
    check(source, target, pairs, w, nbrs.k)?;
    let xs: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let xp = source.vectors().select(Axis(0), &xs);
    let yp = target.vectors().select(Axis(0), &ys);
    let a = neighbour_means(target.vectors(), &nbrs.targets);
    let b = neighbour_means(source.vectors(), &nbrs.sources);
    let g = xp.t().dot(&(&a - &(&yp * 2.0))) + b.t().dot(&yp);
    Ok(g / pairs.len() as f64)
}

/// Projected subgradient descent on the RCSLS loss, neighbourhoods
/// recomputed at every step.
pub fn rcsls_refine(
    source: &EmbeddingSpace,
    target: &EmbeddingSpace,
    pairs: &[(usize, usize)],
    q0: &AlignmentMap,
    cfg: &RcslsConfig,
) -> Result<RcslsOutcome> {
    if source.normalization() == Normalization::Raw || target.normalization() == Normalization::Raw {
        return Err(Error::invalid("RCSLS expects normalized embeddings"));
    }
    if !(cfg.step_size > 0.0) {
        return Err(Error::invalid(format!("step size {} must be positive", cfg.step_size)));
    }
    let mut w = q0.matrix.clone();
    let mut losses = Vec::with_capacity(cfg.iterations + 1);
    let mut best = (w.clone(), f64::INFINITY, 0);
    for it in 0..=cfg.iterations {
        let nbrs = rcsls_neighborhoods(source, target, pairs, w.view(), cfg.k_neighbors)?;
        let loss = rcsls_loss(source, target, pairs, w.view(), &nbrs)?;
        if !loss.is_finite() {
            return Err(Error::Divergence(format!("RCSLS loss became {loss} at step {it}")));
        }
        losses.push(loss);
        if loss < best.1 {
            best = (w.clone(), loss, it);
        }
        if it == cfg.iterations {
            break;
        }
        let g = rcsls_gradient(source, target, pairs, w.view(), &nbrs)?;
        let step = &w - &(g * cfg.step_size);
        w = match cfg.constraint {
            Constraint::Orthogonal => project_orthogonal(step.view())?,
            Constraint::SpectralBall => project_spectral_ball(step.view())?,
        };
    }
    let map = AlignmentMap::new(best.0, &q0.source_lang, &q0.target_lang, Method::Rcsls)?;
    Ok(RcslsOutcome {
        map,
        losses,
        best_iteration: best.2,
    })
}
