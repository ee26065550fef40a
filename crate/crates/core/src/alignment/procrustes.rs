use ndarray::{Array2, ArrayView2, Axis};

use super::{AlignmentMap, Method};
use crate::embeddings::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::linalg::svd;

/// Orthogonal `W` minimizing `‖XW − Y‖²`, where row `i` of `x` corresponds
/// to row `i` of `y`. Closed form `U Vᵀ` from the SVD of `XᵀY`.
pub fn procrustes(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch(format!(
            "procrustes inputs {:?} and {:?}",
            x.dim(),
            y.dim()
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::invalid("procrustes needs at least one pair"));
    }
    let (u, _, vt) = svd(x.t().dot(&y).view())?;
    Ok(u.dot(&vt))
}

/// `‖XW − Y‖²`.
pub fn procrustes_objective(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, w: ArrayView2<'_, f64>) -> f64 {
    let residual = x.dot(&w) - y;
    residual.iter().map(|v| v * v).sum()
}

/// Supervised Procrustes on `(source row, target row)` pairs.
pub fn procrustes_map(
    source: &EmbeddingSpace,
    target: &EmbeddingSpace,
    pairs: &[(usize, usize)],
) -> Result<AlignmentMap> {
    let (src_rows, tgt_rows): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
    let x = source.vectors().select(Axis(0), &src_rows);
    let y = target.vectors().select(Axis(0), &tgt_rows);
    let w = procrustes(x.view(), y.view())?;
    AlignmentMap::new(w, source.lang(), target.lang(), Method::Procrustes)
}
