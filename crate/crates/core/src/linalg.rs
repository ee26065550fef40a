//! Small dense linear-algebra helpers on top of nalgebra's SVD.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

fn to_nalgebra(m: ArrayView2<'_, f64>) -> DMatrix<f64> {
    let (r, c) = m.dim();
    DMatrix::from_fn(r, c, |i, j| m[[i, j]])
}

fn from_nalgebra(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Thin SVD `m = U diag(s) Vᵀ`, returning `(U, s, Vᵀ)`.
pub fn svd(m: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Array1<f64>, Array2<f64>)> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix passed to SVD".into()));
    }
    let decomposition = nalgebra::linalg::SVD::try_new(to_nalgebra(m), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Svd(format!("no convergence on a {:?} matrix", m.dim())))?;
    let u = decomposition.u.as_ref().ok_or_else(|| Error::Svd("missing U".into()))?;
    let vt = decomposition
        .v_t
        .as_ref()
        .ok_or_else(|| Error::Svd("missing Vᵀ".into()))?;
    Ok((
        from_nalgebra(u),
        Array1::from_iter(decomposition.singular_values.iter().copied()),
        from_nalgebra(vt),
    ))
}

/// Nearest orthogonal matrix in Frobenius norm: `U Vᵀ`.
pub fn project_orthogonal(m: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (u, _, vt) = svd(m)?;
    Ok(u.dot(&vt))
}

/// Projection onto the unit ball of the spectral norm: singular values
/// are clamped to at most one.
pub fn project_spectral_ball(m: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (u, s, vt) = svd(m)?;
    let clamped = s.mapv(|v| v.min(1.0));
    Ok((u * &clamped).dot(&vt))
}

/// `max |QᵀQ − I|`.
pub fn orthogonality_error(q: ArrayView2<'_, f64>) -> f64 {
    let gram = q.t().dot(&q);
    gram.indexed_iter()
        .map(|((i, j), &v)| (v - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max)
}

/// Haar-distributed orthogonal matrix from the QR decomposition of a
/// Gaussian matrix, with column signs fixed by `diag(R) > 0`.
pub fn random_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Array2<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    from_nalgebra(&q)
}

/// `max |a − b|` over matching entries.
pub fn max_abs_diff(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
