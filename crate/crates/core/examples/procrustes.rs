//! Recovers a hidden rotation from paired points.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rubi::alignment::{procrustes, procrustes_objective};
use rubi::linalg::{max_abs_diff, orthogonality_error, random_orthogonal};

fn main() -> rubi::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = Array2::from_shape_fn((200, 8), |_| rng.sample::<f64, _>(StandardNormal));
    let r = random_orthogonal(8, &mut rng);

    // exact copy, then a noisy one
    for noise in [0.0, 0.05] {
        let y = x.dot(&r) + Array2::from_shape_fn((200, 8), |_| noise * rng.sample::<f64, _>(StandardNormal));
        let w = procrustes(x.view(), y.view())?;
        println!(
            "noise {noise:<4}  max|W-R| {:.2e}  |WᵀW-I| {:.2e}  residual {:.4}",
            max_abs_diff(w.view(), r.view()),
            orthogonality_error(w.view()),
            procrustes_objective(x.view(), y.view(), w.view()),
        );
    }
    Ok(())
}
