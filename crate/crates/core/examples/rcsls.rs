//! Refines a rough supervised map against the relaxed CSLS loss, on the
//! orthogonal group and on the spectral-norm ball.

use rubi::alignment::{procrustes_map, rcsls_refine, Constraint, RcslsConfig};
use rubi::synthetic::{IsometricPair, SyntheticConfig};

fn main() -> rubi::Result<()> {
    let pair = IsometricPair::generate(
        &SyntheticConfig {
            n: 800,
            d: 20,
            noise: 0.05,
            ..SyntheticConfig::default()
        },
        3,
    );
    let pairs: Vec<(usize, usize)> = pair.gold.iter().enumerate().take(300).map(|(i, &g)| (i, g)).collect();
    let start = procrustes_map(&pair.source, &pair.target, &pairs[..40])?;
    println!(
        "procrustes on 40 pairs: nn precision {:.3}",
        pair.nn_precision(&start.matrix)
    );

    for constraint in [Constraint::Orthogonal, Constraint::SpectralBall] {
        let cfg = RcslsConfig {
            constraint,
            iterations: 30,
            ..RcslsConfig::default()
        };
        let out = rcsls_refine(&pair.source, &pair.target, &pairs, &start, &cfg)?;
        println!(
            "{constraint}: loss {:.4} -> {:.4} (best at {}), nn precision {:.3}",
            out.losses[0],
            out.losses[out.best_iteration],
            out.best_iteration,
            pair.nn_precision(&out.map.matrix)
        );
    }
    Ok(())
}
