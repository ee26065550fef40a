//! Aligns two synthetic languages without any dictionary.

use rubi::alignment::{wasserstein_procrustes, Init, WProcConfig};
use rubi::synthetic::{IsometricPair, SyntheticConfig};

fn main() -> rubi::Result<()> {
    let pair = IsometricPair::generate(
        &SyntheticConfig {
            n: 1500,
            d: 30,
            ..SyntheticConfig::default()
        },
        7,
    );

    for init in [Init::Identity, Init::ProcrustesSeed] {
        let cfg = WProcConfig {
            init,
            epochs: 3,
            iters_per_epoch: 300,
            batch_size: 300,
            seed: 1,
            ..WProcConfig::default()
        };
        let (map, log) = wasserstein_procrustes(&pair.source, &pair.target, &cfg)?;
        let means: Vec<String> = log.epoch_means().iter().map(|m| format!("{m:.4}")).collect();
        println!(
            "{init}: nn precision {:.3}, epoch objectives [{}]",
            pair.nn_precision(&map.matrix),
            means.join(", ")
        );
    }
    Ok(())
}
