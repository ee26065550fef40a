//! Learned lexicon induction on a synthetic triple of languages, compared
//! with plain nearest-neighbour retrieval under the same map.
//!
//! ```text
//! cargo run --release --example rubi_synthetic
//! ```

use std::time::Instant;

use rubi::pipeline::{rank_baseline, run_rubi, PipelineConfig, RubiInputs};
use rubi::synthetic::{SyntheticConfig, SyntheticTriple};

fn main() -> rubi::Result<()> {
    let t = SyntheticTriple::generate(&SyntheticConfig::default(), 2024);
    let inputs = RubiInputs {
        a: t.a,
        b: t.b,
        c: t.c,
        gold_ac: t.gold_ac,
        gold_ab: Some(t.gold_ab),
    };

    let cfg = PipelineConfig::from_text(
        "seed = 1
         train_dict_size = 1500
         cv_dict_size = 500
         wproc_epochs = 2
         wproc_iters_per_epoch = 200
         ltr_iterations = 2000
         ltr_hidden = 64,32
         ltr_eval_every = 500",
    )?;

    let start = Instant::now();
    let run = run_rubi(&cfg, &inputs)?;
    let nn = rank_baseline(&cfg, &run.map_ab, &inputs.a, &inputs.b, inputs.gold_ab.as_ref())?;

    println!(
        "learned  p@1 {:.4}  p@5 {:.4}",
        run.result.precision_at_1.unwrap(),
        run.result.precision_at_5.unwrap()
    );
    println!(
        "nn       p@1 {:.4}  p@5 {:.4}",
        nn.result.precision_at_1.unwrap(),
        nn.result.precision_at_5.unwrap()
    );
    println!("best ranker snapshot at step {}", run.report.best_step);
    println!("{:.1?}", start.elapsed());
    Ok(())
}
