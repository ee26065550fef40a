//! Trains the groupwise ranker on a toy task: the relevant item is the one
//! with the largest first feature, hidden among noisy distractors.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rubi::ltr::{mean_ndcg, train, RankingQuery, TrainConfig};

fn queries(n: usize, seed: u64, prefix: &str) -> Vec<RankingQuery> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let x = Array2::<f64>::from_shape_fn((10, 4), |_| rng.random_range(-1.0..1.0));
            let best = (0..10).max_by(|&a, &b| x[[a, 0]].total_cmp(&x[[b, 0]])).unwrap();
            let labels = (0..10).map(|j| if j == best { 2 } else { 1 }).collect();
            RankingQuery::new(format!("{prefix}{i}"), x, labels).unwrap()
        })
        .collect()
}

fn main() -> rubi::Result<()> {
    let (tr, cv, test) = (queries(1000, 1, "t"), queries(200, 2, "c"), queries(300, 3, "h"));
    let cfg = TrainConfig {
        iterations: 4000,
        batch_size: 16,
        hidden: vec![16, 8],
        group_size: 2,
        dropout_rate: 0.0,
        eval_every: 500,
        ..TrainConfig::default()
    };
    let (model, report) = train(&tr, &cfg, &cv)?;
    for e in &report.entries {
        println!(
            "step {:>5}  train loss {:.4}  cv ndcg@1 {:.4}",
            e.step, e.train_loss, e.cv_ndcg1
        );
    }
    println!(
        "held-out ndcg@1 {:.4} (snapshot from step {})",
        mean_ndcg(&model, &test, 1)?,
        report.best_step
    );
    Ok(())
}
