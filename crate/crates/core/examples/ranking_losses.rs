//! Every ranking loss on one query, before and after sorting the scores.

use rubi::ltr::{approx_ndcg_value, ndcg_at_k, ranking_from_scores, Loss, LossKind};

fn main() -> rubi::Result<()> {
    let labels = [2.0, 1.0, 1.0, 1.0, 1.0];
    let shuffled = [0.1, 0.9, 0.3, 0.5, -0.2];
    let sorted = [0.9, 0.5, 0.3, 0.1, -0.2];

    for kind in LossKind::ALL {
        let loss = Loss::new(kind, 10.0, 5)?;
        let (bad, grad) = loss.evaluate(&labels, &shuffled, 0);
        let (good, _) = loss.evaluate(&labels, &sorted, 0);
        println!(
            "{:<18} misranked {bad:>8.4}  ranked {good:>8.4}  d/ds0 {:>8.4}",
            kind.to_string(),
            grad[0]
        );
    }

    for alpha in [1.0, 10.0, 100.0, 1000.0] {
        println!(
            "alpha {alpha:<6} approx ndcg {:.4}  exact {:.4}",
            approx_ndcg_value(&labels, &shuffled, alpha, 5),
            ndcg_at_k(&labels, &ranking_from_scores(&shuffled), 5)
        );
    }
    Ok(())
}
