//! Ranking metrics. A ranking lists item indices best first.

/// Position discount `1 / log2(1 + rank)` for a 1-based rank.
#[inline]
pub fn discount(rank: f64) -> f64 {
    1.0 / (1.0 + rank).log2()
}

#[inline]
pub fn gain(label: f64) -> f64 {
    label.exp2() - 1.0
}

/// Item indices sorted by descending score, ties to the lower index.
pub fn ranking_from_scores(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Σ over the first `k` ranks of `(2^y − 1) / log2(1 + rank)`.
pub fn dcg_at_k(labels: &[f64], ranking: &[usize], k: usize) -> f64 {
    ranking
        .iter()
        .take(k)
        .enumerate()
        .map(|(r, &i)| gain(labels[i]) * discount(r as f64 + 1.0))
        .sum()
}

/// DCG@k of the labels sorted descending.
pub fn ideal_dcg_at_k(labels: &[f64], k: usize) -> f64 {
    let mut sorted = labels.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted
        .iter()
        .take(k)
        .enumerate()
        .map(|(r, &y)| gain(y) * discount(r as f64 + 1.0))
        .sum()
}

/// DCG@k over the ideal DCG@k; 0 when every label is 0.
pub fn ndcg_at_k(labels: &[f64], ranking: &[usize], k: usize) -> f64 {
    let ideal = ideal_dcg_at_k(labels, k);
    if ideal == 0.0 {
        0.0
    } else {
        dcg_at_k(labels, ranking, k) / ideal
    }
}

/// 1 if the top-ranked item carries the highest label present, else 0.
pub fn precision_at_1(labels: &[f64], ranking: &[usize]) -> f64 {
    let best = labels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    match ranking.first() {
        Some(&i) if labels[i] == best && best > 0.0 => 1.0,
        _ => 0.0,
    }
}
