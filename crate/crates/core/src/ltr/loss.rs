//! Ranking losses over one query, each with its gradient in the scores.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::metrics::{discount, gain, ideal_dcg_at_k};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LossKind {
    SigmoidCe,
    PairwiseLogistic,
    SoftmaxCe,
    #[default]
    ApproxNdcg,
    ListMle,
}

impl LossKind {
    pub const ALL: [LossKind; 5] = [
        LossKind::SigmoidCe,
        LossKind::PairwiseLogistic,
        LossKind::SoftmaxCe,
        LossKind::ApproxNdcg,
        LossKind::ListMle,
    ];
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::SigmoidCe => "sigmoid_ce",
            LossKind::PairwiseLogistic => "pairwise_logistic",
            LossKind::SoftmaxCe => "softmax_ce",
            LossKind::ApproxNdcg => "approx_ndcg",
            LossKind::ListMle => "list_mle",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| Error::invalid(format!("unknown loss `{s}`")))
    }
}

/// A loss together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loss {
    pub kind: LossKind,
    /// Sharpness of the sigmoid approximations in `approx_ndcg`.
    pub alpha: f64,
    /// Rank cutoff of `approx_ndcg`.
    pub cutoff: usize,
}

impl Loss {
    pub fn new(kind: LossKind, alpha: f64, cutoff: usize) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::invalid(format!("alpha {alpha} must be positive")));
        }
        if cutoff == 0 {
            return Err(Error::invalid("rank cutoff must be at least 1"));
        }
        Ok(Loss { kind, alpha, cutoff })
    }

    /// Loss value and its gradient in `scores`. `tie_seed` orders equal
    /// labels for `list_mle`.
    pub fn evaluate(&self, labels: &[f64], scores: &[f64], tie_seed: u64) -> (f64, Vec<f64>) {
        assert_eq!(labels.len(), scores.len(), "one label per score");
        match self.kind {
            LossKind::SigmoidCe => sigmoid_ce(labels, scores),
            LossKind::PairwiseLogistic => pairwise_logistic(labels, scores),
            LossKind::SoftmaxCe => softmax_ce(labels, scores),
            LossKind::ApproxNdcg => approx_ndcg(labels, scores, self.alpha, self.cutoff),
            LossKind::ListMle => list_mle(labels, scores, tie_seed),
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`.
#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Labels above the middle of the query's label range count as relevant;
/// a constant-label query is relevant iff its labels are positive.
pub fn binarize(labels: &[f64]) -> Vec<f64> {
    let lo = labels.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = labels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let threshold = if lo == hi { 0.0 } else { 0.5 * (lo + hi) };
    labels.iter().map(|&y| f64::from(u8::from(y > threshold))).collect()
}

fn sigmoid_ce(labels: &[f64], scores: &[f64]) -> (f64, Vec<f64>) {
    let y = binarize(labels);
    let loss = scores.iter().zip(&y).map(|(&s, &y)| softplus(s) - y * s).sum();
    let grad = scores.iter().zip(&y).map(|(&s, &y)| sigmoid(s) - y).collect();
    (loss, grad)
}

fn pairwise_logistic(labels: &[f64], scores: &[f64]) -> (f64, Vec<f64>) {
    let n = labels.len();
    let mut loss = 0.0;
    let mut grad = vec![0.0; n];
    for j in 0..n {
        for k in 0..n {
            if labels[j] > labels[k] {
                let d = scores[k] - scores[j];
                loss += softplus(d);
                let p = sigmoid(d);
                grad[k] += p;
                grad[j] -= p;
            }
        }
    }
    (loss, grad)
}

fn softmax_ce(labels: &[f64], scores: &[f64]) -> (f64, Vec<f64>) {
    let total: f64 = labels.iter().sum();
    if total == 0.0 {
        return (0.0, vec![0.0; labels.len()]);
    }
    let lse = log_sum_exp(scores.iter().copied());
    let loss = labels.iter().zip(scores).map(|(&y, &s)| y * (lse - s)).sum();
    let grad = labels
        .iter()
        .zip(scores)
        .map(|(&y, &s)| total * (s - lse).exp() - y)
        .collect();
    (loss, grad)
}

/// `1 + Σ_{y≠x} σ(−α(s_x − s_y))`: a smooth 1-based rank for every item.
pub fn approx_rank(scores: &[f64], alpha: f64) -> Vec<f64> {
    scores
        .iter()
        .enumerate()
        .map(|(x, &sx)| {
            1.0 + scores
                .iter()
                .enumerate()
                .filter(|&(y, _)| y != x)
                .map(|(_, &sy)| sigmoid(-alpha * (sx - sy)))
                .sum::<f64>()
        })
        .collect()
}

/// Smooth stand-in for `rank ≤ k`, centred half a rank past the cutoff.
#[inline]
fn soft_cutoff(rank: f64, alpha: f64, k: usize) -> f64 {
    sigmoid(alpha * (k as f64 + 0.5 - rank))
}

/// Smooth NDCG@k built from [`approx_rank`] and a sigmoid cutoff.
pub fn approx_ndcg_value(labels: &[f64], scores: &[f64], alpha: f64, k: usize) -> f64 {
    let ideal = ideal_dcg_at_k(labels, k);
    if ideal == 0.0 {
        return 0.0;
    }
    let ranks = approx_rank(scores, alpha);
    labels
        .iter()
        .zip(&ranks)
        .map(|(&y, &r)| gain(y) * discount(r) * soft_cutoff(r, alpha, k))
        .sum::<f64>()
        / ideal
}

fn approx_ndcg(labels: &[f64], scores: &[f64], alpha: f64, k: usize) -> (f64, Vec<f64>) {
    let n = labels.len();
    let ideal = ideal_dcg_at_k(labels, k);
    if ideal == 0.0 {
        return (0.0, vec![0.0; n]);
    }
    let ranks = approx_rank(scores, alpha);
    let mut value = 0.0;
    // dF/dπ̂ per item, F = gain · D(π̂) · C(π̂)
    let mut dfdr = vec![0.0; n];
    for x in 0..n {
        let g = gain(labels[x]);
        let r = ranks[x];
        let d = discount(r);
        let c = soft_cutoff(r, alpha, k);
        value += g * d * c;
        let l = (1.0 + r).log2();
        let dd = -1.0 / ((1.0 + r) * std::f64::consts::LN_2 * l * l);
        let dc = -alpha * c * (1.0 - c);
        dfdr[x] = g * (dd * c + d * dc);
    }
    let mut grad = vec![0.0; n];
    for x in 0..n {
        if dfdr[x] == 0.0 {
            continue;
        }
        for y in 0..n {
            if y == x {
                continue;
            }
            let p = sigmoid(alpha * (scores[y] - scores[x]));
            let w = dfdr[x] * alpha * p * (1.0 - p);
            grad[y] += w;
            grad[x] -= w;
        }
    }
    for g in &mut grad {
        *g = -*g / ideal;
    }
    (-value / ideal, grad)
}

/// Order of items by descending label, equal labels shuffled by `seed`.
fn label_order(labels: &[f64], seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.sort_by(|&a, &b| labels[b].total_cmp(&labels[a]));
    order
}

fn list_mle(labels: &[f64], scores: &[f64], seed: u64) -> (f64, Vec<f64>) {
    let n = labels.len();
    let order = label_order(labels, seed);
    let s: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
    // suffix[i] = log Σ_{j≥i} e^{s_j}
    let mut suffix = vec![f64::NEG_INFINITY; n + 1];
    for i in (0..n).rev() {
        let (a, b) = (suffix[i + 1], s[i]);
        let m = a.max(b);
        suffix[i] = m + ((a - m).exp() + (b - m).exp()).ln();
    }
    let loss = (0..n).map(|i| suffix[i] - s[i]).sum();
    let mut grad = vec![0.0; n];
    // ∂/∂s_j = Σ_{i≤j} softmax of suffix i at j, minus one
    for j in 0..n {
        let v: f64 = (0..=j).map(|i| (s[j] - suffix[i]).exp()).sum();
        grad[order[j]] = v - 1.0;
    }
    (loss, grad)
}

pub fn loss_sigmoid_ce(labels: &[f64], scores: &[f64]) -> f64 {
    sigmoid_ce(labels, scores).0
}

pub fn loss_pairwise_logistic(labels: &[f64], scores: &[f64]) -> f64 {
    pairwise_logistic(labels, scores).0
}

pub fn loss_softmax_ce(labels: &[f64], scores: &[f64]) -> f64 {
    softmax_ce(labels, scores).0
}

/// Negative smooth NDCG@k.
pub fn loss_approx_ndcg(labels: &[f64], scores: &[f64], alpha: f64, k: usize) -> f64 {
    -approx_ndcg_value(labels, scores, alpha, k)
}

pub fn loss_list_mle(labels: &[f64], scores: &[f64], tie_seed: u64) -> f64 {
    list_mle(labels, scores, tie_seed).0
}
