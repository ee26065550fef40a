use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::loss::{Loss, LossKind};
use super::metrics::{ndcg_at_k, ranking_from_scores};
use super::model::{Gradients, RankerModel, ScoreMode};
use super::query::RankingQuery;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epsilon: f64,
    /// Starting value of every Adagrad accumulator.
    pub initial_accumulator: f64,
    pub loss: LossKind,
    pub alpha: f64,
    /// Rank cutoff of the `approx_ndcg` loss.
    pub loss_cutoff: usize,
    /// Cutoff of the cross-validation NDCG.
    pub eval_cutoff: usize,
    pub eval_every: usize,
    pub group_size: usize,
    pub hidden: Vec<usize>,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 100_000,
            batch_size: 32,
            learning_rate: 0.5,
            epsilon: 1e-6,
            initial_accumulator: 0.1,
            loss: LossKind::ApproxNdcg,
            alpha: 10.0,
            loss_cutoff: 10,
            eval_cutoff: 1,
            eval_every: 1000,
            group_size: 4,
            hidden: vec![256, 128, 64],
            dropout_rate: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn loss_fn(&self) -> Result<Loss> {
        Loss::new(self.loss, self.alpha, self.loss_cutoff)
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.eval_every == 0 || self.eval_cutoff == 0 {
            return Err(Error::invalid(
                "batch size, eval interval and eval cutoff must be positive",
            ));
        }
        if !(self.learning_rate > 0.0) || !(self.epsilon >= 0.0) || !(self.initial_accumulator >= 0.0) {
            return Err(Error::invalid(
                "learning rate must be positive, epsilon and accumulator non-negative",
            ));
        }
        self.loss_fn().map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportEntry {
    pub step: usize,
    /// Mean batch loss since the previous entry.
    pub train_loss: f64,
    pub cv_ndcg1: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingReport {
    pub entries: Vec<ReportEntry>,
    /// Queries left out because every label was 0.
    pub dropped_train: usize,
    pub dropped_cv: usize,
    /// Step of the returned snapshot; 0 for the initial model.
    pub best_step: usize,
}

impl TrainingReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,train_loss,cv_ndcg1\n");
        for e in &self.entries {
            s.push_str(&format!("{},{},{}\n", e.step, e.train_loss, e.cv_ndcg1));
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Per-parameter step sizes from accumulated squared gradients.
#[derive(Debug, Clone)]
pub struct Adagrad {
    accumulators: Gradients,
    learning_rate: f64,
    epsilon: f64,
}

impl Adagrad {
    pub fn new(model: &RankerModel, learning_rate: f64, epsilon: f64, initial_accumulator: f64) -> Self {
        let mut accumulators = Gradients::zeros_like(model);
        for l in &mut accumulators.layers {
            l.weight.fill(initial_accumulator);
            l.bias.fill(initial_accumulator);
        }
        Adagrad {
            accumulators,
            learning_rate,
            epsilon,
        }
    }

    pub fn step(&mut self, model: &mut RankerModel, grads: &Gradients) {
        let (lr, eps) = (self.learning_rate, self.epsilon);
        for ((p, g), a) in model
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.accumulators.layers)
        {
            ndarray::Zip::from(&mut p.weight)
                .and(&g.weight)
                .and(&mut a.weight)
                .for_each(|p, &g, a| {
                    *a += g * g;
                    *p -= lr * g / (a.sqrt() + eps);
                });
            ndarray::Zip::from(&mut p.bias)
                .and(&g.bias)
                .and(&mut a.bias)
                .for_each(|p, &g, a| {
                    *a += g * g;
                    *p -= lr * g / (a.sqrt() + eps);
                });
        }
    }
}

/// Mean NDCG@k of the model's rankings, scored in eval mode.
pub fn mean_ndcg(model: &RankerModel, queries: &[RankingQuery], k: usize) -> Result<f64> {
    if queries.is_empty() {
        return Err(Error::invalid("no queries to evaluate"));
    }
    let values = queries
        .par_iter()
        .map(|q| {
            let s = model.score_query(q, ScoreMode::Eval)?;
            Ok(ndcg_at_k(&q.label_values(), &ranking_from_scores(&s), k))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Batch loss and mean gradient; per-query work runs in parallel and is
/// reduced in batch order.
fn batch_gradient(model: &RankerModel, batch: &[&RankingQuery], loss: &Loss, step: u64) -> Result<(f64, Gradients)> {
    let parts = batch
        .par_iter()
        .map(|q| model.loss_and_gradient(q, loss, ScoreMode::Train { step }))
        .collect::<Result<Vec<_>>>()?;
    let mut total = Gradients::zeros_like(model);
    let mut value = 0.0;
    for (v, g) in &parts {
        value += v;
        total.add_assign(g);
    }
    let scale = 1.0 / batch.len() as f64;
    total.scale(scale);
    Ok((value * scale, total))
}

/// Trains a ranker with Adagrad and returns the snapshot with the best
/// cross-validation NDCG, along with the report. Without cv queries the
/// training queries are used for model selection.
pub fn train(
    dataset: &[RankingQuery],
    cfg: &TrainConfig,
    cv_set: &[RankingQuery],
) -> Result<(RankerModel, TrainingReport)> {
    cfg.validate()?;
    let feature_dim = dataset
        .first()
        .ok_or_else(|| Error::invalid("training set is empty"))?
        .feature_dim();
    if let Some(q) = dataset.iter().chain(cv_set).find(|q| q.feature_dim() != feature_dim) {
        return Err(Error::DimensionMismatch(format!(
            "query `{}` has {} features, expected {feature_dim}",
            q.query_id,
            q.feature_dim()
        )));
    }
    let train_q: Vec<&RankingQuery> = dataset.iter().filter(|q| !q.all_zero()).collect();
    let cv_q: Vec<RankingQuery> = cv_set.iter().filter(|q| !q.all_zero()).cloned().collect();
    let mut report = TrainingReport {
        dropped_train: dataset.len() - train_q.len(),
        dropped_cv: cv_set.len() - cv_q.len(),
        ..Default::default()
    };
    if train_q.is_empty() {
        return Err(Error::invalid("every training query has all-zero labels"));
    }
    let mut model = RankerModel::new(feature_dim, cfg.group_size, &cfg.hidden, cfg.dropout_rate, cfg.seed)?;
    if cfg.iterations == 0 {
        return Ok((model, report));
    }
    let selection: Vec<RankingQuery> = if cv_q.is_empty() {
        train_q.iter().map(|&q| q.clone()).collect()
    } else {
        cv_q
    };
    let loss = cfg.loss_fn()?;
    let mut opt = Adagrad::new(&model, cfg.learning_rate, cfg.epsilon, cfg.initial_accumulator);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5851_f42d_4c95_7f2d);
    let mut best = (mean_ndcg(&model, &selection, cfg.eval_cutoff)?, model.clone());
    let (mut since, mut window_loss) = (0usize, 0.0);
    for step in 1..=cfg.iterations {
        let batch: Vec<&RankingQuery> = (0..cfg.batch_size)
            .map(|_| train_q[rng.random_range(0..train_q.len())])
            .collect();
        let (value, grads) = match batch_gradient(&model, &batch, &loss, step as u64) {
            Ok(r) => r,
            Err(e) if e.is_numerical() => {
                return Err(Error::Divergence(format!(
                    "step {step}: {e}; report so far:\n{}",
                    report.to_csv()
                )))
            }
            Err(e) => return Err(e),
        };
        if !value.is_finite() || !grads.is_finite() {
            return Err(Error::Divergence(format!(
                "non-finite loss or gradient at step {step}; report so far:\n{}",
                report.to_csv()
            )));
        }
        opt.step(&mut model, &grads);
        since += 1;
        window_loss += value;
        if step % cfg.eval_every == 0 || step == cfg.iterations {
            let cv = mean_ndcg(&model, &selection, cfg.eval_cutoff)?;
            report.entries.push(ReportEntry {
                step,
                train_loss: window_loss / since as f64,
                cv_ndcg1: cv,
            });
            log::info!(
                "step {step}: loss {:.5}, cv ndcg@{} {cv:.4}",
                window_loss / since as f64,
                cfg.eval_cutoff
            );
            if cv > best.0 {
                best = (cv, model.clone());
                report.best_step = step;
            }
            since = 0;
            window_loss = 0.0;
        }
    }
    Ok((best.1, report))
}
