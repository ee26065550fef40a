//! Learning to rank: queries of candidate translations, a groupwise MLP
//! scorer, ranking losses and metrics, and an Adagrad trainer.

mod loss;
mod metrics;
mod model;
mod query;
mod relevance;
mod train;

pub use loss::{
    approx_ndcg_value, approx_rank, binarize, loss_approx_ndcg, loss_list_mle, loss_pairwise_logistic, loss_sigmoid_ce,
    loss_softmax_ce, Loss, LossKind,
};
pub use metrics::{dcg_at_k, discount, gain, ideal_dcg_at_k, ndcg_at_k, precision_at_1, ranking_from_scores};
pub use model::{Gradients, Layer, RankerModel, ScoreMode};
pub use query::{read_feature_csv, RankingQuery};
pub use relevance::{assign_relevance, RelevanceMode};
pub use train::{mean_ndcg, train, Adagrad, ReportEntry, TrainConfig, TrainingReport};
