//! End-to-end runs: configuration, dictionaries, evaluation and the
//! learned and baseline induction pipelines.

mod config;
mod evaluate;
mod lexicon;
mod run;

pub use config::PipelineConfig;
pub use evaluate::{evaluate_bli, read_ranked_tsv, write_ranked_tsv, BliScore, EvalCounts, RankedTranslations};
pub use lexicon::{load_dictionary, split_dictionary, DictionaryReport, Lexicon, SplitReport};
pub use run::{
    align_spaces, build_queries, feature_stats, featurize_lists, load_space, query_rows, rank_baseline, rank_queries,
    run_baseline, run_rubi, summarize, write_run_dir, BaselineRun, InductionResult, QuerySet, RubiInputs, RubiRun,
};
