use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rubi::alignment::AlignmentMap;
use rubi::ltr::{read_feature_csv, train, RankerModel};
use rubi::pipeline::{
    align_spaces, feature_stats, featurize_lists, load_dictionary, load_space, query_rows, rank_baseline, rank_queries,
    read_ranked_tsv, run_baseline, run_rubi, summarize, write_ranked_tsv, write_run_dir, Lexicon, PipelineConfig,
    RankedTranslations, RubiInputs,
};
use rubi::retrieval::{
    generate_candidates, read_candidates_tsv, write_candidates_tsv, write_feature_csv, AlignedPair, Criterion, Scoring,
};
use rubi::{Error, Result};

#[derive(Parser)]
#[command(name = "rubi", version, about = "Bilingual lexicon induction from word embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct Pair {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Defaults to `lang_a`.
    #[arg(long)]
    source_lang: Option<String>,
    /// Defaults to `lang_b`.
    #[arg(long)]
    target_lang: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Aligns two embedding spaces without supervision.
    Align {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pair: Pair,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Convergence log (CSV).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Writes the top candidates of each source word.
    Candidates {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pair: Pair,
        #[arg(long)]
        map: PathBuf,
        /// Translate this dictionary's source words instead of the most frequent ones.
        #[arg(long)]
        words: Option<PathBuf>,
        #[arg(long)]
        criterion: Option<Criterion>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turns candidate lists into a labelled feature CSV.
    Featurize {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pair: Pair,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        /// Gold dictionary for the labels; without it every label is 0.
        #[arg(long)]
        dict: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trains a ranker on a feature CSV.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        cv: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Training curve (CSV).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Reranks the candidates of a feature CSV with a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Scores ranked translations against a gold dictionary.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        dict: PathBuf,
        /// Target embeddings, to tell out-of-vocabulary gold apart.
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs the whole learned pipeline.
    Rubi {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Aligns and ranks with a fixed retrieval criterion.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        criterion: Option<Criterion>,
        /// Reuse this map instead of aligning.
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Ranked translations (TSV).
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
}

fn config(common: &Common, seed: Option<u64>) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("`--set {kv}` is not KEY=VALUE")))?;
        cfg.set(k, v)?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn langs(pair: &Pair, cfg: &PipelineConfig) -> (String, String) {
    (
        pair.source_lang.clone().unwrap_or_else(|| cfg.lang_a.clone()),
        pair.target_lang.clone().unwrap_or_else(|| cfg.lang_b.clone()),
    )
}

fn dictionary(path: &Path, src: &str, tgt: &str) -> Result<Lexicon> {
    Ok(load_dictionary(path, src, tgt)?.0)
}

fn emit(result: &rubi::pipeline::InductionResult, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => result.save(p),
        None => {
            print!("{}", result.to_json());
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Align {
            common,
            pair,
            seed,
            out,
            log,
        } => {
            let cfg = config(&common, Some(seed))?;
            let (sl, tl) = langs(&pair, &cfg);
            let src = load_space(&pair.source, &sl, &cfg)?;
            let tgt = load_space(&pair.target, &tl, &cfg)?;
            let (map, conv) = align_spaces(&src, &tgt, &cfg)?;
            map.save(&out)?;
            if let Some(p) = log {
                conv.save(p)?;
            }
        }
        Command::Candidates {
            common,
            pair,
            map,
            words,
            criterion,
            out,
        } => {
            let cfg = config(&common, None)?;
            let (sl, tl) = langs(&pair, &cfg);
            let src = load_space(&pair.source, &sl, &cfg)?;
            let tgt = load_space(&pair.target, &tl, &cfg)?;
            let map = AlignmentMap::load(&map)?;
            let gold = words.map(|p| dictionary(&p, &sl, &tl)).transpose()?;
            let aligned = AlignedPair::new(&map, &src, &tgt)?;
            let scoring = Scoring::prepare(
                criterion.unwrap_or(cfg.candidate_criterion),
                &aligned,
                cfg.csls_k,
                cfg.isf_beta,
            )?;
            let rows = query_rows(&src, gold.as_ref(), cfg.train_dict_size, &mut BTreeMap::new());
            let lists = generate_candidates(&aligned, &rows, cfg.query_size, &scoring)?;
            write_candidates_tsv(&lists, &out)?;
        }
        Command::Featurize {
            common,
            pair,
            map,
            candidates,
            dict,
            out,
        } => {
            let cfg = config(&common, None)?;
            let (sl, tl) = langs(&pair, &cfg);
            let src = load_space(&pair.source, &sl, &cfg)?;
            let tgt = load_space(&pair.target, &tl, &cfg)?;
            let map = AlignmentMap::load(&map)?;
            let gold = dict.map(|p| dictionary(&p, &sl, &tl)).transpose()?;
            let aligned = AlignedPair::new(&map, &src, &tgt)?;
            let lists = read_candidates_tsv(&candidates, &src, &tgt)?;
            let stats = feature_stats(&aligned, cfg.k_max)?;
            let set = featurize_lists(&aligned, lists, &stats, gold.as_ref(), &cfg)?;
            if set.skipped > 0 {
                log::warn!("{} queries without a usable gold translation left out", set.skipped);
            }
            write_feature_csv(&out, &set.lists, &set.features, &set.labels, cfg.k_max)?;
        }
        Command::Train {
            common,
            features,
            cv,
            seed,
            out,
            report,
        } => {
            let cfg = config(&common, Some(seed))?;
            let train_q = read_feature_csv(&features)?;
            let cv_q = cv.map(read_feature_csv).transpose()?.unwrap_or_default();
            let (model, rep) = train(&train_q, &cfg.train(), &cv_q)?;
            model.save(&out)?;
            if let Some(p) = report {
                rep.save(p)?;
            }
        }
        Command::Predict { model, features, out } => {
            let model = RankerModel::load(&model)?;
            let queries = read_feature_csv(&features)?;
            write_ranked_tsv(&rank_queries(&model, &queries)?, &out)?;
        }
        Command::Evaluate {
            common,
            predictions,
            dict,
            target,
            out,
        } => {
            let cfg = config(&common, None)?;
            let ranked: Vec<RankedTranslations> = read_ranked_tsv(&predictions)?;
            let gold = dictionary(&dict, &cfg.lang_a, &cfg.lang_b)?;
            let tgt = target.map(|p| load_space(p, &cfg.lang_b, &cfg)).transpose()?;
            let in_vocab = |w: &str| tgt.as_ref().is_none_or(|t| t.lookup(w).is_some());
            let result = summarize(&ranked, Some(&gold), in_vocab, BTreeMap::new(), &cfg)?;
            emit(&result, out.as_deref())?;
        }
        Command::Rubi { common, seed, out_dir } => {
            let cfg = config(&common, Some(seed))?;
            let inputs = RubiInputs::load(&cfg)?;
            let run = run_rubi(&cfg, &inputs)?;
            write_run_dir(&out_dir, &cfg, &run)?;
            print!("{}", run.result.to_json());
        }
        Command::Baseline {
            common,
            seed,
            criterion,
            map,
            out,
            predictions,
        } => {
            let mut cfg = config(&common, seed)?;
            if let Some(c) = criterion {
                cfg.criterion = c;
            }
            let need = |p: &Option<PathBuf>, key: &str| {
                p.clone()
                    .ok_or_else(|| Error::InvalidInput(format!("config key `{key}` is required")))
            };
            let a = load_space(need(&cfg.embeddings_a, "embeddings_a")?, &cfg.lang_a, &cfg)?;
            let b = load_space(need(&cfg.embeddings_b, "embeddings_b")?, &cfg.lang_b, &cfg)?;
            let gold = cfg
                .dictionary_ab
                .as_ref()
                .map(|p| dictionary(p, &cfg.lang_a, &cfg.lang_b))
                .transpose()?;
            let run = match map {
                Some(p) => rank_baseline(&cfg, &AlignmentMap::load(p)?, &a, &b, gold.as_ref())?,
                None => run_baseline(&cfg, &a, &b, gold.as_ref())?.0,
            };
            if let Some(p) = predictions {
                write_ranked_tsv(&run.ranked, p)?;
            }
            emit(&run.result, out.as_deref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
