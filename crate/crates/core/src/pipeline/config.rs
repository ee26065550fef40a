use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::alignment::{Init, WProcConfig};
use crate::embeddings::Normalization;
use crate::error::{Error, Result};
use crate::ltr::{LossKind, RelevanceMode, TrainConfig};
use crate::retrieval::Criterion;

/// Every knob of a run. Read from and written to a flat `key = value` file;
/// the sorted canonical text is what [`PipelineConfig::config_hash`] hashes.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub lang_a: String,
    pub lang_b: String,
    pub lang_c: String,
    pub embeddings_a: Option<PathBuf>,
    pub embeddings_b: Option<PathBuf>,
    pub embeddings_c: Option<PathBuf>,
    pub dictionary_ac: Option<PathBuf>,
    pub dictionary_ab: Option<PathBuf>,
    pub max_vocab: usize,
    pub normalization: Normalization,
    pub seed: u64,

    pub train_dict_size: usize,
    pub cv_dict_size: usize,
    pub query_size: usize,
    pub k_max: usize,
    pub relevance: RelevanceMode,
    /// Criterion that picks the candidates the ranker reorders.
    pub candidate_criterion: Criterion,
    /// Criterion of the deterministic baseline.
    pub criterion: Criterion,
    pub csls_k: usize,
    pub isf_beta: f64,

    pub wproc_batch_size: usize,
    pub wproc_epochs: usize,
    pub wproc_iters_per_epoch: usize,
    pub wproc_learning_rate: f64,
    pub wproc_init: Init,
    pub wproc_sample_top: usize,

    pub ltr_iterations: usize,
    pub ltr_batch_size: usize,
    pub ltr_learning_rate: f64,
    pub ltr_loss: LossKind,
    pub ltr_alpha: f64,
    pub ltr_group_size: usize,
    pub ltr_hidden: Vec<usize>,
    pub ltr_dropout: f64,
    pub ltr_eval_every: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let w = WProcConfig::default();
        let t = TrainConfig::default();
        PipelineConfig {
            lang_a: "a".into(),
            lang_b: "b".into(),
            lang_c: "c".into(),
            embeddings_a: None,
            embeddings_b: None,
            embeddings_c: None,
            dictionary_ac: None,
            dictionary_ab: None,
            max_vocab: 200_000,
            normalization: Normalization::CenterL2,
            seed: 0,
            train_dict_size: 5000,
            cv_dict_size: 1500,
            query_size: 10,
            k_max: 10,
            relevance: RelevanceMode::SemiBinary,
            candidate_criterion: Criterion::Nn,
            criterion: Criterion::Nn,
            csls_k: 10,
            isf_beta: 30.0,
            wproc_batch_size: w.batch_size,
            wproc_epochs: w.epochs,
            wproc_iters_per_epoch: w.iters_per_epoch,
            wproc_learning_rate: w.learning_rate,
            wproc_init: w.init,
            wproc_sample_top: w.sample_top,
            ltr_iterations: t.iterations,
            ltr_batch_size: t.batch_size,
            ltr_learning_rate: t.learning_rate,
            ltr_loss: t.loss,
            ltr_alpha: t.alpha,
            ltr_group_size: t.group_size,
            ltr_hidden: t.hidden,
            ltr_dropout: t.dropout_rate,
            ltr_eval_every: t.eval_every,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("bad value `{value}` for `{key}`")))
}

fn path_opt(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn path_text(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl PipelineConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "lang_a" => self.lang_a = v.into(),
            "lang_b" => self.lang_b = v.into(),
            "lang_c" => self.lang_c = v.into(),
            "embeddings_a" => self.embeddings_a = path_opt(v),
            "embeddings_b" => self.embeddings_b = path_opt(v),
            "embeddings_c" => self.embeddings_c = path_opt(v),
            "dictionary_ac" => self.dictionary_ac = path_opt(v),
            "dictionary_ab" => self.dictionary_ab = path_opt(v),
            "max_vocab" => self.max_vocab = parse(key, v)?,
            "normalization" => self.normalization = v.parse()?,
            "seed" => self.seed = parse(key, v)?,
            "train_dict_size" => self.train_dict_size = parse(key, v)?,
            "cv_dict_size" => self.cv_dict_size = parse(key, v)?,
            "query_size" => self.query_size = parse(key, v)?,
            "k_max" => self.k_max = parse(key, v)?,
            "relevance" => self.relevance = v.parse()?,
            "candidate_criterion" => self.candidate_criterion = v.parse()?,
            "criterion" => self.criterion = v.parse()?,
            "csls_k" => self.csls_k = parse(key, v)?,
            "isf_beta" => self.isf_beta = parse(key, v)?,
            "wproc_batch_size" => self.wproc_batch_size = parse(key, v)?,
            "wproc_epochs" => self.wproc_epochs = parse(key, v)?,
            "wproc_iters_per_epoch" => self.wproc_iters_per_epoch = parse(key, v)?,
            "wproc_learning_rate" => self.wproc_learning_rate = parse(key, v)?,
            "wproc_init" => self.wproc_init = v.parse()?,
            "wproc_sample_top" => self.wproc_sample_top = parse(key, v)?,
            "ltr_iterations" => self.ltr_iterations = parse(key, v)?,
            "ltr_batch_size" => self.ltr_batch_size = parse(key, v)?,
            "ltr_learning_rate" => self.ltr_learning_rate = parse(key, v)?,
            "ltr_loss" => self.ltr_loss = v.parse()?,
            "ltr_alpha" => self.ltr_alpha = parse(key, v)?,
            "ltr_group_size" => self.ltr_group_size = parse(key, v)?,
            "ltr_hidden" => {
                self.ltr_hidden = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse(key, s))
                    .collect::<Result<_>>()?
            }
            "ltr_dropout" => self.ltr_dropout = parse(key, v)?,
            "ltr_eval_every" => self.ltr_eval_every = parse(key, v)?,
            other => return Err(Error::invalid(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Every key with its current value, sorted by key.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let hidden: Vec<String> = self.ltr_hidden.iter().map(|h| h.to_string()).collect();
        let mut e = vec![
            ("lang_a", self.lang_a.clone()),
            ("lang_b", self.lang_b.clone()),
            ("lang_c", self.lang_c.clone()),
            ("embeddings_a", path_text(&self.embeddings_a)),
            ("embeddings_b", path_text(&self.embeddings_b)),
            ("embeddings_c", path_text(&self.embeddings_c)),
            ("dictionary_ac", path_text(&self.dictionary_ac)),
            ("dictionary_ab", path_text(&self.dictionary_ab)),
            ("max_vocab", self.max_vocab.to_string()),
            ("normalization", self.normalization.to_string()),
            ("seed", self.seed.to_string()),
            ("train_dict_size", self.train_dict_size.to_string()),
            ("cv_dict_size", self.cv_dict_size.to_string()),
            ("query_size", self.query_size.to_string()),
            ("k_max", self.k_max.to_string()),
            ("relevance", self.relevance.to_string()),
            ("candidate_criterion", self.candidate_criterion.to_string()),
            ("criterion", self.criterion.to_string()),
            ("csls_k", self.csls_k.to_string()),
            ("isf_beta", self.isf_beta.to_string()),
            ("wproc_batch_size", self.wproc_batch_size.to_string()),
            ("wproc_epochs", self.wproc_epochs.to_string()),
            ("wproc_iters_per_epoch", self.wproc_iters_per_epoch.to_string()),
            ("wproc_learning_rate", self.wproc_learning_rate.to_string()),
            ("wproc_init", self.wproc_init.to_string()),
            ("wproc_sample_top", self.wproc_sample_top.to_string()),
            ("ltr_iterations", self.ltr_iterations.to_string()),
            ("ltr_batch_size", self.ltr_batch_size.to_string()),
            ("ltr_learning_rate", self.ltr_learning_rate.to_string()),
            ("ltr_loss", self.ltr_loss.to_string()),
            ("ltr_alpha", self.ltr_alpha.to_string()),
            ("ltr_group_size", self.ltr_group_size.to_string()),
            ("ltr_hidden", hidden.join(",")),
            ("ltr_dropout", self.ltr_dropout.to_string()),
            ("ltr_eval_every", self.ltr_eval_every.to_string()),
        ];
        e.sort_by_key(|p| p.0);
        e
    }

    /// Sorted `key = value` lines.
    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Hex SHA-256 of [`PipelineConfig::to_text`].
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Parses `key = value` lines over the defaults; `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("line {}: expected `key = value`", i + 1)))?;
            cfg.set(k, v)
                .map_err(|e| Error::invalid(format!("line {}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|e| match e {
            Error::InvalidInput(m) => Error::parse(path, 0, m),
            other => other,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.query_size == 0 {
            return Err(Error::invalid("query_size must be at least 1"));
        }
        if self.train_dict_size == 0 {
            return Err(Error::invalid("train_dict_size must be positive"));
        }
        if self.csls_k == 0 {
            return Err(Error::invalid("csls_k must be positive"));
        }
        for lang in [&self.lang_a, &self.lang_b, &self.lang_c] {
            if lang.is_empty() || lang.contains(char::is_whitespace) {
                return Err(Error::invalid(format!("language tag `{lang}` must be a single word")));
            }
        }
        Ok(())
    }

    pub fn wproc(&self) -> WProcConfig {
        WProcConfig {
            batch_size: self.wproc_batch_size,
            epochs: self.wproc_epochs,
            iters_per_epoch: self.wproc_iters_per_epoch,
            learning_rate: self.wproc_learning_rate,
            seed: self.seed,
            init: self.wproc_init,
            sample_top: self.wproc_sample_top,
            ..WProcConfig::default()
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            iterations: self.ltr_iterations,
            batch_size: self.ltr_batch_size,
            learning_rate: self.ltr_learning_rate,
            loss: self.ltr_loss,
            alpha: self.ltr_alpha,
            loss_cutoff: self.query_size,
            group_size: self.ltr_group_size,
            hidden: self.ltr_hidden.clone(),
            dropout_rate: self.ltr_dropout,
            eval_every: self.ltr_eval_every,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }
}
