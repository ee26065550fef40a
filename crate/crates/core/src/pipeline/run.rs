use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;

use super::{
    evaluate_bli, load_dictionary, split_dictionary, write_ranked_tsv, Lexicon, PipelineConfig, RankedTranslations,
};
use crate::alignment::{wasserstein_procrustes, AlignmentMap, ConvergenceLog};
use crate::embeddings::{load_embeddings, EmbeddingSpace};
use crate::error::{Error, Result, ResultExt};
use crate::ltr::{assign_relevance, train, RankerModel, RankingQuery, ScoreMode, TrainingReport};
use crate::retrieval::{
    extract_features, generate_candidates, AlignedPair, CandidateList, FeatureVector, NeighborhoodStats,
    NeighborhoodTable, Scoring,
};

/// What a run reports: precisions are absent when no gold dictionary was
/// supplied for the evaluated pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InductionResult {
    pub precision_at_1: Option<f64>,
    pub precision_at_5: Option<f64>,
    pub counts: BTreeMap<String, usize>,
    pub config_hash: String,
}

impl InductionResult {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("result serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// Reads embeddings and applies the configured normalization.
pub fn load_space(path: impl AsRef<Path>, lang: &str, cfg: &PipelineConfig) -> Result<EmbeddingSpace> {
    let (space, report) = load_embeddings(path.as_ref(), lang, cfg.max_vocab)?;
    log::info!(
        "{lang}: {} words, {} dims ({} malformed rows skipped)",
        space.len(),
        space.dim(),
        report.malformed_lines.len()
    );
    let (space, norm) = space.normalized(cfg.normalization);
    if !norm.zero_rows.is_empty() {
        log::warn!("{lang}: {} zero vectors will never be retrieved", norm.zero_rows.len());
    }
    Ok(space)
}

/// Embeddings and dictionaries named by a config.
#[derive(Debug, Clone)]
pub struct RubiInputs {
    pub a: EmbeddingSpace,
    pub b: EmbeddingSpace,
    pub c: EmbeddingSpace,
    pub gold_ac: Lexicon,
    pub gold_ab: Option<Lexicon>,
}

impl RubiInputs {
    pub fn load(cfg: &PipelineConfig) -> Result<Self> {
        let need = |p: &Option<std::path::PathBuf>, key: &str| {
            p.clone()
                .ok_or_else(|| Error::invalid(format!("config key `{key}` is required")))
        };
        let a = load_space(need(&cfg.embeddings_a, "embeddings_a")?, &cfg.lang_a, cfg)?;
        let b = load_space(need(&cfg.embeddings_b, "embeddings_b")?, &cfg.lang_b, cfg)?;
        let c = load_space(need(&cfg.embeddings_c, "embeddings_c")?, &cfg.lang_c, cfg)?;
        let (gold_ac, _) = load_dictionary(need(&cfg.dictionary_ac, "dictionary_ac")?, &cfg.lang_a, &cfg.lang_c)?;
        let gold_ab = match &cfg.dictionary_ab {
            Some(p) => Some(load_dictionary(p, &cfg.lang_a, &cfg.lang_b)?.0),
            None => None,
        };
        Ok(RubiInputs {
            a,
            b,
            c,
            gold_ac,
            gold_ab,
        })
    }
}

/// Unsupervised alignment of `source` onto `target`.
pub fn align_spaces(
    source: &EmbeddingSpace,
    target: &EmbeddingSpace,
    cfg: &PipelineConfig,
) -> Result<(AlignmentMap, ConvergenceLog)> {
    wasserstein_procrustes(source, target, &cfg.wproc())
}

/// Candidates, features and labels for a batch of source words.
#[derive(Debug, Clone)]
pub struct QuerySet {
    pub lists: Vec<CandidateList>,
    pub features: Vec<Vec<FeatureVector>>,
    pub labels: Vec<Vec<u32>>,
    /// Source words whose candidates contain a gold translation.
    pub gold_in_candidates: usize,
    /// Source words left out because relevance could not be assigned.
    pub skipped: usize,
}

impl QuerySet {
    pub fn queries(&self) -> Result<Vec<RankingQuery>> {
        self.lists
            .iter()
            .zip(&self.features)
            .zip(&self.labels)
            .map(|((list, fv), labels)| {
                let dim = fv.first().map_or(0, FeatureVector::len);
                let flat: Vec<f64> = fv.iter().flat_map(|f| f.values.iter().copied()).collect();
                let x = Array2::from_shape_vec((fv.len(), dim), flat)
                    .map_err(|e| Error::invalid(format!("ragged features for `{}`: {e}", list.source_word)))?;
                RankingQuery::new(list.source_word.clone(), x, labels.clone())?
                    .with_items(list.candidates.iter().map(|c| c.target.clone()).collect())
            })
            .collect()
    }
}

/// Neighbourhood means for `K = 1..=k_max`; empty when `k_max` is 0.
pub fn feature_stats(pair: &AlignedPair<'_>, k_max: usize) -> Result<Vec<NeighborhoodStats>> {
    if k_max == 0 {
        return Ok(Vec::new());
    }
    Ok(NeighborhoodTable::compute(pair, k_max)?.all_stats())
}

/// Builds the queries for `source_rows`. Without `gold` every label is 0.
pub fn build_queries(
    pair: &AlignedPair<'_>,
    source_rows: &[usize],
    scoring: &Scoring,
    stats: &[NeighborhoodStats],
    gold: Option<&Lexicon>,
    cfg: &PipelineConfig,
) -> Result<QuerySet> {
    let lists = generate_candidates(pair, source_rows, cfg.query_size, scoring)?;
    featurize_lists(pair, lists, stats, gold, cfg)
}

/// Labels and featurizes existing candidate lists.
pub fn featurize_lists(
    pair: &AlignedPair<'_>,
    lists: Vec<CandidateList>,
    stats: &[NeighborhoodStats],
    gold: Option<&Lexicon>,
    cfg: &PipelineConfig,
) -> Result<QuerySet> {
    let mut set = QuerySet {
        lists: Vec::with_capacity(lists.len()),
        features: Vec::with_capacity(lists.len()),
        labels: Vec::with_capacity(lists.len()),
        gold_in_candidates: 0,
        skipped: 0,
    };
    for list in lists {
        let labels = match gold {
            None => vec![0; list.len()],
            Some(g) => match assign_relevance(&list, g, cfg.relevance, pair.target) {
                Ok(l) => l,
                Err(e) => {
                    log::debug!("skipping `{}`: {e}", list.source_word);
                    set.skipped += 1;
                    continue;
                }
            },
        };
        if let Some(g) = gold {
            if list
                .candidates
                .iter()
                .any(|c| g.is_translation(&list.source_word, &c.target))
            {
                set.gold_in_candidates += 1;
            }
        }
        set.features.push(extract_features(&list, pair, stats)?);
        set.labels.push(labels);
        set.lists.push(list);
    }
    Ok(set)
}

/// Reorders each query's candidates by the model's scores, best first.
pub fn rank_queries(model: &RankerModel, queries: &[RankingQuery]) -> Result<Vec<RankedTranslations>> {
    queries
        .iter()
        .map(|q| {
            let scores = model.score_query(q, ScoreMode::Eval)?;
            let order = crate::ltr::ranking_from_scores(&scores);
            Ok(RankedTranslations {
                source: q.query_id.clone(),
                translations: order.iter().map(|&i| q.items[i].clone()).collect(),
                scores: order.iter().map(|&i| scores[i]).collect(),
            })
        })
        .collect()
}

/// Rows of `space` to translate: the gold sources present, most frequent
/// first, or else the `n` most frequent words. Zero vectors are dropped.
pub fn query_rows(
    space: &EmbeddingSpace,
    gold: Option<&Lexicon>,
    n: usize,
    counts: &mut BTreeMap<String, usize>,
) -> Vec<usize> {
    let zero: std::collections::HashSet<usize> = space.zero_rows().into_iter().collect();
    let rows: Vec<usize> = match gold {
        Some(g) => {
            let present = g.sources_by_frequency(space);
            counts.insert("source_not_in_vocab".into(), g.len() - present.len());
            present.into_iter().map(|(r, _)| r).collect()
        }
        None => (0..space.len()).filter(|r| !zero.contains(r)).take(n).collect(),
    };
    let kept: Vec<usize> = rows.iter().copied().filter(|r| !zero.contains(r)).collect();
    counts.insert("source_zero_vector".into(), rows.len() - kept.len());
    kept
}

/// Scores ranked lists against `gold`, when given, into a result.
pub fn summarize(
    ranked: &[RankedTranslations],
    gold: Option<&Lexicon>,
    in_target_vocab: impl Fn(&str) -> bool,
    mut counts: BTreeMap<String, usize>,
    cfg: &PipelineConfig,
) -> Result<InductionResult> {
    let (p1, p5) = match gold {
        Some(g) => {
            let s = evaluate_bli(ranked, g, in_target_vocab)?;
            let c = s.counts;
            counts.extend([
                ("queries".to_string(), c.queries),
                ("evaluated".to_string(), c.evaluated),
                ("missing_from_gold".to_string(), c.missing_from_gold),
                ("gold_not_in_vocab".to_string(), c.gold_not_in_vocab),
                ("hits_at_1".to_string(), c.hits_at_1),
                ("hits_at_5".to_string(), c.hits_at_5),
            ]);
            (Some(s.precision_at_1), Some(s.precision_at_5))
        }
        None => {
            counts.insert("queries".into(), ranked.len());
            (None, None)
        }
    };
    Ok(InductionResult {
        precision_at_1: p1,
        precision_at_5: p5,
        counts,
        config_hash: cfg.config_hash(),
    })
}

/// Everything a learned induction run produces.
#[derive(Debug, Clone)]
pub struct RubiRun {
    pub result: InductionResult,
    pub ranked: Vec<RankedTranslations>,
    pub map_ac: AlignmentMap,
    pub log_ac: ConvergenceLog,
    pub map_ab: AlignmentMap,
    pub log_ab: ConvergenceLog,
    pub model: RankerModel,
    pub report: TrainingReport,
    /// Precision at 1 of the ranker on its own A–C training queries.
    pub train_precision_at_1: f64,
}

/// Learns a ranker on the supervised pair A–C and applies it to the
/// unsupervised pair A–B.
pub fn run_rubi(cfg: &PipelineConfig, inputs: &RubiInputs) -> Result<RubiRun> {
    cfg.validate()?;
    let RubiInputs {
        a,
        b,
        c,
        gold_ac,
        gold_ab,
    } = inputs;
    let mut counts = BTreeMap::new();

    let (map_ac, log_ac) = align_spaces(a, c, cfg).stage("align A-C")?;

    let (train_dict, cv_dict, split) = split_dictionary(gold_ac, a, cfg.train_dict_size, cfg.cv_dict_size);
    counts.insert("train_dict_missing_from_vocab".into(), split.missing_from_vocab);
    if train_dict.is_empty() {
        return Err(Error::invalid("no A-C dictionary source word is in the A vocabulary").in_stage("split"));
    }

    let (train_q, cv_q) = {
        let pair = AlignedPair::new(&map_ac, a, c)?;
        let scoring =
            Scoring::prepare(cfg.candidate_criterion, &pair, cfg.csls_k, cfg.isf_beta).stage("featurize A-C")?;
        let stats = feature_stats(&pair, cfg.k_max).stage("featurize A-C")?;
        let mut sets = Vec::with_capacity(2);
        for (name, dict) in [("train", &train_dict), ("cv", &cv_dict)] {
            let rows: Vec<usize> = query_rows(a, Some(dict), 0, &mut BTreeMap::new());
            let set = build_queries(&pair, &rows, &scoring, &stats, Some(dict), cfg).stage("featurize A-C")?;
            counts.insert(format!("{name}_queries"), set.lists.len());
            counts.insert(format!("{name}_gold_in_candidates"), set.gold_in_candidates);
            counts.insert(format!("{name}_skipped"), set.skipped);
            sets.push(set.queries()?);
        }
        let cv = sets.pop().expect("two sets");
        (sets.pop().expect("two sets"), cv)
    };
    if train_q.is_empty() {
        return Err(Error::invalid("no training query could be labelled").in_stage("featurize A-C"));
    }

    let (model, report) = train(&train_q, &cfg.train(), &cv_q).stage("train")?;
    counts.insert("train_dropped_all_zero".into(), report.dropped_train);
    counts.insert("cv_dropped_all_zero".into(), report.dropped_cv);
    let train_precision_at_1 = evaluate_bli(&rank_queries(&model, &train_q)?, &train_dict, |w| c.lookup(w).is_some())
        .stage("train")?
        .precision_at_1;

    let (map_ab, log_ab) = align_spaces(a, b, cfg).stage("align A-B")?;
    let pair = AlignedPair::new(&map_ab, a, b)?;
    let scoring = Scoring::prepare(cfg.candidate_criterion, &pair, cfg.csls_k, cfg.isf_beta).stage("featurize A-B")?;
    let stats = feature_stats(&pair, cfg.k_max).stage("featurize A-B")?;
    let rows = query_rows(a, gold_ab.as_ref(), cfg.train_dict_size, &mut counts);
    let set = build_queries(&pair, &rows, &scoring, &stats, None, cfg).stage("featurize A-B")?;
    let ranked = rank_queries(&model, &set.queries()?).stage("predict")?;
    let result = summarize(&ranked, gold_ab.as_ref(), |w| b.lookup(w).is_some(), counts, cfg).stage("evaluate")?;

    Ok(RubiRun {
        result,
        ranked,
        map_ac,
        log_ac,
        map_ab,
        log_ab,
        model,
        report,
        train_precision_at_1,
    })
}

/// A deterministic retrieval run.
#[derive(Debug, Clone)]
pub struct BaselineRun {
    pub result: InductionResult,
    pub ranked: Vec<RankedTranslations>,
}

/// Ranks translations of A words in B with `cfg.criterion` under an
/// existing map.
pub fn rank_baseline(
    cfg: &PipelineConfig,
    map: &AlignmentMap,
    a: &EmbeddingSpace,
    b: &EmbeddingSpace,
    gold_ab: Option<&Lexicon>,
) -> Result<BaselineRun> {
    cfg.validate()?;
    let mut counts = BTreeMap::new();
    let pair = AlignedPair::new(map, a, b)?;
    let scoring = Scoring::prepare(cfg.criterion, &pair, cfg.csls_k, cfg.isf_beta).stage("baseline")?;
    let rows = query_rows(a, gold_ab, cfg.train_dict_size, &mut counts);
    let lists = generate_candidates(&pair, &rows, cfg.query_size, &scoring).stage("baseline")?;
    let ranked: Vec<RankedTranslations> = lists.iter().map(RankedTranslations::from).collect();
    let result = summarize(&ranked, gold_ab, |w| b.lookup(w).is_some(), counts, cfg).stage("evaluate")?;
    Ok(BaselineRun { result, ranked })
}

/// Aligns A onto B and ranks with `cfg.criterion`.
pub fn run_baseline(
    cfg: &PipelineConfig,
    a: &EmbeddingSpace,
    b: &EmbeddingSpace,
    gold_ab: Option<&Lexicon>,
) -> Result<(BaselineRun, AlignmentMap)> {
    let (map, _) = align_spaces(a, b, cfg).stage("align A-B")?;
    Ok((rank_baseline(cfg, &map, a, b, gold_ab)?, map))
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config_hash: &'a str,
    seed: u64,
    files: Vec<&'static str>,
}

/// Writes every artifact of `run` into `dir`.
pub fn write_run_dir(dir: impl AsRef<Path>, cfg: &PipelineConfig, run: &RubiRun) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    cfg.save(dir.join("config.txt"))?;
    run.map_ac.save(dir.join("map_ac.txt"))?;
    run.map_ab.save(dir.join("map_ab.txt"))?;
    run.log_ac.save(dir.join("convergence_ac.csv"))?;
    run.log_ab.save(dir.join("convergence_ab.csv"))?;
    run.model.save(dir.join("model.txt"))?;
    run.report.save(dir.join("training.csv"))?;
    write_ranked_tsv(&run.ranked, dir.join("predictions.tsv"))?;
    run.result.save(dir.join("results.json"))?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config_hash: &run.result.config_hash,
        seed: cfg.seed,
        files: vec![
            "config.txt",
            "map_ac.txt",
            "map_ab.txt",
            "convergence_ac.csv",
            "convergence_ab.csv",
            "model.txt",
            "training.csv",
            "predictions.tsv",
            "results.json",
        ],
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{SyntheticConfig, SyntheticTriple};

    fn small() -> (PipelineConfig, RubiInputs) {
        let t = SyntheticTriple::generate(
            &SyntheticConfig {
                n: 300,
                d: 12,
                ..SyntheticConfig::default()
            },
            5,
        );
        let mut cfg = PipelineConfig::default();
        for (k, v) in [
            ("seed", "11"),
            ("train_dict_size", "150"),
            ("cv_dict_size", "50"),
            ("k_max", "4"),
            ("wproc_batch_size", "100"),
            ("wproc_epochs", "2"),
            ("wproc_iters_per_epoch", "100"),
            ("ltr_iterations", "300"),
            ("ltr_batch_size", "8"),
            ("ltr_hidden", "8"),
            ("ltr_group_size", "2"),
            ("ltr_dropout", "0"),
            ("ltr_eval_every", "100"),
        ] {
            cfg.set(k, v).unwrap();
        }
        let inputs = RubiInputs {
            a: t.a,
            b: t.b,
            c: t.c,
            gold_ac: t.gold_ac,
            gold_ab: Some(t.gold_ab),
        };
        (cfg, inputs)
    }

    #[test]
    fn rubi_runs_end_to_end_and_repeats() {
        let (cfg, inputs) = small();
        let run = run_rubi(&cfg, &inputs).unwrap();
        let c = &run.result.counts;
        assert_eq!(c["train_queries"], 150);
        assert_eq!(c["cv_queries"], 50);
        assert_eq!(c["queries"], 300);
        assert_eq!(
            c["evaluated"] + c["missing_from_gold"] + c["gold_not_in_vocab"],
            c["queries"]
        );
        let p1 = run.result.precision_at_1.unwrap();
        assert!(p1 > 0.9, "p@1 {p1}");
        assert!(run.result.precision_at_5.unwrap() >= p1);
        assert!(run.ranked.iter().all(|r| r.translations.len() == cfg.query_size));

        let again = run_rubi(&cfg, &inputs).unwrap();
        assert_eq!(again.result, run.result);
        assert_eq!(again.ranked, run.ranked);
    }

    #[test]
    fn baseline_without_gold_reports_no_precision() {
        let (cfg, inputs) = small();
        let map = AlignmentMap::identity(inputs.a.dim(), "a", "b");
        let run = rank_baseline(&cfg, &map, &inputs.a, &inputs.b, None).unwrap();
        assert_eq!(run.result.precision_at_1, None);
        assert_eq!(run.ranked.len(), 150);
        let json: serde_json::Value = serde_json::from_str(&run.result.to_json()).unwrap();
        for key in ["precision_at_1", "precision_at_5", "counts", "config_hash"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn missing_config_paths_are_input_errors() {
        let err = RubiInputs::load(&PipelineConfig::default()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
