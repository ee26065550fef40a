use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Lexicon;
use crate::error::{Error, Result};
use crate::retrieval::CandidateList;

/// A source word and its translations, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTranslations {
    pub source: String,
    pub translations: Vec<String>,
    pub scores: Vec<f64>,
}

impl From<&CandidateList> for RankedTranslations {
    fn from(list: &CandidateList) -> Self {
        RankedTranslations {
            source: list.source_word.clone(),
            translations: list.candidates.iter().map(|c| c.target.clone()).collect(),
            scores: list.candidates.iter().map(|c| c.score).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    /// Ranked lists handed to the evaluator.
    pub queries: usize,
    pub evaluated: usize,
    /// Source words the gold dictionary does not cover.
    pub missing_from_gold: usize,
    /// Source words none of whose gold translations are in the target vocabulary.
    pub gold_not_in_vocab: usize,
    pub hits_at_1: usize,
    pub hits_at_5: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BliScore {
    pub precision_at_1: f64,
    pub precision_at_5: f64,
    pub counts: EvalCounts,
}

/// Precision at 1 and 5: a list scores when any gold translation of its
/// source appears within the cutoff.
pub fn evaluate_bli(
    ranked: &[RankedTranslations],
    gold: &Lexicon,
    in_target_vocab: impl Fn(&str) -> bool,
) -> Result<BliScore> {
    let mut counts = EvalCounts {
        queries: ranked.len(),
        ..EvalCounts::default()
    };
    for r in ranked {
        let Some(golds) = gold.translations(&r.source) else {
            counts.missing_from_gold += 1;
            continue;
        };
        if !golds.iter().any(|g| in_target_vocab(g)) {
            counts.gold_not_in_vocab += 1;
            continue;
        }
        counts.evaluated += 1;
        let first_hit = r.translations.iter().position(|t| golds.contains(t));
        if first_hit == Some(0) {
            counts.hits_at_1 += 1;
        }
        if first_hit.is_some_and(|p| p < 5) {
            counts.hits_at_5 += 1;
        }
    }
    if counts.evaluated == 0 {
        return Err(Error::invalid(format!(
            "no evaluable query among {} ({} missing from gold, {} with out-of-vocabulary gold)",
            counts.queries, counts.missing_from_gold, counts.gold_not_in_vocab
        )));
    }
    let n = counts.evaluated as f64;
    Ok(BliScore {
        precision_at_1: counts.hits_at_1 as f64 / n,
        precision_at_5: counts.hits_at_5 as f64 / n,
        counts,
    })
}

/// `source<TAB>word1<TAB>score1<TAB>…`, the layout of candidate files.
pub fn write_ranked_tsv(ranked: &[RankedTranslations], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        for r in ranked {
            write!(w, "{}", r.source)?;
            for (t, s) in r.translations.iter().zip(&r.scores) {
                write!(w, "\t{t}\t{s}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn read_ranked_tsv(path: impl AsRef<Path>) -> Result<Vec<RankedTranslations>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() % 2 == 0 {
            return Err(Error::parse(path, i + 1, "expected a word then word/score pairs"));
        }
        let mut r = RankedTranslations {
            source: fields[0].to_string(),
            translations: Vec::new(),
            scores: Vec::new(),
        };
        for pair in fields[1..].chunks(2) {
            let score = pair[1]
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad score `{}`", pair[1])))?;
            r.translations.push(pair[0].to_string());
            r.scores.push(score);
        }
        out.push(r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranked(source: &str, words: &[&str]) -> RankedTranslations {
        RankedTranslations {
            source: source.into(),
            translations: words.iter().map(|w| w.to_string()).collect(),
            scores: (0..words.len()).map(|i| -(i as f64)).collect(),
        }
    }

    fn gold() -> Lexicon {
        let mut g = Lexicon::new("a", "b");
        for (s, t) in [
            ("one", "uno"),
            ("two", "dos"),
            ("three", "tres"),
            ("four", "cuatro"),
            ("four", "quatro"),
        ] {
            g.insert(s, t);
        }
        g
    }

    #[test]
    fn four_word_fixture() {
        let lists = [
            ranked("one", &["uno", "x"]),
            ranked("two", &["x", "dos"]),
            ranked("three", &["x", "y"]),
            ranked("four", &["quatro"]),
        ];
        let s = evaluate_bli(&lists, &gold(), |_| true).unwrap();
        assert_eq!(s.precision_at_1, 0.5);
        assert_eq!(s.precision_at_5, 0.75);
        assert_eq!(s.counts.evaluated, 4);
    }

    #[test]
    fn exclusions_are_counted_apart() {
        let lists = [
            ranked("one", &["uno"]),
            ranked("zzz", &["uno"]),
            ranked("two", &["dos"]),
        ];
        let s = evaluate_bli(&lists, &gold(), |w| w != "dos").unwrap();
        let c = &s.counts;
        assert_eq!((c.evaluated, c.missing_from_gold, c.gold_not_in_vocab), (1, 1, 1));
        assert_eq!(c.evaluated + c.missing_from_gold + c.gold_not_in_vocab, c.queries);
        assert_eq!(s.precision_at_1, 1.0);
    }

    #[test]
    fn nothing_evaluable_is_an_error() {
        assert!(evaluate_bli(&[ranked("zzz", &["a"])], &gold(), |_| true).is_err());
        assert!(evaluate_bli(&[], &gold(), |_| true).is_err());
    }

    #[test]
    fn hit_beyond_five_is_missed() {
        let lists = [ranked("one", &["a", "b", "c", "d", "e", "uno"])];
        let s = evaluate_bli(&lists, &gold(), |_| true).unwrap();
        assert_eq!((s.precision_at_1, s.precision_at_5), (0.0, 0.0));
    }

    #[test]
    fn tsv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ranked.tsv");
        let lists = vec![ranked("one", &["uno", "x"]), ranked("two", &[])];
        write_ranked_tsv(&lists, &p).unwrap();
        assert_eq!(read_ranked_tsv(&p).unwrap(), lists);
    }

    proptest::proptest! {
        #[test]
        fn p5_dominates_p1(hits in proptest::collection::vec(0usize..8, 1..30)) {
            let mut g = Lexicon::new("a", "b");
            let lists: Vec<_> = hits
                .iter()
                .enumerate()
                .map(|(i, &pos)| {
                    let src = format!("s{i}");
                    g.insert(&src, &format!("g{i}"));
                    let words: Vec<String> = (0..7)
                        .map(|j| if j == pos { format!("g{i}") } else { format!("w{j}") })
                        .collect();
                    let refs: Vec<&str> = words.iter().map(String::as_str).collect();
                    ranked(&src, &refs)
                })
                .collect();
            let s = evaluate_bli(&lists, &g, |_| true).unwrap();
            proptest::prop_assert!(s.precision_at_5 >= s.precision_at_1);
            proptest::prop_assert!((0.0..=1.0).contains(&s.precision_at_1));
        }
    }
}
