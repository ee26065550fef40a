use std::fmt;
use std::str::FromStr;

use crate::embeddings::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::pipeline::Lexicon;
use crate::retrieval::CandidateList;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RelevanceMode {
    /// Gold translations 1, everything else 0.
    Binary,
    /// Gold translations 2, everything else 1.
    #[default]
    SemiBinary,
    /// Grades `q−1..0` by closeness to the gold translations.
    ContinuousIntra,
}

impl fmt::Display for RelevanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelevanceMode::Binary => "binary",
            RelevanceMode::SemiBinary => "semi_binary",
            RelevanceMode::ContinuousIntra => "continuous_intra",
        })
    }
}

impl FromStr for RelevanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(RelevanceMode::Binary),
            "semi_binary" => Ok(RelevanceMode::SemiBinary),
            "continuous_intra" => Ok(RelevanceMode::ContinuousIntra),
            other => Err(Error::invalid(format!("unknown relevance mode `{other}`"))),
        }
    }
}

/// Relevance labels for the candidates of one query. `target` supplies the
/// vectors for [`RelevanceMode::ContinuousIntra`].
pub fn assign_relevance(
    list: &CandidateList,
    gold: &Lexicon,
    mode: RelevanceMode,
    target: &EmbeddingSpace,
) -> Result<Vec<u32>> {
    let golds = gold
        .translations(&list.source_word)
        .ok_or_else(|| Error::invalid(format!("`{}` has no gold translation", list.source_word)))?;
    let hit: Vec<bool> = list.candidates.iter().map(|c| golds.contains(&c.target)).collect();
    match mode {
        RelevanceMode::Binary => Ok(hit.iter().map(|&h| u32::from(h)).collect()),
        RelevanceMode::SemiBinary => Ok(hit.iter().map(|&h| 1 + u32::from(h)).collect()),
        RelevanceMode::ContinuousIntra => {
            let gold_rows: Vec<usize> = golds.iter().filter_map(|w| target.lookup(w)).collect();
            if gold_rows.is_empty() {
                return Err(Error::invalid(format!(
                    "no gold translation of `{}` is in the target vocabulary",
                    list.source_word
                )));
            }
            let unit = |r: usize| {
                let v = target.vector(r);
                let n = v.dot(&v).sqrt();
                (v, n)
            };
            let closeness: Vec<f64> = list
                .candidates
                .iter()
                .map(|c| {
                    let (v, nv) = unit(c.target_row);
                    gold_rows
                        .iter()
                        .map(|&g| {
                            let (u, nu) = unit(g);
                            if nu == 0.0 || nv == 0.0 {
                                -1.0
                            } else {
                                u.dot(&v) / (nu * nv)
                            }
                        })
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
            let q = list.len() as u32;
            let mut order: Vec<usize> = (0..list.len()).collect();
            order.sort_by(|&a, &b| closeness[b].total_cmp(&closeness[a]).then(a.cmp(&b)));
            let mut labels = vec![0; list.len()];
            for (r, &i) in order.iter().enumerate() {
                labels[i] = if hit[i] { q - 1 } else { q - 1 - r as u32 };
            }
            Ok(labels)
        }
    }
}
