use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{AlignedPair, CandidateList, NeighborhoodStats};
use crate::error::{Error, Result};

/// `[cosine, CSLS with K=1, …, CSLS with K=k_max]` for one candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn feature_names(k_max: usize) -> Vec<String> {
    std::iter::once("cosine".to_string())
        .chain((1..=k_max).map(|k| format!("csls_{k}")))
        .collect()
}

/// Features of every candidate in `list`, in list order. `stats[i]` must hold
/// the neighbourhood means for `K = i + 1`.
pub fn extract_features(
    list: &CandidateList,
    pair: &AlignedPair<'_>,
    stats: &[NeighborhoodStats],
) -> Result<Vec<FeatureVector>> {
    for (i, st) in stats.iter().enumerate() {
        if st.k != i + 1 {
            return Err(Error::invalid(format!(
                "neighbourhood stats out of order: slot {} holds K={}",
                i + 1,
                st.k
            )));
        }
        if st.r_source.len() != pair.source.len() || st.r_target.len() != pair.target.len() {
            return Err(Error::invalid(format!(
                "stats for K={} do not cover the vocabularies",
                st.k
            )));
        }
    }
    let s = list.source_row;
    if !pair.source_valid().get(s).copied().unwrap_or(false) {
        return Err(Error::invalid(format!(
            "source word `{}` has no usable vector",
            list.source_word
        )));
    }
    list.candidates
        .iter()
        .map(|c| {
            let t = c.target_row;
            if !pair.target_valid().get(t).copied().unwrap_or(false) {
                return Err(Error::invalid(format!("candidate `{}` has no usable vector", c.target)));
            }
            let cos = pair.cosine(s, t);
            let mut values = Vec::with_capacity(1 + stats.len());
            values.push(cos);
            values.extend(stats.iter().map(|st| 2.0 * cos - st.r_source[s] - st.r_target[t]));
            Ok(FeatureVector { values })
        })
        .collect()
}

/// One row per candidate: `query,candidate,label,cosine,csls_1,…`.
pub fn write_feature_csv(
    path: impl AsRef<Path>,
    lists: &[CandidateList],
    features: &[Vec<FeatureVector>],
    labels: &[Vec<u32>],
    k_max: usize,
) -> Result<()> {
    let path = path.as_ref();
    if lists.len() != features.len() || lists.len() != labels.len() {
        return Err(Error::invalid("lists, features and labels differ in length"));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "query,candidate,label,{}", feature_names(k_max).join(","))?;
        for ((list, fv), ls) in lists.iter().zip(features).zip(labels) {
            for ((c, f), l) in list.candidates.iter().zip(fv).zip(ls) {
                write!(w, "{},{},{}", list.source_word, c.target, l)?;
                for v in &f.values {
                    write!(w, ",{v}")?;
                }
                writeln!(w)?;
            }
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}
