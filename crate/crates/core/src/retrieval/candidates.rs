use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::s;
use rayon::prelude::*;

use super::{top_k_indices, AlignedPair, IsfPartition, NeighborhoodStats, NeighborhoodTable};
use crate::embeddings::EmbeddingSpace;
use crate::error::{Error, Result};

/// Deterministic retrieval criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Criterion {
    #[default]
    Nn,
    Csls,
    Isf,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Nn => "nn",
            Criterion::Csls => "csls",
            Criterion::Isf => "isf",
        })
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nn" => Ok(Criterion::Nn),
            "csls" => Ok(Criterion::Csls),
            "isf" => Ok(Criterion::Isf),
            other => Err(Error::invalid(format!("unknown criterion `{other}` (nn, csls, isf)"))),
        }
    }
}

/// A criterion together with whatever it precomputes over the vocabularies.
#[derive(Debug, Clone)]
pub enum Scoring {
    Nn,
    Csls(NeighborhoodStats),
    Isf(IsfPartition),
}

impl Scoring {
    /// `k` is the CSLS neighbourhood size, `beta` the inverted softmax
    /// temperature; each is ignored by the other criteria.
    pub fn prepare(criterion: Criterion, pair: &AlignedPair<'_>, k: usize, beta: f64) -> Result<Self> {
        Ok(match criterion {
            Criterion::Nn => Scoring::Nn,
            Criterion::Csls => Scoring::Csls(NeighborhoodTable::compute(pair, k)?.stats(k)?),
            Criterion::Isf => Scoring::Isf(IsfPartition::compute(pair, beta)?),
        })
    }

    pub fn criterion(&self) -> Criterion {
        match self {
            Scoring::Nn => Criterion::Nn,
            Scoring::Csls(_) => Criterion::Csls,
            Scoring::Isf(_) => Criterion::Isf,
        }
    }

    #[inline]
    fn score(&self, cos: f64, s: usize, t: usize) -> f64 {
        match self {
            Scoring::Nn => cos,
            Scoring::Csls(st) => 2.0 * cos - st.r_source[s] - st.r_target[t],
            Scoring::Isf(p) => (p.beta * cos - p.log_z[t]).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub target: String,
    pub target_row: usize,
    pub score: f64,
}

/// One source word and its best-scoring target words, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateList {
    pub source_word: String,
    pub source_row: usize,
    pub candidates: Vec<Candidate>,
}

impl CandidateList {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn top(&self) -> Option<&Candidate> {
        self.candidates.first()
    }
}

/// Top-`q` target words for each source row under `scoring`.
pub fn generate_candidates(
    pair: &AlignedPair<'_>,
    source_rows: &[usize],
    q: usize,
    scoring: &Scoring,
) -> Result<Vec<CandidateList>> {
    if q == 0 {
        return Err(Error::invalid("query size must be at least 1"));
    }
    let pool = pair.target_valid().iter().filter(|&&v| v).count();
    if q > pool {
        return Err(Error::invalid(format!(
            "query size {q} exceeds the {pool} usable target words"
        )));
    }
    for &s in source_rows {
        match pair.source_valid().get(s) {
            None => return Err(Error::invalid(format!("source row {s} out of range"))),
            Some(false) => {
                return Err(Error::invalid(format!(
                    "source word `{}` has a zero vector",
                    pair.source.word(s)
                )))
            }
            Some(true) => {}
        }
    }
    let step = pair.rows_per_tile(pair.target.len());
    let mapped = pair.mapped();
    let targets = pair.target_unit();
    let valid = pair.target_valid();
    let tiles: Vec<Vec<CandidateList>> = source_rows
        .par_chunks(step)
        .map(|rows| {
            let block = mapped.select(ndarray::Axis(0), rows).dot(&targets.t());
            rows.iter()
                .enumerate()
                .map(|(r, &s)| {
                    let cos = block.slice(s![r, ..]);
                    let scores: Vec<f64> = cos.iter().enumerate().map(|(t, &c)| scoring.score(c, s, t)).collect();
                    let candidates = top_k_indices(&scores, q, |t| valid[t])
                        .into_iter()
                        .map(|(t, score)| Candidate {
                            target: pair.target.word(t).to_string(),
                            target_row: t,
                            score,
                        })
                        .collect();
                    CandidateList {
                        source_word: pair.source.word(s).to_string(),
                        source_row: s,
                        candidates,
                    }
                })
                .collect()
        })
        .collect();
    Ok(tiles.concat())
}

/// How many lists rank each target row first.
pub fn top1_in_degree(lists: &[CandidateList], n_target: usize) -> Vec<usize> {
    let mut counts = vec![0; n_target];
    for c in lists.iter().filter_map(CandidateList::top) {
        counts[c.target_row] += 1;
    }
    counts
}

/// `source<TAB>cand1<TAB>score1<TAB>…`, one list per line.
pub fn write_candidates_tsv(lists: &[CandidateList], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        for list in lists {
            write!(w, "{}", list.source_word)?;
            for c in &list.candidates {
                write!(w, "\t{}\t{}", c.target, c.score)?;
            }
            writeln!(w)?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Reads lists written by [`write_candidates_tsv`], resolving words in the
/// given spaces.
pub fn read_candidates_tsv(
    path: impl AsRef<Path>,
    source: &EmbeddingSpace,
    target: &EmbeddingSpace,
) -> Result<Vec<CandidateList>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let bad = |m: String| Error::parse(path, i + 1, m);
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 || fields.len() % 2 == 0 {
            return Err(bad(format!(
                "expected a word then word/score pairs, got {} fields",
                fields.len()
            )));
        }
        let source_row = source
            .lookup(fields[0])
            .ok_or_else(|| bad(format!("`{}` not in the source vocabulary", fields[0])))?;
        let mut candidates = Vec::with_capacity(fields.len() / 2);
        for pair in fields[1..].chunks(2) {
            let target_row = target
                .lookup(pair[0])
                .ok_or_else(|| bad(format!("`{}` not in the target vocabulary", pair[0])))?;
            let score: f64 = pair[1].parse().map_err(|_| bad(format!("bad score `{}`", pair[1])))?;
            candidates.push(Candidate {
                target: pair[0].to_string(),
                target_row,
                score,
            });
        }
        out.push(CandidateList {
            source_word: fields[0].to_string(),
            source_row,
            candidates,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::AlignmentMap;
    use crate::embeddings::{normalize, Normalization};
    use crate::synthetic::{HubCloud, IsometricPair, SyntheticConfig};
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_space(lang: &str, n: usize, d: usize, seed: u64) -> EmbeddingSpace {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Array2::from_shape_fn((n, d), |_| rng.sample(StandardNormal));
        let words = (0..n).map(|i| format!("{lang}{i}")).collect();
        normalize(EmbeddingSpace::new(lang, words, m).unwrap(), Normalization::L2).0
    }

    #[test]
    fn exact_alignment_recovers_translations() {
        let cfg = SyntheticConfig {
            n: 500,
            d: 20,
            noise: 0.0,
            ..Default::default()
        };
        let pair = IsometricPair::generate(&cfg, 4);
        // the true rotation, fitted on gold pairs
        let rows: Vec<(usize, usize)> = pair.gold.iter().copied().enumerate().collect();
        let map = crate::alignment::procrustes_map(&pair.source, &pair.target, &rows).unwrap();
        let ap = AlignedPair::new(&map, &pair.source, &pair.target).unwrap();
        let all: Vec<usize> = (0..cfg.n).collect();
        let lists = generate_candidates(&ap, &all, 1, &Scoring::Nn).unwrap();
        let hits = lists
            .iter()
            .filter(|l| l.candidates[0].target_row == pair.gold[l.source_row])
            .count();
        assert!(hits as f64 >= 0.99 * cfg.n as f64, "{hits}");
    }

    #[test]
    fn full_ranking_and_determinism() {
        let x = random_space("x", 30, 5, 1);
        let y = random_space("y", 25, 5, 2);
        let map = AlignmentMap::identity(5, "x", "y");
        let ap = AlignedPair::new(&map, &x, &y).unwrap();
        let rows: Vec<usize> = (0..30).collect();
        let a = generate_candidates(&ap, &rows, 25, &Scoring::Nn).unwrap();
        for l in &a {
            let mut seen: Vec<usize> = l.candidates.iter().map(|c| c.target_row).collect();
            assert!(l.candidates.windows(2).all(|w| w[0].score >= w[1].score));
            seen.sort();
            assert_eq!(seen, (0..25).collect::<Vec<_>>());
        }
        let b = generate_candidates(&ap, &rows, 25, &Scoring::Nn).unwrap();
        assert_eq!(a, b);
        let c = generate_candidates(&ap.clone().with_tile_rows(3), &rows, 25, &Scoring::Nn).unwrap();
        assert_eq!(a, c);
        assert!(generate_candidates(&ap, &rows, 26, &Scoring::Nn).is_err());
        assert!(generate_candidates(&ap, &rows, 0, &Scoring::Nn).is_err());
    }

    #[test]
    fn csls_and_isf_tiling_independent() {
        let x = random_space("x", 40, 6, 3);
        let y = random_space("y", 45, 6, 4);
        let map = AlignmentMap::identity(6, "x", "y");
        let rows: Vec<usize> = (0..40).rev().collect();
        for crit in [Criterion::Csls, Criterion::Isf] {
            let wide = AlignedPair::new(&map, &x, &y).unwrap();
            let narrow = AlignedPair::new(&map, &x, &y).unwrap().with_tile_rows(2);
            let sw = Scoring::prepare(crit, &wide, 4, 30.0).unwrap();
            let sn = Scoring::prepare(crit, &narrow, 4, 30.0).unwrap();
            assert_eq!(
                generate_candidates(&wide, &rows, 5, &sw).unwrap(),
                generate_candidates(&narrow, &rows, 5, &sn).unwrap()
            );
        }
    }

    #[test]
    fn cosine_and_euclidean_rank_alike() {
        let x = random_space("x", 20, 4, 5);
        let y = random_space("y", 30, 4, 6);
        let map = AlignmentMap::identity(4, "x", "y");
        let ap = AlignedPair::new(&map, &x, &y).unwrap();
        let rows: Vec<usize> = (0..20).collect();
        let lists = generate_candidates(&ap, &rows, 30, &Scoring::Nn).unwrap();
        for l in &lists {
            let xs = x.vector(l.source_row);
            let mut by_dist: Vec<(usize, f64)> = (0..30)
                .map(|t| {
                    let d = &xs - &y.vector(t);
                    (t, d.dot(&d))
                })
                .collect();
            by_dist.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
            let order: Vec<usize> = l.candidates.iter().map(|c| c.target_row).collect();
            assert_eq!(order, by_dist.iter().map(|p| p.0).collect::<Vec<_>>());
        }
    }

    #[test]
    fn csls_reduces_hub_in_degree() {
        let cloud = HubCloud::generate(500, 20, 1.0, 1.5, 7);
        let map = AlignmentMap::identity(20, "s", "t");
        let ap = AlignedPair::new(&map, &cloud.source, &cloud.target).unwrap();
        let rows: Vec<usize> = (0..500).collect();
        let nn = generate_candidates(&ap, &rows, 1, &Scoring::Nn).unwrap();
        let csls = generate_candidates(
            &ap,
            &rows,
            1,
            &Scoring::prepare(Criterion::Csls, &ap, 10, 30.0).unwrap(),
        )
        .unwrap();
        let n_t = cloud.target.len();
        let hub_nn = top1_in_degree(&nn, n_t)[cloud.hub_row];
        let hub_csls = top1_in_degree(&csls, n_t)[cloud.hub_row];
        assert!(hub_nn > 0);
        assert!(hub_csls <= hub_nn, "{hub_csls} > {hub_nn}");
    }

    #[test]
    fn zero_source_rows_are_rejected() {
        let x = EmbeddingSpace::new("x", vec!["a".into(), "b".into()], array![[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let map = AlignmentMap::identity(2, "x", "x");
        let ap = AlignedPair::new(&map, &x, &x).unwrap();
        assert!(generate_candidates(&ap, &[0], 1, &Scoring::Nn).is_err());
        let lists = generate_candidates(&ap, &[1], 1, &Scoring::Nn).unwrap();
        assert_eq!(lists[0].candidates[0].target, "b");
    }

    #[test]
    fn tsv_round_trip() {
        let x = random_space("x", 10, 3, 8);
        let y = random_space("y", 12, 3, 9);
        let map = AlignmentMap::identity(3, "x", "y");
        let ap = AlignedPair::new(&map, &x, &y).unwrap();
        let lists = generate_candidates(&ap, &[3, 1, 7], 4, &Scoring::Nn).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.tsv");
        write_candidates_tsv(&lists, &p).unwrap();
        let first = std::fs::read_to_string(&p).unwrap();
        assert!(first.starts_with("x3\t"));
        assert_eq!(read_candidates_tsv(&p, &x, &y).unwrap(), lists);
    }
}
