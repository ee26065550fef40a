//! Synthetic embedding spaces with known ground truth.
//!
//! A base cloud with a decaying spectrum is turned into "languages" by a
//! random rotation, a frequency-preserving shuffle (rows only move inside
//! small windows, so the most frequent words of each language mostly
//! coincide) and Gaussian noise. The generators also record which rows
//! translate to which, so alignment and induction can be scored exactly.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::embeddings::{normalize, EmbeddingSpace, Normalization};
use crate::linalg::random_orthogonal;
use crate::pipeline::Lexicon;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n: usize,
    pub d: usize,
    /// Standard deviation of the per-coordinate noise added to each language.
    pub noise: f64,
    /// Axis `i` of the base cloud has scale `(i + 1)^-decay`.
    pub spectrum_decay: f64,
    /// Rows are shuffled within consecutive windows of this size.
    pub shuffle_window: usize,
    pub normalization: Normalization,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n: 2000,
            d: 50,
            noise: 0.01,
            spectrum_decay: 1.0,
            shuffle_window: 20,
            normalization: Normalization::CenterL2,
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| scale * rng.sample::<f64, _>(StandardNormal))
}

fn base_cloud(cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let scales = Array1::from_shape_fn(cfg.d, |i| (i as f64 + 1.0).powf(-cfg.spectrum_decay));
    let mut base = gaussian(rng, cfg.n, cfg.d, 1.0) * &scales;
    let mean_norm = base.axis_iter(Axis(0)).map(|r| r.dot(&r).sqrt()).sum::<f64>() / cfg.n as f64;
    base /= mean_norm;
    base
}

fn local_shuffle(n: usize, window: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for chunk in perm.chunks_mut(window.max(1)) {
        chunk.shuffle(rng);
    }
    perm
}

fn words(lang: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{lang}{i:05}")).collect()
}

fn finish(lang: &str, vectors: Array2<f64>, mode: Normalization) -> EmbeddingSpace {
    let space =
        EmbeddingSpace::new(lang, words(lang, vectors.nrows()), vectors).expect("generated spaces are well formed");
    normalize(space, mode).0
}

/// One language derived from the base cloud.
struct Derived {
    space: EmbeddingSpace,
    /// `to_row[j]` is the row of base word `j` in this language.
    to_row: Vec<usize>,
}

fn derive(base: &Array2<f64>, lang: &str, cfg: &SyntheticConfig, rng: &mut ChaCha8Rng, transform: bool) -> Derived {
    let (rotated, order) = if transform {
        let r = random_orthogonal(cfg.d, rng);
        let order = local_shuffle(cfg.n, cfg.shuffle_window, rng);
        (base.dot(&r).select(Axis(0), &order), order)
    } else {
        (base.clone(), (0..cfg.n).collect())
    };
    let noisy = rotated + gaussian(rng, cfg.n, cfg.d, cfg.noise);
    let mut to_row = vec![0; cfg.n];
    for (row, &j) in order.iter().enumerate() {
        to_row[j] = row;
    }
    Derived {
        space: finish(lang, noisy, cfg.normalization),
        to_row,
    }
}

fn gold_lexicon(from: (&EmbeddingSpace, &[usize]), to: (&EmbeddingSpace, &[usize])) -> Lexicon {
    let mut lex = Lexicon::new(from.0.lang(), to.0.lang());
    for j in 0..from.1.len() {
        lex.insert(from.0.word(from.1[j]), to.0.word(to.1[j]));
    }
    lex
}

/// A source space and a rotated, shuffled, noisy copy of it.
#[derive(Debug, Clone)]
pub struct IsometricPair {
    pub source: EmbeddingSpace,
    pub target: EmbeddingSpace,
    /// `gold[i]` is the target row translating source row `i`.
    pub gold: Vec<usize>,
}

impl IsometricPair {
    pub fn generate(cfg: &SyntheticConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = base_cloud(cfg, &mut rng);
        let src = derive(&base, "src", cfg, &mut rng, false);
        let tgt = derive(&base, "tgt", cfg, &mut rng, true);
        // source rows are base rows
        IsometricPair {
            source: src.space,
            target: tgt.space,
            gold: tgt.to_row,
        }
    }

    /// Share of source rows whose nearest target under `x·q` is the gold row.
    pub fn nn_precision(&self, q: &Array2<f64>) -> f64 {
        let sims = self.source.vectors().dot(q).dot(&self.target.vectors().t());
        let hits = sims
            .axis_iter(Axis(0))
            .zip(&self.gold)
            .filter(|(row, &g)| {
                let best = row.iter().enumerate().fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc },
                );
                best.0 == g
            })
            .count();
        hits as f64 / self.gold.len() as f64
    }

    pub fn lexicon(&self) -> Lexicon {
        let mut lex = Lexicon::new(self.source.lang(), self.target.lang());
        for (i, &g) in self.gold.iter().enumerate() {
            lex.insert(self.source.word(i), self.target.word(g));
        }
        lex
    }
}

/// Three languages from one base cloud, with gold dictionaries A–B and A–C.
#[derive(Debug, Clone)]
pub struct SyntheticTriple {
    pub a: EmbeddingSpace,
    pub b: EmbeddingSpace,
    pub c: EmbeddingSpace,
    pub gold_ab: Lexicon,
    pub gold_ac: Lexicon,
}

impl SyntheticTriple {
    pub fn generate(cfg: &SyntheticConfig, seed: u64) -> Self {
        Self::generate_with_langs(cfg, seed, ["a", "b", "c"])
    }

    pub fn generate_with_langs(cfg: &SyntheticConfig, seed: u64, langs: [&str; 3]) -> Self {
        let family = SyntheticFamily::generate(cfg, seed, &langs);
        let (gold_ab, gold_ac) = (family.lexicon(0, 1), family.lexicon(0, 2));
        let mut spaces = family.spaces.into_iter();
        SyntheticTriple {
            a: spaces.next().expect("three languages"),
            b: spaces.next().expect("three languages"),
            c: spaces.next().expect("three languages"),
            gold_ab,
            gold_ac,
        }
    }
}

/// Any number of languages from one base cloud. The first keeps the base
/// rows in order; every other one is rotated and shuffled.
#[derive(Debug, Clone)]
pub struct SyntheticFamily {
    pub spaces: Vec<EmbeddingSpace>,
    to_row: Vec<Vec<usize>>,
}

impl SyntheticFamily {
    pub fn generate(cfg: &SyntheticConfig, seed: u64, langs: &[&str]) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = base_cloud(cfg, &mut rng);
        let (spaces, to_row) = langs
            .iter()
            .enumerate()
            .map(|(i, lang)| {
                let d = derive(&base, lang, cfg, &mut rng, i > 0);
                (d.space, d.to_row)
            })
            .unzip();
        SyntheticFamily { spaces, to_row }
    }

    /// Gold dictionary from language `from` to language `to`.
    pub fn lexicon(&self, from: usize, to: usize) -> Lexicon {
        gold_lexicon(
            (&self.spaces[from], &self.to_row[from]),
            (&self.spaces[to], &self.to_row[to]),
        )
    }
}

/// Source and target clouds where target `i` is a noisy copy of source `i`,
/// plus one extra target row planted on the direction shared by all sources.
#[derive(Debug, Clone)]
pub struct HubCloud {
    pub source: EmbeddingSpace,
    pub target: EmbeddingSpace,
    pub hub_row: usize,
}

impl HubCloud {
    /// `shared` is the weight of the common direction in every source row,
    /// `spread` the noise separating a source from its own target.
    pub fn generate(n: usize, d: usize, shared: f64, spread: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = |m: Array2<f64>| {
            let mut m = m;
            for mut r in m.axis_iter_mut(Axis(0)) {
                let norm = r.dot(&r).sqrt();
                r /= norm;
            }
            m
        };
        let mut h = gaussian(&mut rng, 1, d, 1.0);
        h = unit(h);
        let g = unit(gaussian(&mut rng, n, d, 1.0));
        let src = unit(&g + &(&h * shared));
        let mut tgt = unit(&src + &gaussian(&mut rng, n, d, spread / (d as f64).sqrt()));
        tgt.push_row(h.row(0)).expect("same width");
        let mut tgt_words = words("t", n);
        tgt_words.push("hub".to_string());
        let source = EmbeddingSpace::new("s", words("s", n), src).expect("well formed");
        let target = EmbeddingSpace::new("t", tgt_words, tgt).expect("well formed");
        HubCloud {
            source: normalize(source, Normalization::L2).0,
            target: normalize(target, Normalization::L2).0,
            hub_row: n,
        }
    }
}

/// Shuffled copy of `0..n`.
pub fn random_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng);
    p
}
