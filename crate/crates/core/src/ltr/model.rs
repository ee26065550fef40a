//! Groupwise MLP scorer.
//!
//! With group size `m` the network reads `m` items at once (their feature
//! rows concatenated) and emits `m` scores. A query's items are shuffled
//! once with a seed tied to the model and the query id, then every cyclic
//! window of `m` consecutive items is scored. Each item lands in every slot
//! of the window exactly once, and its final score is the mean of those `m`
//! outputs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::Loss;
use super::query::RankingQuery;
use crate::error::{Error, Result};

const FORMAT_TAG: &str = "rubi-ranker v1";

/// Dense layer acting on row vectors: `a·weight + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `fan_in × fan_out`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    fn zeros_like(&self) -> Layer {
        Layer {
            weight: Array2::zeros(self.weight.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }
}

/// Whether dropout is active; training passes the optimizer step so masks
/// change from step to step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMode {
    Train { step: u64 },
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankerModel {
    pub feature_dim: usize,
    pub group_size: usize,
    pub hidden: Vec<usize>,
    pub dropout_rate: f64,
    pub seed: u64,
    pub layers: Vec<Layer>,
}

/// Parameter gradients, shaped like [`RankerModel::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(model: &RankerModel) -> Self {
        Gradients {
            layers: model.layers.iter().map(Layer::zeros_like).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for l in &mut self.layers {
            l.weight *= c;
            l.bias *= c;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(&l.bias).all(|v| v.is_finite()))
    }
}

/// FNV-1a, used to give each query its own stream of randomness.
fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

fn mix(a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = a ^ b.wrapping_add(0x9e37_79b9_7f4a_7c15).rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct Forward {
    /// Input to each layer (after ReLU and dropout for hidden layers).
    inputs: Vec<Array2<f64>>,
    /// Per hidden layer: derivative of the activation and dropout, elementwise.
    gates: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl RankerModel {
    pub fn new(feature_dim: usize, group_size: usize, hidden: &[usize], dropout_rate: f64, seed: u64) -> Result<Self> {
        if feature_dim == 0 || group_size == 0 || hidden.contains(&0) {
            return Err(Error::invalid(
                "feature dim, group size and hidden widths must be positive",
            ));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::invalid(format!("dropout rate {dropout_rate} outside [0, 1)")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut widths = vec![feature_dim * group_size];
        widths.extend_from_slice(hidden);
        widths.push(group_size);
        let layers = widths
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                Layer {
                    weight: Array2::from_shape_fn((w[0], w[1]), |_| rng.random_range(-bound..bound)),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        Ok(RankerModel {
            feature_dim,
            group_size,
            hidden: hidden.to_vec(),
            dropout_rate,
            seed,
            layers,
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Windows of item indices fed to the network for a query of `n` items.
    pub fn windows(&self, query_id: &str, n: usize) -> Vec<Vec<usize>> {
        let m = self.group_size;
        if m == 1 {
            return (0..n).map(|i| vec![i]).collect();
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(self.seed, fnv1a(query_id))));
        (0..n)
            .map(|start| (0..m).map(|j| order[(start + j) % n]).collect())
            .collect()
    }

    fn check(&self, query: &RankingQuery) -> Result<()> {
        if query.feature_dim() != self.feature_dim {
            return Err(Error::DimensionMismatch(format!(
                "query `{}` has {} features, model expects {}",
                query.query_id,
                query.feature_dim(),
                self.feature_dim
            )));
        }
        Ok(())
    }

    fn group_input(&self, query: &RankingQuery, windows: &[Vec<usize>]) -> Array2<f64> {
        let f = self.feature_dim;
        let mut input = Array2::zeros((windows.len(), f * self.group_size));
        for (mut row, w) in input.axis_iter_mut(Axis(0)).zip(windows) {
            for (j, &item) in w.iter().enumerate() {
                row.slice_mut(ndarray::s![j * f..(j + 1) * f])
                    .assign(&query.features.row(item));
            }
        }
        input
    }

    fn forward(&self, input: Array2<f64>, dropout: Option<&mut ChaCha8Rng>) -> Forward {
        let keep = 1.0 - self.dropout_rate;
        let mut rng = dropout.filter(|_| self.dropout_rate > 0.0);
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut gates = Vec::with_capacity(last);
        let mut a = input;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weight) + &layer.bias;
            inputs.push(a);
            if i == last {
                return Forward {
                    inputs,
                    gates,
                    output: z,
                };
            }
            let mut gate = z.mapv(|v| f64::from(u8::from(v > 0.0)));
            if let Some(rng) = rng.as_deref_mut() {
                gate.mapv_inplace(|g| if rng.random::<f64>() < keep { g / keep } else { 0.0 });
            }
            z *= &gate;
            gates.push(gate);
            a = z;
        }
        unreachable!("the model has an output layer")
    }

    fn dropout_rng(&self, query: &RankingQuery, mode: ScoreMode) -> Option<ChaCha8Rng> {
        match mode {
            ScoreMode::Eval => None,
            ScoreMode::Train { step } => Some(ChaCha8Rng::seed_from_u64(mix(
                mix(self.seed, step),
                fnv1a(&query.query_id),
            ))),
        }
    }

    /// Mean over each item's appearances in the window outputs.
    fn pool(&self, windows: &[Vec<usize>], output: &Array2<f64>, n: usize) -> Vec<f64> {
        let mut scores = vec![0.0; n];
        for (w, row) in windows.iter().zip(output.axis_iter(Axis(0))) {
            for (&item, &s) in w.iter().zip(row) {
                scores[item] += s;
            }
        }
        let m = self.group_size as f64;
        scores.iter_mut().for_each(|s| *s /= m);
        scores
    }

    /// One score per item.
    pub fn score_query(&self, query: &RankingQuery, mode: ScoreMode) -> Result<Vec<f64>> {
        self.check(query)?;
        let windows = self.windows(&query.query_id, query.len());
        let mut rng = self.dropout_rng(query, mode);
        let fwd = self.forward(self.group_input(query, &windows), rng.as_mut());
        Ok(self.pool(&windows, &fwd.output, query.len()))
    }

    /// Loss of one query and its gradient in every parameter.
    pub fn loss_and_gradient(&self, query: &RankingQuery, loss: &Loss, mode: ScoreMode) -> Result<(f64, Gradients)> {
        self.check(query)?;
        let n = query.len();
        let windows = self.windows(&query.query_id, n);
        let mut rng = self.dropout_rng(query, mode);
        let fwd = self.forward(self.group_input(query, &windows), rng.as_mut());
        let scores = self.pool(&windows, &fwd.output, n);
        let (value, dscores) = loss.evaluate(&query.label_values(), &scores, mix(self.seed, fnv1a(&query.query_id)));
        if !value.is_finite() || dscores.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "loss {value} on query `{}` with scores {scores:?}",
                query.query_id
            )));
        }
        let m = self.group_size as f64;
        let mut delta = Array2::from_shape_fn(fwd.output.raw_dim(), |(w, j)| dscores[windows[w][j]] / m);
        let mut grads = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let a = &fwd.inputs[i];
            grads.push(Layer {
                weight: a.t().dot(&delta),
                bias: delta.sum_axis(Axis(0)),
            });
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].weight.t());
                Zip::from(&mut back).and(&fwd.gates[i - 1]).for_each(|d, &g| *d *= g);
                delta = back;
            }
        }
        grads.reverse();
        Ok((value, Gradients { layers: grads }))
    }

    /// Versioned text form: header lines, then each layer's weight rows and
    /// its bias row.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(w, "{FORMAT_TAG}")?;
            writeln!(w, "feature_dim {}", self.feature_dim)?;
            writeln!(w, "group_size {}", self.group_size)?;
            write!(w, "hidden")?;
            for h in &self.hidden {
                write!(w, " {h}")?;
            }
            writeln!(w)?;
            writeln!(w, "dropout {}", self.dropout_rate)?;
            writeln!(w, "seed {}", self.seed)?;
            for layer in &self.layers {
                writeln!(w, "layer {} {}", layer.weight.nrows(), layer.weight.ncols())?;
                for row in layer.weight.rows() {
                    let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                    writeln!(w, "{}", vals.join(" "))?;
                }
                let vals: Vec<String> = layer.bias.iter().map(|v| v.to_string()).collect();
                writeln!(w, "{}", vals.join(" "))?;
            }
            w.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let mut next = || -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i + 1, l)),
                Some((_, Err(e))) => Err(Error::io(path, e)),
                None => Err(Error::parse(path, 0, "unexpected end of file")),
            }
        };
        let (_, tag) = next()?;
        if tag != FORMAT_TAG {
            return Err(Error::parse(path, 1, format!("expected `{FORMAT_TAG}`, got `{tag}`")));
        }
        let mut field = |name: &str| -> Result<(usize, String)> {
            let (n, line) = next()?;
            match line.split_once(' ') {
                Some((k, v)) if k == name => Ok((n, v.to_string())),
                _ if line == name => Ok((n, String::new())),
                _ => Err(Error::parse(path, n, format!("expected `{name}`"))),
            }
        };
        let num = |(n, v): (usize, String)| -> Result<usize> {
            v.parse()
                .map_err(|_| Error::parse(path, n, format!("bad integer `{v}`")))
        };
        let feature_dim = num(field("feature_dim")?)?;
        let group_size = num(field("group_size")?)?;
        let (hn, hv) = field("hidden")?;
        let hidden = hv
            .split_whitespace()
            .map(|h| {
                h.parse()
                    .map_err(|_| Error::parse(path, hn, format!("bad width `{h}`")))
            })
            .collect::<Result<Vec<usize>>>()?;
        let (dn, dv) = field("dropout")?;
        let dropout_rate: f64 = dv.parse().map_err(|_| Error::parse(path, dn, "bad dropout rate"))?;
        let (sn, sv) = field("seed")?;
        let seed: u64 = sv.parse().map_err(|_| Error::parse(path, sn, "bad seed"))?;
        let mut model = RankerModel::new(feature_dim, group_size, &hidden, dropout_rate, seed)
            .map_err(|e| Error::parse(path, 2, e.to_string()))?;
        let floats = |n: usize, line: &str, want: usize| -> Result<Vec<f64>> {
            let v = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|_| Error::parse(path, n, "bad number"))?;
            if v.len() != want {
                return Err(Error::parse(
                    path,
                    n,
                    format!("expected {want} values, got {}", v.len()),
                ));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("{} line {n}", path.display())));
            }
            Ok(v)
        };
        for layer in &mut model.layers {
            let (rows, cols) = layer.weight.dim();
            let (n, header) = next()?;
            if header != format!("layer {rows} {cols}") {
                return Err(Error::parse(path, n, format!("expected `layer {rows} {cols}`")));
            }
            for r in 0..rows {
                let (n, line) = next()?;
                let v = floats(n, &line, cols)?;
                layer.weight.row_mut(r).assign(&Array1::from(v));
            }
            let (n, line) = next()?;
            layer.bias = Array1::from(floats(n, &line, cols)?);
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltr::loss::LossKind;
    use ndarray::array;

    fn random_query(id: &str, n: usize, f: usize, seed: u64) -> RankingQuery {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let feats = Array2::from_shape_fn((n, f), |_| rng.random::<f64>() * 2.0 - 1.0);
        let labels = (0..n).map(|_| rng.random_range(0..3)).collect();
        RankingQuery::new(id, feats, labels).unwrap()
    }

    #[test]
    fn zero_network_scores_zero() {
        let mut m = RankerModel::new(3, 1, &[4], 0.0, 1).unwrap();
        for l in &mut m.layers {
            l.weight.fill(0.0);
        }
        let q = random_query("q", 5, 3, 2);
        assert_eq!(m.score_query(&q, ScoreMode::Eval).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn linear_model_reads_first_feature() {
        let mut m = RankerModel::new(3, 1, &[], 0.0, 1).unwrap();
        m.layers[0].weight = array![[1.0], [0.0], [0.0]];
        let q = random_query("q", 6, 3, 3);
        let s = m.score_query(&q, ScoreMode::Eval).unwrap();
        for (i, v) in s.iter().enumerate() {
            assert_eq!(*v, q.features[[i, 0]]);
        }
        let best = crate::ltr::metrics::ranking_from_scores(&s)[0];
        let nn = crate::ltr::metrics::ranking_from_scores(&q.features.column(0).to_vec())[0];
        assert_eq!(best, nn);
    }

    #[test]
    fn windows_cover_every_slot_once() {
        let m = RankerModel::new(2, 4, &[8], 0.0, 5).unwrap();
        for n in [1, 3, 4, 10] {
            let ws = m.windows("word", n);
            assert_eq!(ws.len(), n);
            let mut slots = vec![vec![0; 4]; n];
            for w in &ws {
                for (j, &i) in w.iter().enumerate() {
                    slots[i][j] += 1;
                }
            }
            let expect = if n >= 4 { 1 } else { 0 };
            if expect == 1 {
                assert!(slots.iter().flatten().all(|&c| c == 1));
            }
            assert!(slots.iter().all(|s| s.iter().sum::<usize>() == 4));
        }
    }

    #[test]
    fn identical_items_score_identically() {
        let m = RankerModel::new(3, 2, &[16, 8], 0.0, 9).unwrap();
        let row = array![0.3, -0.1, 0.8];
        let feats = Array2::from_shape_fn((5, 3), |(_, j)| row[j]);
        let q = RankingQuery::new("dup", feats, vec![1; 5]).unwrap();
        let s = m.score_query(&q, ScoreMode::Eval).unwrap();
        assert!(s.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn dropout_only_in_train_mode() {
        let m = RankerModel::new(3, 2, &[32], 0.5, 4).unwrap();
        let q = random_query("q", 6, 3, 5);
        let e1 = m.score_query(&q, ScoreMode::Eval).unwrap();
        let e2 = m.score_query(&q, ScoreMode::Eval).unwrap();
        assert_eq!(e1, e2);
        let t1 = m.score_query(&q, ScoreMode::Train { step: 1 }).unwrap();
        let t1b = m.score_query(&q, ScoreMode::Train { step: 1 }).unwrap();
        let t2 = m.score_query(&q, ScoreMode::Train { step: 2 }).unwrap();
        assert_eq!(t1, t1b);
        assert_ne!(t1, e1);
        assert_ne!(t1, t2);
    }

    #[test]
    fn rejects_wrong_feature_width() {
        let m = RankerModel::new(4, 1, &[], 0.0, 0).unwrap();
        assert!(m.score_query(&random_query("q", 3, 3, 0), ScoreMode::Eval).is_err());
        assert!(RankerModel::new(4, 0, &[], 0.0, 0).is_err());
        assert!(RankerModel::new(4, 1, &[], 1.0, 0).is_err());
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for kind in LossKind::ALL {
            let loss = Loss::new(kind, 10.0, 3).unwrap();
            let model = RankerModel::new(3, 2, &[8, 6], 0.0, 13).unwrap();
            let q = random_query("g", 5, 3, 21);
            let (_, g) = model.loss_and_gradient(&q, &loss, ScoreMode::Eval).unwrap();
            for (li, layer) in model.layers.iter().enumerate() {
                for _ in 0..10 {
                    let idx = rng.random_range(0..layer.weight.len());
                    let (r, c) = (idx / layer.weight.ncols(), idx % layer.weight.ncols());
                    let h = 1e-5;
                    let eval = |delta: f64| {
                        let mut m = model.clone();
                        m.layers[li].weight[[r, c]] += delta;
                        let s = m.score_query(&q, ScoreMode::Eval).unwrap();
                        loss.evaluate(&q.label_values(), &s, mix(m.seed, fnv1a("g"))).0
                    };
                    let fd = (eval(h) - eval(-h)) / (2.0 * h);
                    let a = g.layers[li].weight[[r, c]];
                    let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
                    assert!(rel <= 1e-4, "{kind} layer {li}: {a} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let m = RankerModel::new(11, 4, &[16, 8, 4], 0.5, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.txt");
        m.save(&p).unwrap();
        let back = RankerModel::load(&p).unwrap();
        assert_eq!(back, m);
        let p2 = dir.path().join("model2.txt");
        back.save(&p2).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&p2).unwrap());

        let linear = RankerModel::new(2, 1, &[], 0.0, 0).unwrap();
        linear.save(&p).unwrap();
        assert_eq!(RankerModel::load(&p).unwrap(), linear);

        std::fs::write(&p, "something else\n").unwrap();
        assert!(RankerModel::load(&p).is_err());
    }
}
