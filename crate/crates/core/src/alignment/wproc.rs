//! Stochastic Wasserstein-Procrustes.
//!
//! Minimizes `‖XQ − PY‖²` jointly over an orthogonal `Q` and a permutation
//! `P` by alternating, on random batches, an exact assignment step and a
//! projected gradient step on `Q`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::procrustes::procrustes;
use super::{AlignmentMap, Method};
use crate::assignment::{solve_assignment, Direction, Permutation};
use crate::embeddings::{EmbeddingSpace, Normalization};
use crate::error::{Error, Result};
use crate::linalg::{project_orthogonal, random_orthogonal, svd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Init {
    Identity,
    RandomOrthogonal,
    /// Assignment/Procrustes alternation on the `2·b` most frequent words,
    /// started from several candidate maps; the best fit wins.
    ProcrustesSeed,
}

impl fmt::Display for Init {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Init::Identity => "identity",
            Init::RandomOrthogonal => "random_orthogonal",
            Init::ProcrustesSeed => "procrustes_seed",
        })
    }
}

impl FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Init::Identity),
            "random_orthogonal" => Ok(Init::RandomOrthogonal),
            "procrustes_seed" => Ok(Init::ProcrustesSeed),
            other => Err(Error::invalid(format!("unknown init `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WProcConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub iters_per_epoch: usize,
    /// Step size of the first epoch; halved at every new epoch.
    pub learning_rate: f64,
    pub seed: u64,
    pub init: Init,
    /// Batches are drawn from this many most frequent words.
    pub sample_top: usize,
    /// Iterations averaged into one convergence log entry.
    pub log_every: usize,
    /// Cap on assignment/Procrustes rounds when seeding.
    pub seed_rounds: usize,
    /// Frank-Wolfe steps of the convex relaxation seed.
    pub convex_iters: usize,
}

impl Default for WProcConfig {
    fn default() -> Self {
        WProcConfig {
            batch_size: 500,
            epochs: 5,
            iters_per_epoch: 5000,
            learning_rate: 0.5,
            seed: 0,
            init: Init::ProcrustesSeed,
            sample_top: 20_000,
            log_every: 100,
            seed_rounds: 50,
            convex_iters: 30,
        }
    }
}

/// Mean batch objective over windows of `log_every` iterations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceLog {
    /// `(last iteration of the window, mean objective)`, iterations 1-based.
    pub entries: Vec<(usize, f64)>,
    /// Iterations per epoch, used to group entries by epoch.
    pub iters_per_epoch: usize,
}

impl ConvergenceLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,objective\n");
        for (iter, obj) in &self.entries {
            out.push_str(&format!("{iter},{obj}\n"));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Mean of the logged objectives falling in each epoch.
    pub fn epoch_means(&self) -> Vec<f64> {
        if self.iters_per_epoch == 0 {
            return Vec::new();
        }
        let mut sums: Vec<(f64, usize)> = Vec::new();
        for &(iter, obj) in &self.entries {
            let epoch = (iter - 1) / self.iters_per_epoch;
            if sums.len() <= epoch {
                sums.resize(epoch + 1, (0.0, 0));
            }
            sums[epoch].0 += obj;
            sums[epoch].1 += 1;
        }
        sums.into_iter()
            .filter(|&(_, n)| n > 0)
            .map(|(s, n)| s / n as f64)
            .collect()
    }
}

/// Aligns `source` onto `target` without supervision.
pub fn wasserstein_procrustes(
    source: &EmbeddingSpace,
    target: &EmbeddingSpace,
    cfg: &WProcConfig,
) -> Result<(AlignmentMap, ConvergenceLog)> {
    for space in [source, target] {
        if space.normalization() == Normalization::Raw {
            return Err(Error::invalid(format!(
                "`{}` embeddings must be normalized before alignment",
                space.lang()
            )));
        }
    }
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch(format!(
            "source has {} dimensions, target {}",
            source.dim(),
            target.dim()
        )));
    }
    let b = cfg.batch_size;
    if b == 0 || b > source.len().min(target.len()) {
        return Err(Error::invalid(format!(
            "batch size {b} must be between 1 and the smaller vocabulary ({})",
            source.len().min(target.len())
        )));
    }
    if !(cfg.learning_rate > 0.0) {
        return Err(Error::invalid("learning rate must be positive"));
    }

    let x = source.vectors();
    let y = target.vectors();
    let d = source.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut q = match cfg.init {
        Init::Identity => Array2::eye(d),
        Init::RandomOrthogonal => random_orthogonal(d, &mut rng),
        Init::ProcrustesSeed => {
            let size = (2 * b).min(source.len()).min(target.len());
            let xs = x.slice(s![..size, ..]);
            let ys = y.slice(s![..size, ..]);
            seeded_map(xs, ys, cfg)?
        }
    };

    let pool_x = cfg.sample_top.max(b).min(source.len());
    let pool_y = cfg.sample_top.max(b).min(target.len());
    let log_every = cfg.log_every.max(1);
    let mut log = ConvergenceLog {
        entries: Vec::new(),
        iters_per_epoch: cfg.iters_per_epoch,
    };
    let mut window = (0.0, 0usize);
    let mut iter = 0usize;

    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate / f64::powi(2.0, epoch as i32);
        for _ in 0..cfg.iters_per_epoch {
            iter += 1;
            let xi = index::sample(&mut rng, pool_x, b).into_vec();
            let yi = index::sample(&mut rng, pool_y, b).into_vec();
            let xb = x.select(Axis(0), &xi);
            let yb = y.select(Axis(0), &yi);
            let mapped = xb.dot(&q);
            let cost = -mapped.dot(&yb.t());
            let perm = solve_assignment(cost.view(), Direction::Minimize)?;
            let matched = yb.select(Axis(0), perm.mapping());
            let residual = &mapped - &matched;
            let objective: f64 = residual.iter().map(|v| v * v).sum();
            if !objective.is_finite() {
                return Err(Error::Divergence(format!(
                    "non-finite batch objective at iteration {iter} (epoch {epoch})"
                )));
            }
            let grad = xb.t().dot(&residual) * (2.0 / b as f64);
            q = project_orthogonal((&q - &(grad * lr)).view())?;

            window.0 += objective;
            window.1 += 1;
            if window.1 == log_every {
                log.entries.push((iter, window.0 / window.1 as f64));
                window = (0.0, 0);
            }
        }
        if window.1 > 0 {
            log.entries.push((iter, window.0 / window.1 as f64));
            window = (0.0, 0);
        }
    }

    let map = AlignmentMap::new(q, source.lang(), target.lang(), Method::WProc)?;
    Ok((map, log))
}

/// Multi-start seed on a small slice: identity, moment matching and the
/// convex relaxation each start an assignment/Procrustes alternation, and the
/// map with the largest matched inner-product total is kept.
fn seeded_map(xs: ArrayView2<'_, f64>, ys: ArrayView2<'_, f64>, cfg: &WProcConfig) -> Result<Array2<f64>> {
    let d = xs.ncols();
    let starts = [
        Array2::eye(d),
        moment_matching_seed(xs, ys)?,
        convex_relaxation_seed(xs, ys, cfg.convex_iters)?,
    ];
    let mut best: Option<(f64, Array2<f64>)> = None;
    for start in starts {
        let (q, score) = alternate(xs, ys, start, cfg.seed_rounds)?;
        log::debug!("seed candidate reached matched total {score:.6}");
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, q));
        }
    }
    Ok(best.expect("at least one start").1)
}

/// Alternates exact matching and closed-form Procrustes until the matching
/// stops changing. Returns the map and the matched inner-product total.
fn alternate(
    xs: ArrayView2<'_, f64>,
    ys: ArrayView2<'_, f64>,
    mut q: Array2<f64>,
    rounds: usize,
) -> Result<(Array2<f64>, f64)> {
    let mut previous: Option<Permutation> = None;
    let mut score = f64::NEG_INFINITY;
    for _ in 0..rounds.max(1) {
        let sims = xs.dot(&q).dot(&ys.t());
        let perm = solve_assignment(sims.view(), Direction::Maximize)?;
        score = perm.mapping().iter().enumerate().map(|(i, &j)| sims[[i, j]]).sum();
        if previous.as_ref() == Some(&perm) {
            break;
        }
        let matched = ys.select(Axis(0), perm.mapping());
        q = procrustes(xs, matched.view())?;
        previous = Some(perm);
    }
    Ok((q, score))
}

/// Matches principal axes of the two clouds, with axis signs chosen so that
/// third moments agree.
pub fn moment_matching_seed(xs: ArrayView2<'_, f64>, ys: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let axes = |m: ArrayView2<'_, f64>| -> Result<(Array2<f64>, Vec<f64>)> {
        let (u, s, _) = svd(m.t().dot(&m).view())?;
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
        let u = u.select(Axis(1), &order);
        let proj = m.dot(&u);
        let skew = proj
            .axis_iter(Axis(1))
            .map(|c| c.iter().map(|v| v * v * v).sum::<f64>())
            .collect();
        Ok((u, skew))
    };
    let (ux, skew_x) = axes(xs)?;
    let (uy, skew_y) = axes(ys)?;
    let signs: Vec<f64> = skew_x
        .iter()
        .zip(&skew_y)
        .map(|(a, b)| if a * b < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let signed = &ux * &ndarray::Array1::from(signs);
    Ok(signed.dot(&uy.t()))
}

/// Frank-Wolfe on the doubly stochastic relaxation of
/// `min_P ‖K_X P − P K_Y‖²` with `K = XXᵀ`, rounded to a permutation and
/// turned into a map with Procrustes. Gram matrices are never formed; all
/// products go through the `n×d` factors.
pub fn convex_relaxation_seed(xs: ArrayView2<'_, f64>, ys: ArrayView2<'_, f64>, iters: usize) -> Result<Array2<f64>> {
    let n = xs.nrows();
    if n != ys.nrows() {
        return Err(Error::DimensionMismatch("seed slices must have equal size".into()));
    }
    let frob = |m: ArrayView2<'_, f64>| {
        let g = m.t().dot(&m);
        g.iter().map(|v| v * v).sum::<f64>().sqrt()
    };
    // K_Y is rescaled so both Gram matrices have the same Frobenius norm.
    let scale = (frob(xs) / frob(ys)).sqrt();
    let ys_scaled = &ys * scale;
    let gx = xs.t().dot(&xs);
    let gy = ys_scaled.t().dot(&ys_scaled);

    let mut p = Array2::from_elem((n, n), 1.0 / n as f64);
    for t in 1..=iters {
        // gradient/2 = K_X² P + P K_Y² − 2 K_X P K_Y
        let xtp = xs.t().dot(&p); // d×n
        let pys = p.dot(&ys_scaled); // n×d
        let k2x_p = xs.dot(&gx.dot(&xtp));
        let p_k2y = pys.dot(&gy).dot(&ys_scaled.t());
        let kx_p_ky = xs.dot(&xtp.dot(&ys_scaled)).dot(&ys_scaled.t());
        let grad = k2x_p + p_k2y - kx_p_ky * 2.0;
        let vertex = solve_assignment(grad.view(), Direction::Minimize)?;
        let step = 2.0 / (2.0 + t as f64);
        p *= 1.0 - step;
        for (i, &j) in vertex.mapping().iter().enumerate() {
            p[[i, j]] += step;
        }
    }
    let rounded = solve_assignment(p.view(), Direction::Maximize)?;
    let matched = ys.select(Axis(0), rounded.mapping());
    procrustes(xs, matched.view())
}
