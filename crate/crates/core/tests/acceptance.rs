//! Acceptance criteria. Runs as a plain binary and prints one line per
//! criterion; exits non-zero if any fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rubi::alignment::{procrustes, AlignmentMap, Method};
use rubi::assignment::{assignment_value, solve_assignment, Direction, Permutation};
use rubi::embeddings::{normalize, save_embeddings, EmbeddingSpace, Normalization};
use rubi::linalg::{max_abs_diff, random_orthogonal};
use rubi::ltr::{
    approx_ndcg_value, ndcg_at_k, ranking_from_scores, Loss, LossKind, RankerModel, RankingQuery, ScoreMode,
};
use rubi::pipeline::{rank_baseline, run_rubi, PipelineConfig, RubiInputs};
use rubi::retrieval::{
    compute_neighborhood_stats, cosine_sim, csls_score, generate_candidates, top1_in_degree, AlignedPair, Criterion,
    Scoring,
};
use rubi::synthetic::{HubCloud, SyntheticConfig, SyntheticTriple};

const PROCRUSTES_TOL: f64 = 1e-6;
const PROCRUSTES_BUDGET: Duration = Duration::from_secs(5);
const ASSIGNMENT_BUDGET: Duration = Duration::from_secs(10);
const CSLS_TOL: f64 = 1e-12;
const GRADIENT_REL_TOL: f64 = 1e-4;
const GRADIENT_REL_FLOOR: f64 = 1e-6;
const GRADIENT_STEP: f64 = 1e-5;
const GRADIENT_BUDGET: Duration = Duration::from_secs(30);
const APPROX_ALPHA: f64 = 1000.0;
const APPROX_TOL: f64 = 0.01;
const APPROX_MIN_GAP: f64 = 0.01;
const SYNTHETIC_P1: f64 = 0.95;
const SYNTHETIC_BUDGET: Duration = Duration::from_secs(600);
const REAL_MARGIN: f64 = 0.03;

enum Verdict {
    Pass(String),
    Fail(String),
    Skipped(String),
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(GRADIENT_REL_FLOOR)
}

fn procrustes_recovery() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let x = gaussian(&mut rng, 50, 5);
        let r = random_orthogonal(5, &mut rng);
        let y = x.dot(&r);
        match procrustes(x.view(), y.view()) {
            Ok(w) => worst = worst.max(max_abs_diff(w.view(), r.view())),
            Err(e) => return Verdict::Fail(format!("trial {trial}: {e}")),
        }
    }
    let t = start.elapsed();
    verdict(
        worst <= PROCRUSTES_TOL && t < PROCRUSTES_BUDGET,
        format!("max |W-R| {worst:.2e} over 100 trials in {t:.2?}"),
    )
}

fn brute_force_min(cost: &Array2<f64>) -> f64 {
    fn rec(cost: &Array2<f64>, row: usize, used: &mut [bool], acc: &mut Vec<usize>, best: &mut f64) {
        let n = cost.nrows();
        if row == n {
            let v = assignment_value(cost.view(), &Permutation::new(acc.clone()).unwrap()).unwrap();
            *best = best.min(v);
            return;
        }
        for c in 0..n {
            if !used[c] {
                used[c] = true;
                acc.push(c);
                rec(cost, row + 1, used, acc, best);
                acc.pop();
                used[c] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(cost, 0, &mut vec![false; cost.nrows()], &mut Vec::new(), &mut best);
    best
}

fn assignment_exactness() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..1000 {
        let n = rng.random_range(1..=7);
        let cost = if trial % 2 == 0 {
            Array2::from_shape_fn((n, n), |_| rng.random_range(0..20) as f64)
        } else {
            Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0))
        };
        let got = solve_assignment(cost.view(), Direction::Minimize).and_then(|p| assignment_value(cost.view(), &p));
        let want = brute_force_min(&cost);
        match got {
            Ok(v) if v == want => {}
            Ok(v) => return Verdict::Fail(format!("trial {trial} (n={n}): solver {v}, brute force {want}")),
            Err(e) => return Verdict::Fail(format!("trial {trial}: {e}")),
        }
    }
    let t = start.elapsed();
    verdict(
        t < ASSIGNMENT_BUDGET,
        format!("1000 matrices equal to enumeration in {t:.2?}"),
    )
}

fn random_space(lang: &str, n: usize, d: usize, rng: &mut ChaCha8Rng) -> EmbeddingSpace {
    let words = (0..n).map(|i| format!("{lang}{i}")).collect();
    let space = EmbeddingSpace::new(lang, words, gaussian(rng, n, d)).unwrap();
    normalize(space, Normalization::L2).0
}

fn csls_identity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (n, m, d) = (rng.random_range(8..40), rng.random_range(8..40), rng.random_range(2..8));
        let src = random_space("s", n, d, &mut rng);
        let tgt = random_space("t", m, d, &mut rng);
        let map = AlignmentMap::new(random_orthogonal(d, &mut rng), "s", "t", Method::Procrustes).unwrap();
        let k = rng.random_range(1..=n.min(m).min(10));
        let stats = compute_neighborhood_stats(&map, &src, &tgt, k).unwrap();
        let mapped = map.apply(&src).unwrap();
        for _ in 0..20 {
            let (s, t) = (rng.random_range(0..n), rng.random_range(0..m));
            let x = mapped.row(s);
            let y = tgt.vector(t);
            let cos = cosine_sim(x, y).unwrap();
            let csls = csls_score(x, y, s, t, &stats).unwrap();
            worst = worst.max((csls + stats.r_target[t] + stats.r_source[s] - 2.0 * cos).abs());
        }
    }

    let hub = HubCloud::generate(500, 20, 1.0, 1.5, 7);
    let map = AlignmentMap::identity(20, "s", "t");
    let pair = AlignedPair::new(&map, &hub.source, &hub.target).unwrap();
    let rows: Vec<usize> = (0..hub.source.len()).collect();
    let in_degree = |c: Criterion| {
        let scoring = Scoring::prepare(c, &pair, 10, 30.0).unwrap();
        let lists = generate_candidates(&pair, &rows, 1, &scoring).unwrap();
        top1_in_degree(&lists, hub.target.len())[hub.hub_row]
    };
    let (nn, csls) = (in_degree(Criterion::Nn), in_degree(Criterion::Csls));
    verdict(
        worst <= CSLS_TOL && csls <= nn,
        format!("max identity residual {worst:.2e} on 200 fixtures; hub in-degree nn {nn}, csls {csls}"),
    )
}

fn five_item_query(rng: &mut ChaCha8Rng, id: usize, dim: usize) -> RankingQuery {
    let feats = gaussian(rng, 5, dim);
    let mut labels: Vec<u32> = (0..5).map(|_| rng.random_range(0..3)).collect();
    if labels.iter().all(|&l| l == 0) {
        labels[rng.random_range(0..5)] = 2;
    }
    RankingQuery::new(format!("q{id}"), feats, labels).unwrap()
}

fn gradient_checks() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let queries: Vec<RankingQuery> = (0..20).map(|i| five_item_query(&mut rng, i, 11)).collect();
    let h = GRADIENT_STEP;
    let mut worst = 0.0f64;
    let mut checked = 0usize;

    for kind in LossKind::ALL {
        let loss = Loss::new(kind, 10.0, 5).unwrap();
        for q in &queries {
            let labels = q.label_values();
            let scores: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (_, grad) = loss.evaluate(&labels, &scores, 17);
            for i in 0..5 {
                let mut up = scores.clone();
                let mut down = scores.clone();
                up[i] += h;
                down[i] -= h;
                let fd = (loss.evaluate(&labels, &up, 17).0 - loss.evaluate(&labels, &down, 17).0) / (2.0 * h);
                worst = worst.max(rel_err(grad[i], fd));
                checked += 1;
            }
        }
    }

    let defaults = rubi::ltr::TrainConfig::default();
    for kind in LossKind::ALL {
        let loss = Loss::new(kind, 10.0, 5).unwrap();
        for (qi, q) in queries.iter().enumerate() {
            let model = RankerModel::new(11, defaults.group_size, &defaults.hidden, 0.0, qi as u64).unwrap();
            let (_, grads) = model.loss_and_gradient(q, &loss, ScoreMode::Eval).unwrap();
            for (li, layer) in model.layers.iter().enumerate() {
                for _ in 0..6 {
                    let (r, c) = (
                        rng.random_range(0..layer.weight.nrows()),
                        rng.random_range(0..layer.weight.ncols()),
                    );
                    let eval = |delta: f64| {
                        let mut m = model.clone();
                        m.layers[li].weight[[r, c]] += delta;
                        m.loss_and_gradient(q, &loss, ScoreMode::Eval).unwrap().0
                    };
                    let fd = (eval(h) - eval(-h)) / (2.0 * h);
                    worst = worst.max(rel_err(grads.layers[li].weight[[r, c]], fd));
                    checked += 1;
                }
                for _ in 0..3 {
                    let j = rng.random_range(0..layer.bias.len());
                    let eval = |delta: f64| {
                        let mut m = model.clone();
                        m.layers[li].bias[j] += delta;
                        m.loss_and_gradient(q, &loss, ScoreMode::Eval).unwrap().0
                    };
                    let fd = (eval(h) - eval(-h)) / (2.0 * h);
                    worst = worst.max(rel_err(grads.layers[li].bias[j], fd));
                    checked += 1;
                }
            }
        }
    }
    let t = start.elapsed();
    verdict(
        worst <= GRADIENT_REL_TOL && t < GRADIENT_BUDGET,
        format!("{checked} partials, max relative error {worst:.2e}, {t:.2?}"),
    )
}

fn approx_ndcg_fidelity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut cases = 0;
    while cases < 100 {
        let scores: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[1] - w[0] < APPROX_MIN_GAP) {
            continue;
        }
        let labels: Vec<f64> = (0..10).map(|_| rng.random_range(0..3) as f64).collect();
        if labels.iter().all(|&l| l == 0.0) {
            continue;
        }
        let exact = ndcg_at_k(&labels, &ranking_from_scores(&scores), 10);
        let approx = approx_ndcg_value(&labels, &scores, APPROX_ALPHA, 10);
        worst = worst.max((exact - approx).abs());
        cases += 1;
    }
    verdict(
        worst <= APPROX_TOL,
        format!("max |approx - exact| {worst:.2e} on 100 sets"),
    )
}

fn synthetic_rubi() -> Verdict {
    let start = Instant::now();
    let t = SyntheticTriple::generate(&SyntheticConfig::default(), 2024);
    let inputs = RubiInputs {
        a: t.a,
        b: t.b,
        c: t.c,
        gold_ac: t.gold_ac,
        gold_ab: Some(t.gold_ab),
    };
    let cfg = PipelineConfig::from_text(
        "seed = 1
         train_dict_size = 1500
         cv_dict_size = 500
         wproc_epochs = 2
         wproc_iters_per_epoch = 200
         ltr_iterations = 2000
         ltr_hidden = 64,32
         ltr_eval_every = 500",
    )
    .unwrap();
    let run = match run_rubi(&cfg, &inputs) {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(e.to_string()),
    };
    let nn = rank_baseline(&cfg, &run.map_ab, &inputs.a, &inputs.b, inputs.gold_ab.as_ref()).unwrap();
    let (p, b) = (run.result.precision_at_1.unwrap(), nn.result.precision_at_1.unwrap());
    let elapsed = start.elapsed();
    verdict(
        p >= SYNTHETIC_P1 && p >= b && elapsed < SYNTHETIC_BUDGET,
        format!("learned p@1 {p:.4}, nn p@1 {b:.4}, {elapsed:.1?}"),
    )
}

fn real_data() -> Verdict {
    let Some(dir) = std::env::var_os("RUBI_REAL_DATA_DIR").map(PathBuf::from) else {
        return Verdict::Skipped("RUBI_REAL_DATA_DIR not set".into());
    };
    let files = [
        "wiki.en.vec",
        "wiki.es.vec",
        "wiki.fr.vec",
        "en-fr.txt",
        "en-es.5000-6500.txt",
    ];
    if let Some(missing) = files.iter().find(|f| !dir.join(f).exists()) {
        return Verdict::Skipped(format!("{} missing", dir.join(missing).display()));
    }
    let mut cfg = PipelineConfig::default();
    let text = format!(
        "lang_a = en\nlang_b = es\nlang_c = fr\nmax_vocab = 20000\nseed = 1\n\
         embeddings_a = {0}/wiki.en.vec\nembeddings_b = {0}/wiki.es.vec\nembeddings_c = {0}/wiki.fr.vec\n\
         dictionary_ac = {0}/en-fr.txt\ndictionary_ab = {0}/en-es.5000-6500.txt\n",
        dir.display()
    );
    for line in text.lines() {
        let (k, v) = line.split_once('=').unwrap();
        cfg.set(k, v).unwrap();
    }
    let result = RubiInputs::load(&cfg).and_then(|inputs| {
        let run = run_rubi(&cfg, &inputs)?;
        let mut base_cfg = cfg.clone();
        base_cfg.criterion = Criterion::Csls;
        let csls = rank_baseline(&base_cfg, &run.map_ab, &inputs.a, &inputs.b, inputs.gold_ab.as_ref())?;
        Ok((run.result.precision_at_1.unwrap(), csls.result.precision_at_1.unwrap()))
    });
    match result {
        Ok((p, c)) => verdict(p >= c + REAL_MARGIN, format!("learned p@1 {p:.4}, csls p@1 {c:.4}")),
        Err(e) => Verdict::Fail(e.to_string()),
    }
}

fn write_fixture(dir: &Path) {
    let t = SyntheticTriple::generate(
        &SyntheticConfig {
            n: 200,
            d: 10,
            ..SyntheticConfig::default()
        },
        8,
    );
    save_embeddings(&t.a, dir.join("a.vec")).unwrap();
    save_embeddings(&t.b, dir.join("b.vec")).unwrap();
    save_embeddings(&t.c, dir.join("c.vec")).unwrap();
    t.gold_ac.save(dir.join("ac.txt")).unwrap();
    t.gold_ab.save(dir.join("ab.txt")).unwrap();
    let cfg = format!(
        "embeddings_a = {0}/a.vec\nembeddings_b = {0}/b.vec\nembeddings_c = {0}/c.vec\n\
         dictionary_ac = {0}/ac.txt\ndictionary_ab = {0}/ab.txt\n\
         train_dict_size = 100\ncv_dict_size = 40\nk_max = 4\n\
         wproc_batch_size = 80\nwproc_epochs = 1\nwproc_iters_per_epoch = 100\n\
         ltr_iterations = 200\nltr_batch_size = 8\nltr_hidden = 16,8\nltr_eval_every = 50\n",
        dir.display()
    );
    std::fs::write(dir.join("run.cfg"), cfg).unwrap();
}

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_rubi"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "`rubi {}` failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn cli_determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_fixture(d);
    let p = |name: &str| d.join(name).display().to_string();
    let cfg = p("run.cfg");

    let round = |tag: &str| -> Result<Vec<(String, Vec<u8>)>, String> {
        let f = |name: &str| p(&format!("{tag}_{name}"));
        cli(&[
            "align",
            "--config",
            &cfg,
            "--source",
            &p("a.vec"),
            "--target",
            &p("c.vec"),
            "--target-lang",
            "c",
            "--seed",
            "3",
            "--out",
            &f("map.txt"),
            "--log",
            &f("conv.csv"),
        ])?;
        cli(&[
            "candidates",
            "--config",
            &cfg,
            "--source",
            &p("a.vec"),
            "--target",
            &p("c.vec"),
            "--target-lang",
            "c",
            "--map",
            &f("map.txt"),
            "--words",
            &p("ac.txt"),
            "--out",
            &f("cands.tsv"),
        ])?;
        cli(&[
            "featurize",
            "--config",
            &cfg,
            "--source",
            &p("a.vec"),
            "--target",
            &p("c.vec"),
            "--target-lang",
            "c",
            "--map",
            &f("map.txt"),
            "--candidates",
            &f("cands.tsv"),
            "--dict",
            &p("ac.txt"),
            "--out",
            &f("feats.csv"),
        ])?;
        cli(&[
            "train",
            "--config",
            &cfg,
            "--features",
            &f("feats.csv"),
            "--seed",
            "3",
            "--out",
            &f("model.txt"),
            "--report",
            &f("train.csv"),
        ])?;
        cli(&[
            "predict",
            "--model",
            &f("model.txt"),
            "--features",
            &f("feats.csv"),
            "--out",
            &f("pred.tsv"),
        ])?;
        cli(&[
            "evaluate",
            "--config",
            &cfg,
            "--predictions",
            &f("pred.tsv"),
            "--dict",
            &p("ac.txt"),
            "--out",
            &f("eval.json"),
        ])?;
        cli(&["rubi", "--config", &cfg, "--seed", "3", "--out-dir", &f("run")])?;
        cli(&[
            "baseline",
            "--config",
            &cfg,
            "--seed",
            "3",
            "--criterion",
            "csls",
            "--out",
            &f("base.json"),
        ])?;
        let names = [
            "map.txt",
            "conv.csv",
            "cands.tsv",
            "feats.csv",
            "model.txt",
            "train.csv",
            "pred.tsv",
            "eval.json",
            "run/results.json",
            "run/model.txt",
            "run/map_ab.txt",
            "run/predictions.tsv",
            "run/manifest.json",
            "base.json",
        ];
        names
            .iter()
            .map(|n| {
                std::fs::read(f(n))
                    .map(|b| (n.to_string(), b))
                    .map_err(|e| format!("{n}: {e}"))
            })
            .collect()
    };
    let (first, second) = match round("x").and_then(|a| Ok((a, round("y")?))) {
        Ok(v) => v,
        Err(e) => return Verdict::Fail(e),
    };
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(a, b)| a.1 != b.1)
        .map(|(a, _)| a.0.as_str())
        .collect();
    verdict(
        differing.is_empty(),
        if differing.is_empty() {
            format!(
                "{} artifacts byte-identical across two runs of all 8 subcommands",
                first.len()
            )
        } else {
            format!("differing: {}", differing.join(", "))
        },
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("procrustes recovery", procrustes_recovery),
        ("assignment exactness", assignment_exactness),
        ("csls identity and hubness", csls_identity),
        ("loss and backprop gradients", gradient_checks),
        ("approx ndcg fidelity", approx_ndcg_fidelity),
        ("synthetic end-to-end", synthetic_rubi),
        ("real-data relative ordering", real_data),
        ("cli determinism", cli_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let (tag, detail) = match check() {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skipped(d) => ("SKIPPED", d),
        };
        println!("{tag:<7} {name}: {detail}");
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
