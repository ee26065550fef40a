use std::process::Command;

use rubi::alignment::{procrustes_map, AlignmentMap};
use rubi::embeddings::save_embeddings;
use rubi::ltr::RankingQuery;
use rubi::pipeline::{rank_baseline, run_rubi, Lexicon, PipelineConfig, RubiInputs};
use rubi::retrieval::Criterion;
use rubi::synthetic::{HubCloud, SyntheticConfig, SyntheticFamily, SyntheticTriple};

fn quick_config(seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig::from_text(
        "train_dict_size = 400
         cv_dict_size = 150
         k_max = 5
         wproc_batch_size = 200
         wproc_epochs = 2
         wproc_iters_per_epoch = 100
         ltr_iterations = 800
         ltr_batch_size = 16
         ltr_hidden = 32,16
         ltr_group_size = 2
         ltr_eval_every = 200",
    )
    .unwrap();
    cfg.seed = seed;
    cfg
}

fn small(n: usize, d: usize) -> SyntheticConfig {
    SyntheticConfig {
        n,
        d,
        ..SyntheticConfig::default()
    }
}

#[test]
fn prediction_on_the_pivot_itself_matches_training() {
    let t = SyntheticTriple::generate(&small(700, 20), 31);
    let inputs = RubiInputs {
        a: t.a,
        b: t.c.clone(),
        c: t.c,
        gold_ac: t.gold_ac.clone(),
        gold_ab: Some(t.gold_ac),
    };
    let run = run_rubi(&quick_config(4), &inputs).unwrap();
    let p = run.result.precision_at_1.unwrap();
    assert!(
        p >= run.train_precision_at_1 - 0.02,
        "prediction {p}, training {}",
        run.train_precision_at_1
    );
    assert_eq!(run.map_ab, run.map_ac);
}

#[test]
fn prediction_is_stable_across_pivots() {
    let family = SyntheticFamily::generate(&small(1000, 30), 12, &["a", "b", "c", "d"]);
    let [a, b, c1, c2]: [_; 4] = family.spaces.clone().try_into().unwrap();
    let gold_ab = family.lexicon(0, 1);
    let cfg = quick_config(9);
    let precision = |c, gold_ac| {
        let inputs = RubiInputs {
            a: a.clone(),
            b: b.clone(),
            c,
            gold_ac,
            gold_ab: Some(gold_ab.clone()),
        };
        run_rubi(&cfg, &inputs).unwrap().result.precision_at_1.unwrap()
    };
    let p1 = precision(c1, family.lexicon(0, 2));
    let p2 = precision(c2, family.lexicon(0, 3));
    assert!((p1 - p2).abs() <= 0.02, "pivot c {p1}, pivot d {p2}");
}

#[test]
fn nn_under_the_true_map_is_nearly_perfect() {
    let t = SyntheticTriple::generate(
        &SyntheticConfig {
            noise: 0.001,
            ..small(500, 20)
        },
        3,
    );
    let map = procrustes_map(&t.a, &t.b, &t.gold_ab.row_pairs(&t.a, &t.b)).unwrap();
    let run = rank_baseline(&quick_config(0), &map, &t.a, &t.b, Some(&t.gold_ab)).unwrap();
    assert!(run.result.precision_at_1.unwrap() >= 0.99);
}

#[test]
fn csls_beats_nn_on_the_hub_cloud() {
    let hub = HubCloud::generate(500, 20, 1.0, 1.5, 7);
    let mut gold = Lexicon::new("s", "t");
    for i in 0..500 {
        gold.insert(hub.source.word(i), hub.target.word(i));
    }
    let map = AlignmentMap::identity(20, "s", "t");
    let mut cfg = quick_config(0);
    let p = |c: Criterion, cfg: &mut PipelineConfig| {
        cfg.criterion = c;
        rank_baseline(cfg, &map, &hub.source, &hub.target, Some(&gold))
            .unwrap()
            .result
            .precision_at_1
            .unwrap()
    };
    let nn = p(Criterion::Nn, &mut cfg);
    let csls = p(Criterion::Csls, &mut cfg);
    assert!(csls >= nn, "csls {csls}, nn {nn}");
}

#[test]
fn candidate_queries_round_trip_through_features() {
    let t = SyntheticTriple::generate(&small(200, 10), 5);
    let map = procrustes_map(&t.a, &t.c, &t.gold_ac.row_pairs(&t.a, &t.c)).unwrap();
    let cfg = quick_config(0);
    let pair = rubi::retrieval::AlignedPair::new(&map, &t.a, &t.c).unwrap();
    let stats = rubi::pipeline::feature_stats(&pair, cfg.k_max).unwrap();
    let rows: Vec<usize> = (0..50).collect();
    let set = rubi::pipeline::build_queries(
        &pair,
        &rows,
        &rubi::retrieval::Scoring::Nn,
        &stats,
        Some(&t.gold_ac),
        &cfg,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.csv");
    rubi::retrieval::write_feature_csv(&path, &set.lists, &set.features, &set.labels, cfg.k_max).unwrap();
    let back: Vec<RankingQuery> = rubi::ltr::read_feature_csv(&path).unwrap();
    assert_eq!(back, set.queries().unwrap());
}

fn rubi_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rubi"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).display().to_string();

    // missing --seed
    assert_eq!(rubi_cli(&["rubi", "--out-dir", &p("run")]).status.code(), Some(2));
    // missing inputs
    assert_eq!(
        rubi_cli(&["rubi", "--seed", "1", "--out-dir", &p("run")]).status.code(),
        Some(2)
    );
    // unknown config key
    std::fs::write(p("bad.cfg"), "colour = blue\n").unwrap();
    let out = rubi_cli(&["baseline", "--config", &p("bad.cfg")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    // training that blows up is a numerical failure
    let t = SyntheticTriple::generate(&small(120, 6), 2);
    save_embeddings(&t.a, p("a.vec")).unwrap();
    save_embeddings(&t.c, p("c.vec")).unwrap();
    t.gold_ac.save(p("ac.txt")).unwrap();
    let common = ["--set", "train_dict_size=60", "--set", "k_max=3"];
    let run = |extra: &[&str]| {
        let mut args: Vec<&str> = extra.to_vec();
        args.extend_from_slice(&common);
        rubi_cli(&args)
    };
    let map = p("map.txt");
    let cands = p("c.tsv");
    let feats = p("f.csv");
    let model = p("m.txt");
    for step in [
        vec![
            "align",
            "--source",
            &p("a.vec"),
            "--target",
            &p("c.vec"),
            "--seed",
            "1",
            "--out",
            &map,
            "--set",
            "wproc_batch_size=50",
            "--set",
            "wproc_iters_per_epoch=20",
        ],
        vec![
            "candidates",
            "--source",
            &p("a.vec"),
            "--target",
            &p("c.vec"),
            "--map",
            &map,
            "--words",
            &p("ac.txt"),
            "--out",
            &cands,
        ],
        vec![
            "featurize",
            "--source",
            &p("a.vec"),
            "--target",
            &p("c.vec"),
            "--map",
            &map,
            "--candidates",
            &cands,
            "--dict",
            &p("ac.txt"),
            "--out",
            &feats,
        ],
    ] {
        let out = run(&step);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let out = run(&[
        "train",
        "--features",
        &feats,
        "--seed",
        "1",
        "--out",
        &model,
        "--set",
        "ltr_learning_rate=1e300",
        "--set",
        "ltr_iterations=50",
        "--set",
        "ltr_loss=softmax_ce",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
