//! Writes a synthetic triple of languages and a config file that the
//! `rubi` command-line tool can run on.
//!
//! ```text
//! cargo run --example cli_fixture -- /tmp/demo
//! cargo run --release --bin rubi -- rubi --config /tmp/demo/run.cfg --seed 1 --out-dir /tmp/demo/run
//! ```

use std::path::PathBuf;

use rubi::embeddings::save_embeddings;
use rubi::synthetic::{SyntheticConfig, SyntheticTriple};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("rubi-demo"));
    std::fs::create_dir_all(&dir)?;

    let t = SyntheticTriple::generate_with_langs(
        &SyntheticConfig {
            n: 1000,
            d: 30,
            ..SyntheticConfig::default()
        },
        5,
        ["en", "es", "fr"],
    );
    save_embeddings(&t.a, dir.join("en.vec"))?;
    save_embeddings(&t.b, dir.join("es.vec"))?;
    save_embeddings(&t.c, dir.join("fr.vec"))?;
    t.gold_ac.save(dir.join("en-fr.txt"))?;
    t.gold_ab.save(dir.join("en-es.txt"))?;

    let d = dir.display();
    let cfg = format!(
        "lang_a = en\nlang_b = es\nlang_c = fr\n\
         embeddings_a = {d}/en.vec\nembeddings_b = {d}/es.vec\nembeddings_c = {d}/fr.vec\n\
         dictionary_ac = {d}/en-fr.txt\ndictionary_ab = {d}/en-es.txt\n\
         train_dict_size = 600\ncv_dict_size = 200\n\
         wproc_epochs = 2\nwproc_iters_per_epoch = 200\n\
         ltr_iterations = 1500\nltr_hidden = 64,32\nltr_eval_every = 500\n"
    );
    std::fs::write(dir.join("run.cfg"), cfg)?;
    println!("{}", dir.join("run.cfg").display());
    Ok(())
}
