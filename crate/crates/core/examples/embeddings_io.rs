//! Writes a small language pair to disk in fastText and dictionary formats,
//! reads it back and splits the dictionary by frequency.
//!
//! ```text
//! cargo run --example embeddings_io -- /tmp/pair
//! ```

use std::path::PathBuf;

use rubi::embeddings::{load_embeddings, save_embeddings, Normalization};
use rubi::pipeline::{load_dictionary, split_dictionary};
use rubi::synthetic::{IsometricPair, SyntheticConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir);
    std::fs::create_dir_all(&dir)?;
    let pair = IsometricPair::generate(
        &SyntheticConfig {
            n: 300,
            d: 16,
            ..SyntheticConfig::default()
        },
        1,
    );
    let (src, tgt, dict) = (dir.join("src.vec"), dir.join("tgt.vec"), dir.join("src-tgt.txt"));
    save_embeddings(&pair.source, &src)?;
    save_embeddings(&pair.target, &tgt)?;
    pair.lexicon().save(&dict)?;

    let (space, report) = load_embeddings(&src, "src", 250)?;
    println!(
        "{}: {} of {} words, {} dims",
        src.display(),
        space.len(),
        report.declared_rows,
        space.dim()
    );
    let space = space.normalized(Normalization::CenterL2).0;

    let (lex, dreport) = load_dictionary(&dict, "src", "tgt")?;
    let (train, cv, split) = split_dictionary(&lex, &space, 150, 50);
    println!(
        "dictionary: {} pairs, train {} words, cv {} words, {} not in the truncated vocabulary",
        dreport.pairs_read,
        train.len(),
        cv.len(),
        split.missing_from_vocab
    );
    Ok(())
}
