use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::embeddings::EmbeddingSpace;
use crate::error::{Error, Result};

/// Word → set of accepted translations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<String, BTreeSet<String>>,
    pub source_lang: String,
    pub target_lang: String,
}

impl Lexicon {
    pub fn new(source_lang: impl Into<String>, target_lang: impl Into<String>) -> Self {
        Lexicon {
            entries: BTreeMap::new(),
            source_lang: source_lang.into(),
            target_lang: target_lang.into(),
        }
    }

    /// Adds a pair; returns false if it was already present. Empty tokens are ignored.
    pub fn insert(&mut self, source: &str, target: &str) -> bool {
        if source.is_empty() || target.is_empty() {
            return false;
        }
        self.entries
            .entry(source.to_string())
            .or_default()
            .insert(target.to_string())
    }

    pub fn translations(&self, source: &str) -> Option<&BTreeSet<String>> {
        self.entries.get(source)
    }

    pub fn contains(&self, source: &str) -> bool {
        self.entries.contains_key(source)
    }

    pub fn is_translation(&self, source: &str, target: &str) -> bool {
        self.entries.get(source).is_some_and(|t| t.contains(target))
    }

    /// Number of source words.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn pair_count(&self) -> usize {
        self.entries.values().map(BTreeSet::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeSet<String>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Source words present in `space`, most frequent first.
    pub fn sources_by_frequency(&self, space: &EmbeddingSpace) -> Vec<(usize, &str)> {
        let mut rows: Vec<(usize, &str)> = self
            .entries
            .keys()
            .filter_map(|w| space.lookup(w).map(|r| (r, w.as_str())))
            .collect();
        rows.sort_unstable();
        rows
    }

    /// Every `(source row, target row)` pair with both words in vocabulary.
    pub fn row_pairs(&self, source: &EmbeddingSpace, target: &EmbeddingSpace) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for (row, word) in self.sources_by_frequency(source) {
            for t in &self.entries[word] {
                if let Some(tr) = target.lookup(t) {
                    pairs.push((row, tr));
                }
            }
        }
        pairs
    }

    /// MUSE layout: one `source target` pair per line.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for (s, ts) in &self.entries {
            for t in ts {
                out.push_str(s);
                out.push(' ');
                out.push_str(t);
                out.push('\n');
            }
        }
        File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DictionaryReport {
    pub pairs_read: usize,
    pub duplicates: usize,
    /// 1-based numbers of lines that were not exactly two tokens.
    pub unparseable_lines: Vec<usize>,
}

/// Reads a whitespace-separated `source target` dictionary, merging repeats.
pub fn load_dictionary(
    path: impl AsRef<Path>,
    source_lang: &str,
    target_lang: &str,
) -> Result<(Lexicon, DictionaryReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lex = Lexicon::new(source_lang, target_lang);
    let mut report = DictionaryReport::default();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [s, t] => {
                report.pairs_read += 1;
                if !lex.insert(s, t) {
                    report.duplicates += 1;
                }
            }
            _ => report.unparseable_lines.push(i + 1),
        }
    }
    if !report.unparseable_lines.is_empty() {
        log::warn!(
            "{}: skipped {} unparseable lines",
            path.display(),
            report.unparseable_lines.len()
        );
    }
    if lex.is_empty() {
        return Err(Error::parse(path, 1, "dictionary has no usable entries"));
    }
    Ok((lex, report))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplitReport {
    /// Source words dropped because the embedding vocabulary lacks them.
    pub missing_from_vocab: usize,
}

/// Splits by source-word frequency: the first `train_n` words present in
/// `space` go to training, the next `cv_n` to cross-validation.
pub fn split_dictionary(
    lex: &Lexicon,
    space: &EmbeddingSpace,
    train_n: usize,
    cv_n: usize,
) -> (Lexicon, Lexicon, SplitReport) {
    let ordered = lex.sources_by_frequency(space);
    let report = SplitReport {
        missing_from_vocab: lex.len() - ordered.len(),
    };
    let mut train = Lexicon::new(&lex.source_lang, &lex.target_lang);
    let mut cv = Lexicon::new(&lex.source_lang, &lex.target_lang);
    for (k, (_, word)) in ordered.into_iter().enumerate() {
        let dest = if k < train_n {
            &mut train
        } else if k < train_n + cv_n {
            &mut cv
        } else {
            break;
        };
        for t in &lex.entries[word] {
            dest.insert(word, t);
        }
    }
    (train, cv, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn write(dir: &tempfile::TempDir, body: &str) -> std::path::PathBuf {
        let p = dir.path().join("dict.txt");
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn merges_translations_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "cat chat\ncat minou\ncat chat\n");
        let (lex, report) = load_dictionary(&p, "en", "fr").unwrap();
        assert_eq!(lex.len(), 1);
        assert_eq!(lex.translations("cat").unwrap().len(), 2);
        assert_eq!(report.duplicates, 1);
        assert_eq!(report.pairs_read, 3);
    }

    #[test]
    fn ten_line_fixture_tally() {
        let dir = tempfile::tempdir().unwrap();
        let body = "a x\na y\nb z\n\nc\tw\nd q extra\nb z\ne v\nf u\ng\n";
        let p = write(&dir, body);
        let (lex, report) = load_dictionary(&p, "s", "t").unwrap();
        // keys a,b,c,e,f; pairs a-x a-y b-z c-w e-v f-u
        assert_eq!(lex.len(), 5);
        assert_eq!(lex.pair_count(), 6);
        assert_eq!(report.pairs_read, 7);
        assert_eq!(report.duplicates, 1);
        assert_eq!(report.unparseable_lines, vec![6, 10]);
    }

    #[test]
    fn empty_dictionary_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "\n\n");
        assert!(load_dictionary(&p, "s", "t").is_err());
    }

    fn space(n: usize) -> EmbeddingSpace {
        let words = (0..n).map(|i| format!("w{i}")).collect();
        EmbeddingSpace::new("s", words, Array2::zeros((n, 2))).unwrap()
    }

    #[test]
    fn split_follows_embedding_order() {
        let sp = space(20);
        let mut lex = Lexicon::new("s", "t");
        // insert in scrambled order; w15 and w3 etc.
        for i in [15, 3, 9, 0, 12, 7, 18, 5, 1, 11] {
            lex.insert(&format!("w{i}"), &format!("t{i}"));
        }
        lex.insert("unknown", "t99");
        let (train, cv, report) = split_dictionary(&lex, &sp, 6, 2);
        let keys = |l: &Lexicon| {
            let mut v: Vec<usize> = l.iter().map(|(k, _)| k[1..].parse().unwrap()).collect();
            v.sort();
            v
        };
        assert_eq!(keys(&train), vec![0, 1, 3, 5, 7, 9]);
        assert_eq!(keys(&cv), vec![11, 12]);
        assert_eq!(report.missing_from_vocab, 1);
        assert!(!train.contains("unknown") && !cv.contains("unknown"));

        let (train, _, _) = split_dictionary(&lex, &sp, 0, 2);
        assert!(train.is_empty());
    }
}
