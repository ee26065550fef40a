//! Monolingual embedding spaces: the fastText `.vec` text format, row
//! normalization and the token/row index.
//!
//! A `.vec` file starts with a header line `n d` followed by one
//! `token c1 … cd` line per word, most frequent words first. Files whose
//! name ends in `.gz` are read and written through gzip.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// Share of malformed rows above which loading fails.
const MAX_MALFORMED_FRACTION: f64 = 0.01;

/// Normalization state of an [`EmbeddingSpace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Normalization {
    Raw,
    L2,
    CenterL2,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Raw => "raw",
            Normalization::L2 => "l2",
            Normalization::CenterL2 => "center_l2",
        })
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Normalization::Raw),
            "l2" => Ok(Normalization::L2),
            "center_l2" => Ok(Normalization::CenterL2),
            other => Err(Error::invalid(format!("unknown normalization `{other}`"))),
        }
    }
}

/// Exact, case-sensitive token to row map.
#[derive(Debug, Clone, Default)]
pub struct VocabIndex {
    rows: HashMap<String, usize>,
}

impl VocabIndex {
    pub fn get(&self, token: &str) -> Option<usize> {
        self.rows.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// A vocabulary plus one `d`-dimensional vector per word, in frequency order.
#[derive(Debug, Clone)]
pub struct EmbeddingSpace {
    lang: String,
    words: Vec<String>,
    index: VocabIndex,
    vectors: Array2<f64>,
    normalized: Normalization,
}

impl EmbeddingSpace {
    /// Builds a raw space, checking that tokens are unique and coordinates finite.
    pub fn new(lang: impl Into<String>, words: Vec<String>, vectors: Array2<f64>) -> Result<Self> {
        if words.len() != vectors.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} words but {} vectors",
                words.len(),
                vectors.nrows()
            )));
        }
        if let Some(pos) = vectors.iter().position(|v| !v.is_finite()) {
            let d = vectors.ncols().max(1);
            return Err(Error::NonFinite(format!(
                "coordinate {} of word `{}`",
                pos % d,
                words[pos / d]
            )));
        }
        let mut rows = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if rows.insert(w.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate token `{w}`")));
            }
        }
        Ok(EmbeddingSpace {
            lang: lang.into(),
            words,
            index: VocabIndex { rows },
            vectors,
            normalized: Normalization::Raw,
        })
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, row: usize) -> &str {
        &self.words[row]
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn vector(&self, row: usize) -> ArrayView1<'_, f64> {
        self.vectors.row(row)
    }

    pub fn normalization(&self) -> Normalization {
        self.normalized
    }

    pub fn index(&self) -> &VocabIndex {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    /// Row of `token`, if present. Matching is byte-exact.
    pub fn lookup(&self, token: &str) -> Option<usize> {
        self.index.get(token)
    }

    /// Rows whose vector is exactly zero.
    pub fn zero_rows(&self) -> Vec<usize> {
        self.vectors
            .axis_iter(Axis(0))
            .enumerate()
            .filter(|(_, r)| r.iter().all(|&v| v == 0.0))
            .map(|(i, _)| i)
            .collect()
    }

    /// Keeps the `n` most frequent words.
    pub fn truncated(&self, n: usize) -> EmbeddingSpace {
        let n = n.min(self.len());
        let words = self.words[..n].to_vec();
        let index = VocabIndex {
            rows: words.iter().cloned().zip(0..).collect(),
        };
        EmbeddingSpace {
            lang: self.lang.clone(),
            words,
            index,
            vectors: self.vectors.slice(ndarray::s![..n, ..]).to_owned(),
            normalized: self.normalized,
        }
    }

    /// Returns a normalized copy. See [`normalize`].
    pub fn normalized(self, mode: Normalization) -> (EmbeddingSpace, NormalizeReport) {
        normalize(self, mode)
    }
}

/// Bookkeeping produced while reading a `.vec` file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub declared_rows: usize,
    pub dim: usize,
    /// 1-based line numbers of repeated tokens that were dropped.
    pub duplicate_lines: Vec<usize>,
    /// 1-based line numbers of rows with the wrong number of coordinates.
    pub malformed_lines: Vec<usize>,
}

impl LoadReport {
    pub fn duplicates_skipped(&self) -> usize {
        self.duplicate_lines.len()
    }
}

fn open_reader(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let is_gz = path.extension().is_some_and(|e| e == "gz");
    let inner: Box<dyn Read> = if is_gz {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    Ok(Box::new(BufReader::with_capacity(1 << 20, inner)))
}

fn split_fields(line: &str) -> impl Iterator<Item = &str> {
    line.trim_end_matches(['\n', '\r']).split(' ').filter(|f| !f.is_empty())
}

/// Reads at most `max_vocab` distinct words from a fastText `.vec` file.
///
/// Repeated tokens keep their first occurrence. Rows with the wrong
/// coordinate count are skipped with a warning unless they exceed 1% of the
/// rows read, in which case loading fails. A non-finite coordinate is fatal.
pub fn load_embeddings(path: impl AsRef<Path>, lang: &str, max_vocab: usize) -> Result<(EmbeddingSpace, LoadReport)> {
    let path = path.as_ref();
    if max_vocab == 0 {
        return Err(Error::invalid("max_vocab must be at least 1"));
    }
    let mut reader = open_reader(path)?;
    let mut header = String::new();
    reader.read_line(&mut header).map_err(|e| Error::io(path, e))?;
    let fields: Vec<&str> = split_fields(&header).collect();
    let (declared_rows, dim) = match fields.as_slice() {
        [n, d] => match (n.parse::<usize>(), d.parse::<usize>()) {
            (Ok(n), Ok(d)) if d > 0 => (n, d),
            _ => return Err(Error::parse(path, 1, format!("malformed header `{}`", header.trim()))),
        },
        _ => return Err(Error::parse(path, 1, format!("malformed header `{}`", header.trim()))),
    };

    let capacity = declared_rows.min(max_vocab);
    let mut report = LoadReport {
        declared_rows,
        dim,
        ..Default::default()
    };
    let mut words = Vec::with_capacity(capacity);
    let mut data = Vec::with_capacity(capacity * dim);
    let mut seen: HashMap<String, usize> = HashMap::with_capacity(capacity);
    let mut rows_read = 0usize;
    let mut line = String::new();
    let mut line_no = 1usize;

    while words.len() < max_vocab {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let mut fields = split_fields(&line);
        let Some(token) = fields.next() else {
            continue;
        };
        rows_read += 1;
        let start = data.len();
        let mut count = 0usize;
        let mut bad_number = false;
        for f in fields {
            count += 1;
            if count > dim {
                break;
            }
            match f.parse::<f64>() {
                Ok(v) if v.is_finite() => data.push(v),
                Ok(_) => {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!("non-finite coordinate {} of `{token}`", count - 1),
                    ))
                }
                Err(_) => {
                    bad_number = true;
                    break;
                }
            }
        }
        if count != dim || bad_number {
            data.truncate(start);
            log::warn!(
                "{}:{line_no}: expected {dim} coordinates for `{token}`, skipping row",
                path.display()
            );
            report.malformed_lines.push(line_no);
            continue;
        }
        if seen.contains_key(token) {
            data.truncate(start);
            report.duplicate_lines.push(line_no);
            continue;
        }
        seen.insert(token.to_string(), words.len());
        words.push(token.to_string());
    }

    if rows_read > 0 && report.malformed_lines.len() as f64 > MAX_MALFORMED_FRACTION * rows_read as f64 {
        return Err(Error::parse(
            path,
            report.malformed_lines[0],
            format!(
                "{} of {rows_read} rows have the wrong coordinate count",
                report.malformed_lines.len()
            ),
        ));
    }
    if !report.duplicate_lines.is_empty() {
        log::warn!(
            "{}: skipped {} duplicate tokens",
            path.display(),
            report.duplicate_lines.len()
        );
    }

    let vectors =
        Array2::from_shape_vec((words.len(), dim), data).map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    let space = EmbeddingSpace {
        lang: lang.to_string(),
        words,
        index: VocabIndex { rows: seen },
        vectors,
        normalized: Normalization::Raw,
    };
    Ok((space, report))
}

/// Writes a space in `.vec` format (gzip when the name ends in `.gz`).
pub fn save_embeddings(space: &EmbeddingSpace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let is_gz = path.extension().is_some_and(|e| e == "gz");
    let sink: Box<dyn Write> = if is_gz {
        Box::new(GzEncoder::new(file, Compression::default()))
    } else {
        Box::new(file)
    };
    let mut out = BufWriter::new(sink);
    let write = |out: &mut BufWriter<Box<dyn Write>>| -> std::io::Result<()> {
        writeln!(out, "{} {}", space.len(), space.dim())?;
        for (word, row) in space.words.iter().zip(space.vectors.axis_iter(Axis(0))) {
            out.write_all(word.as_bytes())?;
            for v in row {
                write!(out, " {v}")?;
            }
            out.write_all(b"\n")?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

/// Rows left at zero by [`normalize`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NormalizeReport {
    pub zero_rows: Vec<usize>,
}

/// Scales every row to unit length, optionally removing the column mean first.
///
/// Zero rows stay zero so that row indices remain aligned with dictionaries;
/// they are left out of the mean and listed in the report.
pub fn normalize(mut space: EmbeddingSpace, mode: Normalization) -> (EmbeddingSpace, NormalizeReport) {
    let is_zero = |row: ArrayView1<'_, f64>| row.iter().all(|&v| v == 0.0);
    let input_zero: Vec<bool> = space.vectors.axis_iter(Axis(0)).map(is_zero).collect();

    if mode == Normalization::CenterL2 {
        let d = space.dim();
        let mut mean = vec![0.0; d];
        let mut count = 0usize;
        for (row, &zero) in space.vectors.axis_iter(Axis(0)).zip(&input_zero) {
            if !zero {
                count += 1;
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += v;
                }
            }
        }
        if count > 0 {
            for m in &mut mean {
                *m /= count as f64;
            }
            for (mut row, &zero) in space.vectors.axis_iter_mut(Axis(0)).zip(&input_zero) {
                if !zero {
                    for (v, m) in row.iter_mut().zip(&mean) {
                        *v -= m;
                    }
                }
            }
        }
    }

    let mut report = NormalizeReport::default();
    if mode != Normalization::Raw {
        for (i, mut row) in space.vectors.axis_iter_mut(Axis(0)).enumerate() {
            let norm = row.dot(&row).sqrt();
            if norm > 0.0 {
                row.mapv_inplace(|v| v / norm);
            } else {
                row.fill(0.0);
                report.zero_rows.push(i);
            }
        }
        space.normalized = mode;
    }
    (space, report)
}
