use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// One query word with its candidate items, their features and graded
/// relevance labels. Queries may have different lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingQuery {
    pub query_id: String,
    /// Candidate tokens, when known.
    pub items: Vec<String>,
    /// One row of features per item.
    pub features: Array2<f64>,
    pub labels: Vec<u32>,
}

impl RankingQuery {
    pub fn new(query_id: impl Into<String>, features: Array2<f64>, labels: Vec<u32>) -> Result<Self> {
        let query_id = query_id.into();
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "query `{query_id}`: {} feature rows for {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if features.nrows() == 0 {
            return Err(Error::invalid(format!("query `{query_id}` has no items")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("features of query `{query_id}`")));
        }
        Ok(RankingQuery {
            query_id,
            items: Vec::new(),
            features,
            labels,
        })
    }

    pub fn with_items(mut self, items: Vec<String>) -> Result<Self> {
        if items.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "query `{}`: {} items for {} rows",
                self.query_id,
                items.len(),
                self.len()
            )));
        }
        self.items = items;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn label_values(&self) -> Vec<f64> {
        self.labels.iter().map(|&y| f64::from(y)).collect()
    }

    pub fn all_zero(&self) -> bool {
        self.labels.iter().all(|&y| y == 0)
    }
}

/// Reads the `query,candidate,label,<features…>` CSV, one query per run of
/// consecutive rows sharing a query word.
pub fn read_feature_csv(path: impl AsRef<Path>) -> Result<Vec<RankingQuery>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| Error::io(path, e))?
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 4 || cols[..3] != ["query", "candidate", "label"] {
        return Err(Error::parse(
            path,
            1,
            "expected header `query,candidate,label,<features…>`",
        ));
    }
    let dim = cols.len() - 3;

    struct Pending {
        id: String,
        items: Vec<String>,
        rows: Vec<f64>,
        labels: Vec<u32>,
    }
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut cur: Option<Pending> = None;
    let flush = |p: Pending, out: &mut Vec<RankingQuery>| -> Result<()> {
        let n = p.labels.len();
        let features = Array2::from_shape_vec((n, dim), p.rows).expect("rows have the header width");
        out.push(RankingQuery::new(p.id, features, p.labels)?.with_items(p.items)?);
        Ok(())
    };
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols.len() {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected {} fields, got {}", cols.len(), f.len()),
            ));
        }
        let label: u32 = f[2]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad label `{}`", f[2])))?;
        let values = f[3..]
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::parse(path, lineno, "bad feature value"))?;
        if cur.as_ref().is_none_or(|p| p.id != f[0]) {
            if let Some(p) = cur.take() {
                flush(p, &mut out)?;
            }
            if !seen.insert(f[0].to_string()) {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("rows of query `{}` are not contiguous", f[0]),
                ));
            }
            cur = Some(Pending {
                id: f[0].to_string(),
                items: Vec::new(),
                rows: Vec::new(),
                labels: Vec::new(),
            });
        }
        let p = cur.as_mut().expect("just set");
        p.items.push(f[1].to_string());
        p.rows.extend(values);
        p.labels.push(label);
    }
    if let Some(p) = cur.take() {
        flush(p, &mut out)?;
    }
    Ok(out)
}
